//! Column-alignment diagnostics (pair counting, per-band L^2 norms of the
//! square-hit count, the log n / n lower-bound band check) and closed-form
//! concentration bounds with empirical validators.

use alloc::format;
use alloc::vec::Vec;

use crate::asymptotics::{count_substrings, w_set};
use crate::error::{Error, Result};
use crate::favard::FavardEstimate;
use crate::geometry::Angle;
use crate::math;
use crate::models::{classify, Model, Realization};
use crate::quad::{midpoints, QuadratureRule};
use crate::rng::Key;

/// Integer corners (in units of `L^-n`) of the deepest level.
fn corner_units_of_leaves(real: &Realization) -> Result<Vec<(u64, u64)>> {
    let n = real.depth();
    let codes = real.grid_codes(n).ok_or_else(|| {
        Error::Unsupported("pair counting is defined for grid realizations".into())
    })?;
    Ok(codes
        .iter()
        .map(|&c| crate::address::corner_units(c, n, real.l()))
        .collect())
}

fn int_pow(l: u64, e: u32) -> u64 {
    let mut acc = 1u64;
    for _ in 0..e {
        acc *= l;
    }
    acc
}

/// Number of ordered pairs `(Q, Q')` of deepest-level squares with
/// `|x(Q) - x(Q')| <= L^-i` and `|y(Q) - y(Q')| >= L^-j`, exact integer
/// arithmetic on the grid.
pub fn bv_pair_count(real: &Realization, i: u32, j: u32) -> Result<u64> {
    let n = real.depth();
    if i > n || j > n {
        return Err(Error::Parameter(format!(
            "thresholds i={i}, j={j} exceed the depth {n}"
        )));
    }
    let mut pts = corner_units_of_leaves(real)?;
    pts.sort_unstable();
    let l = real.l() as u64;
    let tx = int_pow(l, n - i);
    let ty = int_pow(l, n - j);
    let mut count = 0u64;
    let mut lo = 0usize;
    for a in 0..pts.len() {
        while pts[a].0 - pts[lo].0 > tx {
            lo += 1;
        }
        for b in lo..a {
            let dy = pts[a].1.abs_diff(pts[b].1);
            if dy >= ty {
                count += 2;
            }
        }
    }
    Ok(count)
}

/// All pair counts `(i, j) in [1, n]^2` from one pass over the
/// `|dx| <= L^-1` window, bucketed by the exact threshold exponents.
pub struct PairCountTable {
    n: u32,
    /// `cum[a][b]` = pairs with `|dx| <= L^-i` for all `i <= a` and
    /// `|dy| >= L^-j` for all `j >= b`
    cum: Vec<Vec<u64>>,
}

impl PairCountTable {
    pub fn query(&self, i: u32, j: u32) -> Result<u64> {
        if i < 1 || i > self.n || j < 1 || j > self.n {
            return Err(Error::Parameter(format!(
                "table covers i, j in [1, {}]",
                self.n
            )));
        }
        Ok(self.cum[i as usize][j as usize])
    }

    pub fn depth(&self) -> u32 {
        self.n
    }
}

pub fn bv_pair_count_table(real: &Realization) -> Result<PairCountTable> {
    let n = real.depth();
    let l = real.l() as u64;
    let mut pts = corner_units_of_leaves(real)?;
    pts.sort_unstable();
    let pows: Vec<u64> = (0..=n).map(|e| int_pow(l, e)).collect();
    // hist[a][b]: unordered pairs whose largest admissible i is a and
    // smallest admissible j is b
    let mut hist = alloc::vec![alloc::vec![0u64; n as usize + 2]; n as usize + 1];
    let window = pows[(n - 1) as usize];
    let mut lo = 0usize;
    for a in 0..pts.len() {
        while pts[a].0 - pts[lo].0 > window {
            lo += 1;
        }
        for b in lo..a {
            let dx = pts[a].0 - pts[b].0;
            let dy = pts[a].1.abs_diff(pts[b].1);
            if dy == 0 {
                continue;
            }
            // largest i with dx <= L^(n-i)
            let mut ai = n;
            while dx > pows[(n - ai) as usize] {
                ai -= 1;
            }
            // smallest j with dy >= L^(n-j)
            let mut bj = 1;
            while bj <= n && dy < pows[(n - bj) as usize] {
                bj += 1;
            }
            hist[ai as usize][bj as usize] += 1;
        }
    }
    // cumulative: count(i, j) = 2 * sum_{a >= i} sum_{b <= j} hist[a][b]
    let mut cum = alloc::vec![alloc::vec![0u64; n as usize + 1]; n as usize + 2];
    for i in (1..=n as usize).rev() {
        let mut acc = 0u64;
        for j in 1..=n as usize {
            acc += hist[i][j];
            cum[i][j] = cum[i + 1][j] + acc;
        }
    }
    for row in cum.iter_mut() {
        for v in row.iter_mut() {
            *v *= 2;
        }
    }
    Ok(PairCountTable { n, cum })
}

/// Slope band `tan(theta) in [L^k, L^(k+1)]` within `[0, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandSpec {
    pub k: u32,
}

impl BandSpec {
    pub fn theta_interval(self, l: u32) -> (f64, f64) {
        let lf = l as f64;
        (
            math::atan(math::powi(lf, self.k)),
            math::atan(math::powi(lf, self.k + 1)),
        )
    }
}

/// `∫ f^2 dt` for `f(t) = #{deepest-level squares hit by l(theta, t)}`,
/// exact by an endpoint sweep of the projection intervals.
pub fn band_l2_at(real: &Realization, angle: Angle) -> f64 {
    let n = real.depth();
    let squares = real.grid_squares(n);
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * squares.len());
    for s in &squares {
        let (lo, hi) = crate::geometry::square_projection_span(angle, s);
        events.push((lo, 1));
        events.push((hi, -1));
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut acc = 0.0;
    let mut level: i64 = 0;
    let mut prev = 0.0;
    for (t, d) in events {
        if level > 0 {
            acc += (level * level) as f64 * (t - prev);
        }
        level += d as i64;
        prev = t;
    }
    acc
}

/// Band integral `∫_band ||f_theta||_2^2 dtheta` by midpoint quadrature.
pub fn band_l2(real: &Realization, band: BandSpec, rule: QuadratureRule) -> Result<f64> {
    if band.k < 1 {
        return Err(Error::Parameter("band index k must be >= 1".into()));
    }
    let n = real.depth();
    let lk = int_pow(real.l() as u64, band.k);
    if lk as f64 > n as f64 {
        return Err(Error::Parameter(format!(
            "band k = {} needs L^k <= n = {n}",
            band.k
        )));
    }
    let (lo, hi) = band.theta_interval(real.l());
    let m = rule.offset_nodes();
    let h = (hi - lo) / m as f64;
    let mut acc = 0.0;
    for theta in midpoints(lo, hi, m) {
        acc += band_l2_at(real, Angle::new(theta));
    }
    Ok(acc * h)
}

/// Scaled per-depth values `mean * n / log n` and their stability band.
#[derive(Debug, Clone, PartialEq)]
pub struct BvLowerReport {
    pub rows: Vec<(u32, f64)>,
    pub median: f64,
    /// all rows with `n in [8, 14]` lie within `[median / 3, 3 median]`
    pub pass: bool,
}

/// Checks that `E Fav(S_n) * n / log n` is stable across depths for a
/// degenerate (or deterministic column-aligned) model.
pub fn bv_lower_bound_check(model: &Model, table: &[FavardEstimate]) -> Result<BvLowerReport> {
    let c = classify(model)?;
    if !c.is_degenerate() && !c.is_deterministic {
        return Err(Error::Parameter(
            "lower-bound check applies to degenerate or deterministic models".into(),
        ));
    }
    let mut rows: Vec<(u32, f64)> = Vec::new();
    for e in table {
        if e.n >= 2 {
            rows.push((e.n, e.mean * e.n as f64 / math::ln(e.n as f64)));
        }
    }
    if rows.is_empty() {
        return Err(Error::Parameter("table has no depths n >= 2".into()));
    }
    let mut in_band: Vec<f64> = rows
        .iter()
        .filter(|(n, _)| (8..=14).contains(n))
        .map(|&(_, v)| v)
        .collect();
    if in_band.is_empty() {
        in_band = rows.iter().map(|&(_, v)| v).collect();
    }
    in_band.sort_unstable_by(f64::total_cmp);
    let median = in_band[in_band.len() / 2];
    let pass = in_band
        .iter()
        .all(|&v| v >= median / 3.0 && v <= 3.0 * median);
    Ok(BvLowerReport { rows, median, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Hoeffding,
    Chernoff,
    ChernoffNegDep,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Hoeffding => "hoeffding",
            BoundKind::Chernoff => "chernoff",
            BoundKind::ChernoffNegDep => "chernoff_negdep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationBound {
    pub kind: BoundKind,
    pub epsilon: f64,
    pub bound: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Parameter(format!("epsilon must be in [0, 1], got {eps}")));
    }
    Ok(())
}

/// Two-sided bound for a sum of `n` independent variables with the given
/// ranges, against deviations of `epsilon * n` from the mean:
/// `2 exp(-2 (eps n)^2 / sum (b_i - a_i)^2)`, clamped to 1.
pub fn hoeffding_bound(ranges: &[(f64, f64)], epsilon: f64) -> Result<ConcentrationBound> {
    check_eps(epsilon)?;
    let denom: f64 = ranges.iter().map(|&(a, b)| (b - a) * (b - a)).sum();
    if denom <= 0.0 {
        return Err(Error::Parameter("ranges must have positive total spread".into()));
    }
    let s = epsilon * ranges.len() as f64;
    let bound = (2.0 * math::exp(-2.0 * s * s / denom)).min(1.0);
    Ok(ConcentrationBound {
        kind: BoundKind::Hoeffding,
        epsilon,
        bound,
    })
}

/// Two-sided bound for a Boolean sum against relative deviations:
/// `2 exp(-eps^2 E[X] / 4)`, clamped to 1.
pub fn chernoff_bound(mean: f64, epsilon: f64) -> Result<ConcentrationBound> {
    check_eps(epsilon)?;
    if mean <= 0.0 {
        return Err(Error::Parameter("mean must be positive".into()));
    }
    Ok(ConcentrationBound {
        kind: BoundKind::Chernoff,
        epsilon,
        bound: (2.0 * math::exp(-0.25 * epsilon * epsilon * mean)).min(1.0),
    })
}

/// Lower-tail bound for negatively correlated Boolean sums:
/// `exp(-eps^2 E[X] / 2)`, clamped to 1.
pub fn negdep_chernoff_bound(mean: f64, epsilon: f64) -> Result<ConcentrationBound> {
    check_eps(epsilon)?;
    if mean <= 0.0 {
        return Err(Error::Parameter("mean must be positive".into()));
    }
    Ok(ConcentrationBound {
        kind: BoundKind::ChernoffNegDep,
        epsilon,
        bound: math::exp(-0.5 * epsilon * epsilon * mean).min(1.0),
    })
}

/// Samplers for the empirical validators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    /// Sum of `n` independent Bernoulli(`p`) variables.
    BernoulliSum { n: u32, p: f64 },
    /// Overlapping column-aligned pattern count in an IID-uniform word of
    /// the given length (a negatively correlated Boolean sum).
    WPatternCount { l: u32, k: u32, len: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationCase {
    pub kind: BoundKind,
    pub sampler: Sampler,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub case: ValidationCase,
    pub bound: f64,
    pub trials: u64,
    pub deviations: u64,
    pub frequency: f64,
    pub pass: bool,
}

fn sampler_mean(s: Sampler) -> f64 {
    match s {
        Sampler::BernoulliSum { n, p } => n as f64 * p,
        Sampler::WPatternCount { l, k, len } => {
            (len - k - 1) as f64 / math::powi(l as f64, k + 4)
        }
    }
}

fn draw(s: Sampler, key: Key) -> f64 {
    let mut rng = key.rng();
    match s {
        Sampler::BernoulliSum { n, p } => {
            let mut x = 0u32;
            for _ in 0..n {
                if rng.next_f64() < p {
                    x += 1;
                }
            }
            x as f64
        }
        Sampler::WPatternCount { l, k, len } => {
            let n2 = (l * l) as u64;
            let word: Vec<u8> = (0..len).map(|_| (rng.next_u64() % n2) as u8).collect();
            let set = w_set(l, k);
            count_substrings(&word, &set).unwrap() as f64
        }
    }
}

/// Draws IID samples and checks the observed deviation frequency against
/// the closed-form bound.
pub fn validate_empirically(case: ValidationCase, trials: u64, key: Key) -> Result<ValidationReport> {
    let mean = sampler_mean(case.sampler);
    let bound = match case.kind {
        BoundKind::Hoeffding => {
            let n = match case.sampler {
                Sampler::BernoulliSum { n, .. } => n as usize,
                Sampler::WPatternCount { .. } => {
                    return Err(Error::Parameter(
                        "range-based bound needs an independent bounded sum".into(),
                    ))
                }
            };
            hoeffding_bound(&alloc::vec![(0.0, 1.0); n], case.epsilon)?.bound
        }
        BoundKind::Chernoff => chernoff_bound(mean, case.epsilon)?.bound,
        BoundKind::ChernoffNegDep => negdep_chernoff_bound(mean, case.epsilon)?.bound,
    };
    let mut deviations = 0u64;
    for trial in 0..trials {
        let x = draw(case.sampler, key.child(trial));
        let deviant = match case.kind {
            BoundKind::Hoeffding => {
                let n = match case.sampler {
                    Sampler::BernoulliSum { n, .. } => n as f64,
                    Sampler::WPatternCount { .. } => unreachable!(),
                };
                math::abs(x - mean) >= case.epsilon * n
            }
            BoundKind::Chernoff => math::abs(x - mean) >= case.epsilon * mean,
            BoundKind::ChernoffNegDep => x <= (1.0 - case.epsilon) * mean,
        };
        if deviant {
            deviations += 1;
        }
    }
    let frequency = deviations as f64 / trials as f64;
    Ok(ValidationReport {
        case,
        bound,
        trials,
        deviations,
        frequency,
        pass: frequency <= bound,
    })
}

/// The validation battery run by the bounds command and the checks.
pub fn standard_battery() -> Vec<ValidationCase> {
    alloc::vec![
        ValidationCase {
            kind: BoundKind::Hoeffding,
            sampler: Sampler::BernoulliSum { n: 100, p: 0.5 },
            epsilon: 0.2,
        },
        ValidationCase {
            kind: BoundKind::Hoeffding,
            sampler: Sampler::BernoulliSum { n: 400, p: 0.25 },
            epsilon: 0.1,
        },
        ValidationCase {
            kind: BoundKind::Chernoff,
            sampler: Sampler::BernoulliSum { n: 100, p: 0.5 },
            epsilon: 0.4,
        },
        ValidationCase {
            kind: BoundKind::Chernoff,
            sampler: Sampler::BernoulliSum { n: 1000, p: 0.05 },
            epsilon: 0.3,
        },
        ValidationCase {
            kind: BoundKind::ChernoffNegDep,
            sampler: Sampler::WPatternCount { l: 2, k: 1, len: 500 },
            epsilon: 0.5,
        },
        ValidationCase {
            kind: BoundKind::ChernoffNegDep,
            sampler: Sampler::BernoulliSum { n: 200, p: 0.3 },
            epsilon: 0.4,
        },
    ]
}

/// Per-chain comparison of `Fav(S_n) / reference(n - m)` against the
/// population martingale at scale `m = floor(4 log_L n)` (or a smaller
/// override when the depth budget makes `n - m` too small).
#[derive(Debug, Clone, PartialEq)]
pub struct AsLimitReport {
    pub n: u32,
    pub m_rule: u32,
    pub m_used: u32,
    /// per chain: `ratio - Z_m`
    pub rows: Vec<f64>,
    /// fraction of chains with `ratio - Z_m <= 0.3`
    pub fraction_within: f64,
}

pub fn as_limit_check(
    model: &Model,
    n: u32,
    refs: &[FavardEstimate],
    chains: u32,
    rule: QuadratureRule,
    stream: Key,
    m_override: Option<u32>,
) -> Result<AsLimitReport> {
    let l = model.l() as f64;
    let m_rule = math::floor(4.0 * math::ln(n as f64) / math::ln(l)) as u32;
    let m_used = m_override.map(|m| m.min(m_rule)).unwrap_or(m_rule);
    if m_used >= n {
        return Err(Error::Parameter(format!(
            "n - m = {n} - {m_used} leaves no depth; pass a smaller override \
             (rule m(n) = {m_rule})"
        )));
    }
    let reference = refs
        .iter()
        .find(|e| e.n == n - m_used)
        .map(|e| e.mean)
        .ok_or_else(|| {
            Error::Parameter(format!("reference table does not cover n - m = {}", n - m_used))
        })?;
    let mut rows = Vec::with_capacity(chains as usize);
    let mut within = 0u32;
    for chain in 0..chains {
        let real = crate::models::sample_chain(model, n, stream.child(chain as u64))?;
        let fav = crate::favard::favard_at_level(&real, n, rule, 0.0);
        let z = real.z_trace()[m_used as usize];
        let v = fav / reference - z;
        if v <= 0.3 {
            within += 1;
        }
        rows.push(v);
    }
    Ok(AsLimitReport {
        n,
        m_rule,
        m_used,
        rows,
        fraction_within: within as f64 / chains as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_builtin, sample_chain, Builtin};

    fn one_per_column_real(n: u32, seed: u64) -> Realization {
        let m = make_builtin(Builtin::ColumnDegenerate, 2).unwrap();
        sample_chain(&m, n, Key::new(seed)).unwrap()
    }

    #[test]
    fn pair_count_universe_bound() {
        let r = one_per_column_real(4, 3);
        // i = 0 admits every pair; j = n demands any vertical separation
        let c = bv_pair_count(&r, 0, 4).unwrap();
        let total = 16u64 * 16;
        assert!(c <= total);
    }

    #[test]
    fn pair_count_matches_brute_force() {
        let r = one_per_column_real(5, 9);
        let n = 5;
        let pts = corner_units_of_leaves(&r).unwrap();
        for (i, j) in [(1, 1), (2, 3), (3, 2), (4, 5), (1, 5)] {
            let tx = int_pow(2, n - i);
            let ty = int_pow(2, n - j);
            let mut brute = 0u64;
            for a in &pts {
                for b in &pts {
                    if a == b {
                        continue;
                    }
                    if a.0.abs_diff(b.0) <= tx && a.1.abs_diff(b.1) >= ty {
                        brute += 1;
                    }
                }
            }
            assert_eq!(bv_pair_count(&r, i, j).unwrap(), brute, "i={i} j={j}");
            let table = bv_pair_count_table(&r).unwrap();
            assert_eq!(table.query(i, j).unwrap(), brute, "table i={i} j={j}");
        }
    }

    #[test]
    fn pair_count_monotonicity() {
        let r = one_per_column_real(6, 17);
        let t = bv_pair_count_table(&r).unwrap();
        for i in 1..6 {
            for j in 1..6 {
                assert!(t.query(i + 1, j).unwrap() <= t.query(i, j).unwrap());
                assert!(t.query(i, j + 1).unwrap() >= t.query(i, j).unwrap());
            }
        }
    }

    #[test]
    fn band_l2_single_square_is_projection_length() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        let r = sample_chain(&m, 0, Key::new(1)).unwrap();
        let a = Angle::new(0.7);
        let f = band_l2_at(&r, a);
        let p = crate::favard::projection_length(&r, a, 0.0);
        assert!((f - p).abs() < 1e-12);
    }

    #[test]
    fn band_l2_fubini_identity() {
        // || sum of indicators ||_2^2 equals the sum of pairwise overlap
        // lengths, per angle
        let r = one_per_column_real(5, 21);
        let squares = r.grid_squares(5);
        for theta in [0.9, 1.2, math::atan(3.0)] {
            let a = Angle::new(theta);
            let lhs = band_l2_at(&r, a);
            let mut rhs = 0.0;
            for s1 in &squares {
                let (lo1, hi1) = crate::geometry::square_projection_span(a, s1);
                for s2 in &squares {
                    let (lo2, hi2) = crate::geometry::square_projection_span(a, s2);
                    rhs += (hi1.min(hi2) - lo1.max(lo2)).max(0.0);
                }
            }
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn lower_bound_check_rejects_plain_models() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        assert!(matches!(
            bv_lower_bound_check(&m, &[]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn hoeffding_example_value() {
        // 100 unit ranges, eps = 0.2: 2 exp(-8)
        let b = hoeffding_bound(&alloc::vec![(0.0, 1.0); 100], 0.2).unwrap();
        assert!((b.bound - 2.0 * math::exp(-8.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_epsilon_clamps_to_one() {
        let b = hoeffding_bound(&alloc::vec![(0.0, 1.0); 10], 0.0).unwrap();
        assert_eq!(b.bound, 1.0);
        let b = chernoff_bound(50.0, 0.0).unwrap();
        assert_eq!(b.bound, 1.0);
        assert!(chernoff_bound(50.0, 1.5).is_err());
    }

    #[test]
    fn chernoff_validation_within_bound() {
        let case = ValidationCase {
            kind: BoundKind::Chernoff,
            sampler: Sampler::BernoulliSum { n: 100, p: 0.5 },
            epsilon: 0.4,
        };
        let rep = validate_empirically(case, 20_000, Key::new(5)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.bound <= 2.0 * math::exp(-2.0) + 1e-12);
    }

    #[test]
    fn as_limit_m_rule_arithmetic() {
        // L = 2, n = 16: m(n) = 16, so the check demands an override
        let m = make_builtin(Builtin::UniformChoice, 2).unwrap();
        let refs: Vec<FavardEstimate> = Vec::new();
        let err = as_limit_check(&m, 16, &refs, 1, QuadratureRule::new(16), Key::new(1), None);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }
}
