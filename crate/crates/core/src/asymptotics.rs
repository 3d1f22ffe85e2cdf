//! Asymptotic functionals of uniform grid models: the per-direction
//! variance `V(theta)` by two independent routes, the limit constant
//! `∫ 2 / V(theta) dtheta`, large-expected-intersection (LEI) sets,
//! column-aligned pattern sets, substring counting, approximate uniformity
//! of address words, and degenerate-band projection scans.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::address::{self, Cell};
use crate::error::{Error, Result};
use crate::geometry::{
    chord_profile, pair_chord_integral, square_chord, square_projection_span, Angle, ChordProfile,
    Line, Square,
};
use crate::math;
use crate::models::{classify, GridModel, Law, Model};
use crate::quad::{midpoints, QuadValue, QuadratureRule};

/// How to evaluate `V(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VMethod {
    /// Integrate the variance of the level-1 chord sum in the offset,
    /// exactly over chord breakpoints.
    Definition,
    /// `L^2` times the pairwise-probability-weighted sum of pair chord
    /// integrals over distinct cells.
    Alternative,
}

fn require_uniform_grid(model: &Model) -> Result<&GridModel> {
    let g = model.as_grid()?;
    let c = classify(model)?;
    if !c.is_uniform {
        return Err(Error::Unsupported(
            "V(theta) is defined for uniform grid models".into(),
        ));
    }
    Ok(g)
}

fn cell_squares(l: u32) -> Vec<Square> {
    (0..(l * l) as u8)
        .map(|d| Square::from_cells(l, &[Cell::from_digit(d, l)]))
        .collect()
}

/// Breakpoints of the level-1 chord vector in the offset variable.
fn level_one_breakpoints(angle: Angle, squares: &[Square]) -> Vec<f64> {
    let mut bps: Vec<f64> = Vec::with_capacity(4 * squares.len());
    for s in squares {
        let p = chord_profile(angle, s);
        bps.extend_from_slice(p.breakpoints());
    }
    bps.sort_unstable_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    bps
}

/// `V(theta) = ∫ Var(L |l(theta, t) ∩ S_1|) dt`, exactly.
pub fn v_theta(model: &Model, angle: Angle, method: VMethod) -> Result<f64> {
    let g = require_uniform_grid(model)?;
    match method {
        VMethod::Definition => Ok(v_theta_definition(g, angle)),
        VMethod::Alternative => Ok(v_theta_alternative(g, angle)),
    }
}

fn v_theta_definition(g: &GridModel, angle: Angle) -> f64 {
    let l = g.l();
    let lf = l as f64;
    let squares = cell_squares(l);
    let bps = level_one_breakpoints(angle, &squares);
    // variance of the chord sum at one interior offset
    let var_at = |t: f64| -> f64 {
        let line = Line::new(angle, t);
        match g.law() {
            Law::Bernoulli(p) => {
                let s2: f64 = squares
                    .iter()
                    .map(|q| {
                        let c = square_chord(&line, q);
                        c * c
                    })
                    .sum();
                lf * lf * p * (1.0 - p) * s2
            }
            Law::Explicit(atoms) => {
                let chords: Vec<f64> =
                    squares.iter().map(|q| square_chord(&line, q)).collect();
                let mut e1 = 0.0;
                let mut e2 = 0.0;
                for a in atoms {
                    let s: f64 = a.cells.iter().map(|&d| chords[d as usize]).sum();
                    e1 += a.prob * s;
                    e2 += a.prob * s * s;
                }
                lf * lf * (e2 - e1 * e1)
            }
        }
    };
    // the variance is quadratic between breakpoints: two-point Gauss is
    // exact and its nodes stay strictly inside each piece
    let gauss = 0.5 / math::sqrt(3.0);
    let mut acc = 0.0;
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        acc += 0.5 * h * (var_at(mid - gauss * h) + var_at(mid + gauss * h));
    }
    acc
}

fn v_theta_alternative(g: &GridModel, angle: Angle) -> f64 {
    let l = g.l();
    let lf = l as f64;
    let n2 = (l * l) as usize;
    let squares = cell_squares(l);
    let pw = g.pairwise_probs();
    let mut acc = 0.0;
    for d1 in 0..n2 {
        for d2 in 0..n2 {
            if d1 == d2 {
                continue;
            }
            let p12 = pw[d1 * n2 + d2];
            if p12 > 0.0 {
                acc += p12 * pair_chord_integral(angle, &squares[d1], &squares[d2]);
            }
        }
    }
    lf * lf * acc
}

/// `V(theta)` by both routes on a midpoint angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    pub thetas: Vec<f64>,
    pub v_definition: Vec<f64>,
    pub v_alternative: Vec<f64>,
}

impl VarianceProfile {
    pub fn max_abs_diff(&self) -> f64 {
        self.v_definition
            .iter()
            .zip(&self.v_alternative)
            .fold(0.0, |m, (a, b)| m.max(math::abs(a - b)))
    }
}

pub fn variance_profile(model: &Model, rule: QuadratureRule) -> Result<VarianceProfile> {
    let m = rule.angle_nodes();
    let mut thetas = Vec::with_capacity(m as usize);
    let mut v_def = Vec::with_capacity(m as usize);
    let mut v_alt = Vec::with_capacity(m as usize);
    for theta in midpoints(0.0, core::f64::consts::PI, m) {
        let a = Angle::new(theta);
        thetas.push(theta);
        v_def.push(v_theta(model, a, VMethod::Definition)?);
        v_alt.push(v_theta(model, a, VMethod::Alternative)?);
    }
    Ok(VarianceProfile {
        thetas,
        v_definition: v_def,
        v_alternative: v_alt,
    })
}

/// `∫_0^pi 2 / V(theta) dtheta` for a non-degenerate uniform grid model.
///
/// The angle integral is computed per quarter under the substitution
/// `u = tan(theta)` (resp. `cot`), which clusters nodes where `V` has its
/// kinks; the refinement estimate doubles the grid.
pub fn limit_constant(model: &Model, rule: QuadratureRule) -> Result<QuadValue> {
    let g = require_uniform_grid(model)?;
    let c = classify(model)?;
    if c.is_degenerate() {
        return Err(Error::DegenerateModel(
            "the variance vanishes in a degenerate direction; the limit constant diverges".into(),
        ));
    }
    let pi_2 = core::f64::consts::FRAC_PI_2;
    let eval = |per_quarter: u32| -> Result<f64> {
        let mut acc = 0.0;
        let mut min_v = f64::INFINITY;
        let h = 1.0 / per_quarter as f64;
        for u in midpoints(0.0, 1.0, per_quarter) {
            let w = h / (1.0 + u * u);
            let a = math::atan(u);
            for theta in [a, pi_2 - a, pi_2 + a, core::f64::consts::PI - a] {
                let v = v_theta_alternative(g, Angle::new(theta));
                min_v = min_v.min(v);
                acc += w * 2.0 / v.max(1e-300);
            }
        }
        if min_v < 1e-9 {
            return Err(Error::DegenerateModel(format!(
                "min V over the angle grid is {min_v}; model behaves degenerately"
            )));
        }
        Ok(acc)
    };
    let per_quarter = (rule.angle_nodes() / 4).max(8);
    let coarse = eval(per_quarter)?;
    let fine = eval(2 * per_quarter)?;
    Ok(QuadValue {
        value: fine,
        refine_error: math::abs(fine - coarse),
    })
}

/// A set of fixed-length address words over the cells of one subdivision
/// level, stored as packed codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    l: u32,
    k: u32,
    codes: BTreeSet<u64>,
}

impl PatternSet {
    pub fn new(l: u32, k: u32) -> PatternSet {
        PatternSet {
            l,
            k,
            codes: BTreeSet::new(),
        }
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    /// Word length.
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn insert_cells(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len() as u32, self.k);
        self.codes.insert(address::pack(cells, self.l));
    }

    pub fn contains_code(&self, code: u64) -> bool {
        self.codes.contains(&code)
    }

    pub fn contains_cells(&self, cells: &[Cell]) -> bool {
        self.contains_code(address::pack(cells, self.l))
    }

    pub fn is_subset_of(&self, other: &PatternSet) -> bool {
        self.k == other.k && self.codes.iter().all(|c| other.codes.contains(c))
    }

    pub fn codes(&self) -> impl Iterator<Item = u64> + '_ {
        self.codes.iter().copied()
    }

    pub fn union(&self, other: &PatternSet) -> PatternSet {
        debug_assert_eq!(self.k, other.k);
        PatternSet {
            l: self.l,
            k: self.k,
            codes: self.codes.union(&other.codes).copied().collect(),
        }
    }
}

/// The column-aligned pattern family: words `v u` with
/// `v = ((1,1), (L,1))` and `u` ranging over `({L} x [L])^k`.
/// Its cardinality is `L^k` and the addressed squares tile the rectangle
/// `[1/L - L^-(k+2), 1/L] x [0, L^-2]`.
pub fn w_set(l: u32, k: u32) -> PatternSet {
    let mut set = PatternSet::new(l, k + 2);
    let count = (l as u64).pow(k);
    for mut pick in 0..count {
        let mut cells = Vec::with_capacity(k as usize + 2);
        cells.push(Cell::new(1, 1));
        cells.push(Cell::new(l as u8, 1));
        for _ in 0..k {
            let j = (pick % l as u64) as u8 + 1;
            pick /= l as u64;
            cells.push(Cell::new(l as u8, j));
        }
        set.insert_cells(&cells);
    }
    set
}

/// Number of (overlapping) length-`k` substrings of `word` that lie in
/// `patterns`; `word` is a digit string over `[0, L^2)`.
pub fn count_substrings(word: &[u8], patterns: &PatternSet) -> Result<u64> {
    let k = patterns.k() as usize;
    if k == 0 || k > word.len() {
        return Err(Error::Parameter(format!(
            "pattern length {k} exceeds word length {}",
            word.len()
        )));
    }
    let base = (patterns.l() * patterns.l()) as u64;
    let modulus = {
        let mut m = 1u64;
        for _ in 0..k - 1 {
            m *= base;
        }
        m
    };
    let mut code = 0u64;
    for &d in &word[..k] {
        code = code * base + d as u64;
    }
    let mut count = u64::from(patterns.contains_code(code));
    for &d in &word[k..] {
        code = (code % modulus) * base + d as u64;
        count += u64::from(patterns.contains_code(code));
    }
    Ok(count)
}

/// Whether every length-`k` pattern occurs in `word` within a relative
/// band `eps` of the uniform expectation `(n - k + 1) L^-2k`.
pub fn approx_uniform(l: u32, word: &[u8], k: u32, eps: f64) -> Result<bool> {
    let n = word.len();
    if k == 0 || k as usize > n {
        return Err(Error::Parameter("need 1 <= k <= word length".into()));
    }
    if eps <= 0.0 {
        return Err(Error::Parameter("eps must be positive".into()));
    }
    let patterns = address::level_size(l, k)?;
    if patterns > (1 << 26) {
        return Err(Error::ResourceGuard(format!(
            "L^2k = {patterns} pattern counters exceed the memory guard"
        )));
    }
    let base = (l * l) as u64;
    let mut counts = alloc::vec![0u64; patterns as usize];
    let modulus = {
        let mut m = 1u64;
        for _ in 0..k - 1 {
            m *= base;
        }
        m
    };
    let mut code = 0u64;
    for &d in &word[..k as usize] {
        code = code * base + d as u64;
    }
    counts[code as usize] += 1;
    for &d in &word[k as usize..] {
        code = (code % modulus) * base + d as u64;
        counts[code as usize] += 1;
    }
    let expected = (n - k as usize + 1) as f64 / patterns as f64;
    Ok(counts
        .iter()
        .all(|&c| math::abs(c as f64 - expected) <= eps * expected))
}

/// Query for [`lei_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeiQuery {
    pub alpha: Cell,
    pub c: f64,
    pub k: u32,
}

/// Depth-`k` subsquares of `Q(alpha)` from which every incident line has
/// conditionally large expected level-1 intersection outside `Q(alpha)`.
///
/// A word `eta` in `{alpha} x Lambda^{k-1}` belongs to the set when
/// `min over t with l(t) ∩ Q(eta) != ∅` of
/// `sum_{kappa != alpha} |l(t) ∩ Q(kappa)| P[kappa in S_1 | alpha in S_1]`
/// is at least `c / L`. The minimum of the piecewise-linear sum is taken
/// over breakpoints and interval ends, with open-interior values at jumps.
pub fn lei_set(model: &Model, angle: Angle, query: LeiQuery) -> Result<PatternSet> {
    let g = model.as_grid()?;
    let l = g.l();
    if query.k < 1 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if query.c <= 0.0 {
        return Err(Error::Parameter("c must be positive".into()));
    }
    let n2 = (l * l) as usize;
    let alpha_d = query.alpha.digit(l) as usize;
    let q = g.inclusion_probs();
    if q[alpha_d] <= 0.0 {
        return Err(Error::Parameter(
            "alpha has zero inclusion probability".into(),
        ));
    }
    let pw = g.pairwise_probs();
    let squares = cell_squares(l);
    // weighted chord profiles of the other cells
    let mut weighted: Vec<(f64, ChordProfile)> = Vec::new();
    for d in 0..n2 {
        if d == alpha_d {
            continue;
        }
        let cond = pw[d * n2 + alpha_d] / q[alpha_d];
        if cond > 0.0 {
            weighted.push((cond, chord_profile(angle, &squares[d])));
        }
    }
    let threshold = query.c / l as f64 - 1e-12;
    let mut out = PatternSet::new(l, query.k);
    let suffixes = address::level_size(l, query.k - 1)?;
    let mut cells = alloc::vec![Cell::new(1, 1); query.k as usize];
    cells[0] = query.alpha;
    for mut suffix in 0..suffixes {
        for slot in (1..query.k as usize).rev() {
            cells[slot] = Cell::from_digit((suffix % n2 as u64) as u8, l);
            suffix /= n2 as u64;
        }
        let q_eta = Square::from_cells(l, &cells);
        let (lo, hi) = square_projection_span(angle, &q_eta);
        if min_weighted_sum(&weighted, lo, hi) >= threshold {
            out.insert_cells(&cells);
        }
    }
    Ok(out)
}

/// Minimum over `[lo, hi]` of a weighted sum of chord profiles, interior
/// values at jumps.
fn min_weighted_sum(weighted: &[(f64, ChordProfile)], lo: f64, hi: f64) -> f64 {
    let mut cuts: Vec<f64> = Vec::with_capacity(2 + 4 * weighted.len());
    cuts.push(lo);
    for (_, p) in weighted {
        for &b in p.breakpoints() {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
    }
    cuts.push(hi);
    cuts.sort_unstable_by(f64::total_cmp);
    let mut min = f64::INFINITY;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mut va = 0.0;
        let mut vb = 0.0;
        for (c, p) in weighted {
            let (a, b) = p.piece_limits(w[0], w[1]);
            va += c * a;
            vb += c * b;
        }
        min = min.min(va).min(vb);
    }
    min
}

/// One row of a degenerate-band projection scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub k: u32,
    pub theta: f64,
    pub e_proj: f64,
    /// `e_proj * n / L^k`, the quantity that stays bounded across bands
    pub ratio: f64,
    pub refine_error: f64,
}

/// Expected projection lengths of a vertically degenerate model across the
/// slope bands `tan(theta) in [L^k, L^(k+1)]`, with the `n / L^k` scaling.
pub fn degenerate_band_scan(
    model: &Model,
    n: u32,
    k_max: u32,
    t_rule: QuadratureRule,
    angles_per_band: u32,
) -> Result<Vec<BandRow>> {
    let c = classify(model)?;
    if !c.is_vertically_degenerate {
        return Err(Error::Parameter(
            "band scan is defined for vertically degenerate models".into(),
        ));
    }
    let l = model.l() as f64;
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let lk = math::powi(l, k);
        if lk > n as f64 {
            continue;
        }
        for i in 0..angles_per_band {
            let frac = (i as f64 + 0.5) / angles_per_band as f64;
            let tan = lk * math::exp(frac * math::ln(l));
            let theta = math::atan(tan);
            let e = crate::survival::expected_projection_length(model, Angle::new(theta), n, t_rule)?;
            rows.push(BandRow {
                k,
                theta,
                e_proj: e.value,
                ratio: e.value * n as f64 / lk,
                refine_error: e.refine_error,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_builtin, Builtin};
    use crate::rng::Key;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn v_theta_percolation_horizontal() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        let a = Angle::new(0.0);
        let vd = v_theta(&m, a, VMethod::Definition).unwrap();
        let va = v_theta(&m, a, VMethod::Alternative).unwrap();
        assert!((vd - 0.5).abs() < 1e-12, "definition {vd}");
        assert!((va - 0.5).abs() < 1e-12, "alternative {va}");
    }

    #[test]
    fn v_theta_vanishes_in_degenerate_direction() {
        let m = make_builtin(Builtin::ColumnDegenerate, 2).unwrap();
        let v = v_theta(&m, Angle::new(FRAC_PI_2), VMethod::Definition).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn v_theta_rejects_non_uniform() {
        let m = make_builtin(Builtin::FourCorner, 4).unwrap();
        assert!(matches!(
            v_theta(&m, Angle::new(0.3), VMethod::Definition),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn dual_formulas_agree_on_random_angles() {
        let mut rng = Key::new(3).rng();
        for (b, l) in [(Builtin::Percolation, 2), (Builtin::UniformChoice, 2)] {
            let m = make_builtin(b, l).unwrap();
            for _ in 0..25 {
                let a = Angle::new(rng.next_f64() * core::f64::consts::PI);
                let vd = v_theta(&m, a, VMethod::Definition).unwrap();
                let va = v_theta(&m, a, VMethod::Alternative).unwrap();
                assert!((vd - va).abs() < 1e-8, "{b:?}: {vd} vs {va}");
            }
        }
    }

    #[test]
    fn limit_constant_rejects_degenerate() {
        let m = make_builtin(Builtin::ColumnDegenerate, 2).unwrap();
        assert!(matches!(
            limit_constant(&m, QuadratureRule::new(64)),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn limit_constant_percolation_is_stable() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        let v = limit_constant(&m, QuadratureRule::new(256)).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
        assert!(v.refine_error / v.value < 1e-3, "{v:?}");
    }

    #[test]
    fn w_set_examples() {
        let s = w_set(2, 0);
        assert_eq!(s.len(), 1);
        assert!(s.contains_cells(&[Cell::new(1, 1), Cell::new(2, 1)]));
        assert_eq!(w_set(2, 1).len(), 2);
        assert_eq!(w_set(3, 2).len(), 9);
    }

    #[test]
    fn w_set_tiles_its_rectangle() {
        let (l, k) = (2u32, 2u32);
        let s = w_set(l, k);
        let lf = l as f64;
        let side = math::powi(1.0 / lf, k + 2);
        let x_lo = 1.0 / lf - side;
        let mut area = 0.0;
        for code in s.codes() {
            let sq = Square::from_code(l, k + 2, code);
            assert!(sq.x >= x_lo - 1e-12 && sq.x + sq.side <= 1.0 / lf + 1e-12);
            assert!(sq.y >= -1e-12 && sq.y + sq.side <= 1.0 / (lf * lf) + 1e-12);
            area += sq.area();
        }
        let rect_area = side * (1.0 / (lf * lf));
        assert!((area - rect_area).abs() < 1e-12);
    }

    #[test]
    fn count_substrings_overlapping() {
        let mut set = PatternSet::new(2, 2);
        set.insert_cells(&[Cell::new(1, 1), Cell::new(1, 1)]);
        // word aaa with a = (1,1): two overlapping hits
        let word = [0u8, 0, 0];
        assert_eq!(count_substrings(&word, &set).unwrap(), 2);
        // full pattern set of length 2 matches every window
        let mut all = PatternSet::new(2, 2);
        for d1 in 0..4u8 {
            for d2 in 0..4u8 {
                all.insert_cells(&[Cell::from_digit(d1, 2), Cell::from_digit(d2, 2)]);
            }
        }
        let word = [0u8, 1, 2, 3, 0];
        assert_eq!(count_substrings(&word, &all).unwrap(), 4);
        assert!(count_substrings(&[0u8], &set).is_err());
    }

    #[test]
    fn w_pattern_hits_never_overlap() {
        let (l, k) = (2u32, 1u32);
        let set = w_set(l, k);
        let mut rng = Key::new(60).rng();
        for _ in 0..50 {
            let word: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 4) as u8).collect();
            let mut hits: Vec<usize> = Vec::new();
            for i in 0..=word.len() - (k as usize + 2) {
                let window = &word[i..i + k as usize + 2];
                let code = address::pack(
                    &window
                        .iter()
                        .map(|&d| Cell::from_digit(d, l))
                        .collect::<Vec<_>>(),
                    l,
                );
                if set.contains_code(code) {
                    hits.push(i);
                }
            }
            for w in hits.windows(2) {
                assert!(w[1] - w[0] >= k as usize + 2);
            }
        }
    }

    #[test]
    fn approx_uniform_examples() {
        // constant word hoards all counts
        let word = alloc::vec![0u8; 100];
        assert!(!approx_uniform(2, &word, 1, 0.5).unwrap());
        // boundary case n = k
        let word = [1u8, 2];
        assert!(!approx_uniform(2, &word, 2, 0.5).unwrap());
        // IID words are approximately uniform with high probability
        let mut rng = Key::new(8).rng();
        let mut ok = 0;
        for _ in 0..100 {
            let word: Vec<u8> = (0..10_000).map(|_| (rng.next_u64() % 4) as u8).collect();
            if approx_uniform(2, &word, 2, 0.2).unwrap() {
                ok += 1;
            }
        }
        assert!(ok >= 99, "only {ok}/100 approximately uniform");
    }

    #[test]
    fn lei_vertical_pair() {
        // non-degenerate model with a same-column pair: the level-1 cell
        // itself forms the LEI set at the vertical direction
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        let alpha = Cell::new(1, 1);
        // P[(1,2) in S_1 | alpha in S_1] = 1/2
        let set = lei_set(
            &m,
            Angle::new(FRAC_PI_2),
            LeiQuery {
                alpha,
                c: 0.5,
                k: 1,
            },
        )
        .unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.contains_cells(&[alpha]));
    }

    #[test]
    fn lei_impossible_threshold_is_empty() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        let set = lei_set(
            &m,
            Angle::new(0.9),
            LeiQuery {
                alpha: Cell::new(1, 1),
                c: 10.0,
                k: 1,
            },
        )
        .unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn lei_monotone_in_c_and_k() {
        let m = make_builtin(Builtin::ColumnDegenerate, 2).unwrap();
        let angle = Angle::new(math::atan(3.0));
        let alpha = Cell::new(1, 1);
        let loose = lei_set(&m, angle, LeiQuery { alpha, c: 0.25, k: 3 }).unwrap();
        let tight = lei_set(&m, angle, LeiQuery { alpha, c: 0.5, k: 3 }).unwrap();
        assert!(tight.is_subset_of(&loose));
        // every child of a member is a member at the same threshold
        let deeper = lei_set(&m, angle, LeiQuery { alpha, c: 0.5, k: 4 }).unwrap();
        for code in tight.codes() {
            for d in 0..4u64 {
                assert!(deeper.contains_code(code * 4 + d));
            }
        }
    }

    #[test]
    fn w_set_inside_lei_for_steep_bands() {
        let (l, k) = (2u32, 2u32);
        let m = make_builtin(Builtin::ColumnDegenerate, l).unwrap();
        let tan = 3.0; // inside [L, L^k] = [2, 4]
        let set = lei_set(
            &m,
            Angle::new(math::atan(tan)),
            LeiQuery {
                alpha: Cell::new(1, 1),
                c: 0.5,
                k: k + 2,
            },
        )
        .unwrap();
        assert!(w_set(l, k).is_subset_of(&set));
    }

    #[test]
    fn band_scan_requires_vertical_degeneracy() {
        let m = make_builtin(Builtin::Percolation, 2).unwrap();
        assert!(matches!(
            degenerate_band_scan(&m, 8, 2, QuadratureRule::new(33), 2),
            Err(Error::Parameter(_))
        ));
    }
}
