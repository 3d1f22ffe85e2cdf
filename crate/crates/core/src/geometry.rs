//! Exact planar geometry of lines against axis-aligned squares and discs.
//!
//! Conventions: a direction is an angle `theta` in `[0, pi]`; the
//! projection of a point `p` is `p . (-sin theta, cos theta)`, and the
//! fiber line `line(theta, t)` has direction `(cos theta, sin theta)` and
//! contains `t * (-sin theta, cos theta)`. Shapes are closed sets. Chord
//! profiles at the axis angles carry jumps at the ends of their support;
//! evaluation and suprema use the open-interior value there, which keeps
//! boundary-touching squares (a measure-zero set of offsets) from
//! contributing.

use alloc::vec::Vec;

use crate::address::{self, Cell};
use crate::error::{Error, Result};
use crate::math;

/// Absolute comparison tolerance for breakpoint dedup at unit scale.
pub const DEDUP_EPS: f64 = 1e-12;

/// A direction in `[0, pi]` with cached trigonometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    theta: f64,
    sin: f64,
    cos: f64,
}

impl Angle {
    pub fn new(theta: f64) -> Angle {
        assert!(
            (0.0..=core::f64::consts::PI).contains(&theta),
            "angle out of [0, pi]: {theta}"
        );
        Angle {
            theta,
            sin: math::sin(theta),
            cos: math::cos(theta),
        }
    }

    #[inline]
    pub fn theta(self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn sin(self) -> f64 {
        self.sin
    }

    #[inline]
    pub fn cos(self) -> f64 {
        self.cos
    }

    /// Projection of the point `(x, y)`.
    #[inline]
    pub fn project(self, x: f64, y: f64) -> f64 {
        -self.sin * x + self.cos * y
    }
}

/// The line `proj^-1(t)` for a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub angle: Angle,
    pub t: f64,
}

impl Line {
    pub fn new(angle: Angle, t: f64) -> Line {
        Line { angle, t }
    }
}

/// Closed axis-aligned square given by its lower-left corner and side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub x: f64,
    pub y: f64,
    pub side: f64,
}

impl Square {
    pub fn new(x: f64, y: f64, side: f64) -> Square {
        assert!(side > 0.0, "square side must be positive");
        Square { x, y, side }
    }

    pub fn unit() -> Square {
        Square::new(0.0, 0.0, 1.0)
    }

    /// The `L`-adic square addressed by `cells` (level 1 first).
    pub fn from_cells(l: u32, cells: &[Cell]) -> Square {
        let code = address::pack(cells, l);
        Square::from_code(l, cells.len() as u32, code)
    }

    pub fn from_code(l: u32, depth: u32, code: u64) -> Square {
        let (x, y, side) = address::square_geometry(code, depth, l);
        Square { x, y, side }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.side, self.y + 0.5 * self.side)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

/// Closed disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disc {
    pub fn new(cx: f64, cy: f64, r: f64) -> Disc {
        assert!(r > 0.0, "disc radius must be positive");
        Disc { cx, cy, r }
    }

    pub fn unit() -> Disc {
        Disc::new(0.5, 0.5, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Square(Square),
    Disc(Disc),
}

/// Normalized finite union of closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Normalizes: sorts and merges overlapping or touching intervals.
    pub fn from_intervals(mut iv: Vec<(f64, f64)>) -> IntervalSet {
        iv.retain(|&(lo, hi)| hi >= lo);
        iv.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
        for (lo, hi) in iv {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    pub fn fatten(&self, r: f64) -> IntervalSet {
        IntervalSet::from_intervals(
            self.intervals.iter().map(|&(lo, hi)| (lo - r, hi + r)).collect(),
        )
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(a), Some(b)) => Some((a.0, b.1)),
            _ => None,
        }
    }
}

/// Projection span of a square: closed interval `(lo, hi)`.
#[inline]
pub fn square_projection_span(angle: Angle, sq: &Square) -> (f64, f64) {
    let (cx, cy) = sq.center();
    let c = angle.project(cx, cy);
    let half = 0.5 * sq.side * (math::abs(angle.sin) + math::abs(angle.cos));
    (c - half, c + half)
}

#[inline]
pub fn disc_projection_span(angle: Angle, d: &Disc) -> (f64, f64) {
    let c = angle.project(d.cx, d.cy);
    (c - d.r, c + d.r)
}

/// Projection of a shape as a single closed interval.
pub fn projection_interval(angle: Angle, shape: &Shape) -> IntervalSet {
    let (lo, hi) = match shape {
        Shape::Square(s) => square_projection_span(angle, s),
        Shape::Disc(d) => disc_projection_span(angle, d),
    };
    IntervalSet::from_intervals(alloc::vec![(lo, hi)])
}

/// Length of `line ∩ square` (closed square).
pub fn square_chord(line: &Line, sq: &Square) -> f64 {
    let a = line.angle;
    // point on the line and its direction
    let px = -a.sin * line.t;
    let py = a.cos * line.t;
    let (dx, dy) = (a.cos, a.sin);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if dx == 0.0 {
        if px < sq.x || px > sq.x + sq.side {
            return 0.0;
        }
    } else {
        let u1 = (sq.x - px) / dx;
        let u2 = (sq.x + sq.side - px) / dx;
        lo = lo.max(u1.min(u2));
        hi = hi.min(u1.max(u2));
    }
    if dy == 0.0 {
        if py < sq.y || py > sq.y + sq.side {
            return 0.0;
        }
    } else {
        let u1 = (sq.y - py) / dy;
        let u2 = (sq.y + sq.side - py) / dy;
        lo = lo.max(u1.min(u2));
        hi = hi.min(u1.max(u2));
    }
    (hi - lo).max(0.0)
}

/// Length of `line ∩ disc`.
pub fn disc_chord(line: &Line, disc: &Disc) -> f64 {
    let c = line.angle.project(disc.cx, disc.cy);
    let d = math::abs(c - line.t);
    if d >= disc.r {
        0.0
    } else {
        2.0 * math::sqrt(disc.r * disc.r - d * d)
    }
}

pub fn chord_length(line: &Line, shape: &Shape) -> f64 {
    match shape {
        Shape::Square(s) => square_chord(line, s),
        Shape::Disc(d) => disc_chord(line, d),
    }
}

/// Piecewise-linear chord function `t -> |line(theta, t) ∩ Q|` of a square.
///
/// Nodes are the sorted corner projections; for axis-aligned directions the
/// ramps collapse and the ends of the support become jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordProfile {
    bps: Vec<f64>,
    vals: Vec<f64>,
}

impl ChordProfile {
    pub fn breakpoints(&self) -> &[f64] {
        &self.bps
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bps[0], *self.bps.last().unwrap())
    }

    /// Evaluate at `t`. At a jump end of the support the open-interior
    /// convention applies and the value is 0.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.bps.len();
        // outside, or at a support end (where a jump takes the outer value 0,
        // and a continuous ramp is 0 anyway)
        if t <= self.bps[0] || t >= self.bps[n - 1] {
            return 0.0;
        }
        let mut k = 0;
        while k + 2 < n && t > self.bps[k + 1] {
            k += 1;
        }
        let (t0, t1) = (self.bps[k], self.bps[k + 1]);
        let (v0, v1) = (self.vals[k], self.vals[k + 1]);
        if t1 == t0 {
            return v0.max(v1);
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Interior-limit values at the ends of `[t0, t1]`, assuming no
    /// breakpoint lies strictly inside. Returns `(v(t0+), v(t1-))`.
    pub fn piece_limits(&self, t0: f64, t1: f64) -> (f64, f64) {
        let m = 0.5 * (t0 + t1);
        let n = self.bps.len();
        if m <= self.bps[0] || m >= self.bps[n - 1] {
            return (0.0, 0.0);
        }
        let mut k = 0;
        while k + 2 < n && m > self.bps[k + 1] {
            k += 1;
        }
        let (b0, b1) = (self.bps[k], self.bps[k + 1]);
        let (v0, v1) = (self.vals[k], self.vals[k + 1]);
        if b1 == b0 {
            return (v0, v1);
        }
        let s = (v1 - v0) / (b1 - b0);
        (v0 + s * (t0 - b0), v0 + s * (t1 - b0))
    }

    /// Exact integral over the real line (trapezoid over the stored nodes).
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.bps.len() - 1 {
            acc += 0.5 * (self.vals[k] + self.vals[k + 1]) * (self.bps[k + 1] - self.bps[k]);
        }
        acc
    }

    pub fn peak(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, &v| a.max(v))
    }
}

/// Exact chord profile of a square in a given direction.
pub fn chord_profile(angle: Angle, sq: &Square) -> ChordProfile {
    let s = sq.side;
    let corners = [
        angle.project(sq.x, sq.y),
        angle.project(sq.x + s, sq.y),
        angle.project(sq.x, sq.y + s),
        angle.project(sq.x + s, sq.y + s),
    ];
    let mut q = corners;
    q.sort_unstable_by(f64::total_cmp);
    let plateau = s / math::abs(angle.sin).max(math::abs(angle.cos));
    let nodes = [(q[0], 0.0), (q[1], plateau), (q[2], plateau), (q[3], 0.0)];
    let eps = DEDUP_EPS * s;
    let mut bps: Vec<f64> = Vec::with_capacity(4);
    let mut vals: Vec<f64> = Vec::with_capacity(4);
    for (t, v) in nodes {
        match bps.last() {
            Some(&last) if t - last <= eps => {
                let lv = vals.last_mut().unwrap();
                *lv = lv.max(v);
            }
            _ => {
                bps.push(t);
                vals.push(v);
            }
        }
    }
    ChordProfile { bps, vals }
}

/// Lebesgue measure of the union of the `fatten`-fattened intervals.
pub fn interval_union_measure(intervals: &[(f64, f64)], fatten: f64) -> f64 {
    let mut iv: Vec<(f64, f64)> = intervals.to_vec();
    union_measure_in_place(&mut iv, fatten)
}

/// In-place variant reusing the caller's buffer (hot path).
pub fn union_measure_in_place(iv: &mut Vec<(f64, f64)>, fatten: f64) -> f64 {
    iv.retain(|&(lo, hi)| hi >= lo);
    if iv.is_empty() {
        return 0.0;
    }
    iv.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur_lo = iv[0].0 - fatten;
    let mut cur_hi = iv[0].1 + fatten;
    for &(lo, hi) in iv.iter().skip(1) {
        let (lo, hi) = (lo - fatten, hi + fatten);
        if lo <= cur_hi {
            cur_hi = cur_hi.max(hi);
        } else {
            total += cur_hi - cur_lo;
            cur_lo = lo;
            cur_hi = hi;
        }
    }
    total + (cur_hi - cur_lo)
}

/// Exact `∫ |l(t) ∩ a| |l(t) ∩ b| dt` by piecewise-quadratic integration
/// over the merged profile breakpoints.
pub fn pair_chord_integral(angle: Angle, a: &Square, b: &Square) -> f64 {
    let pa = chord_profile(angle, a);
    let pb = chord_profile(angle, b);
    pair_profile_integral(&pa, &pb)
}

fn pair_profile_integral(pa: &ChordProfile, pb: &ChordProfile) -> f64 {
    let (la, ha) = pa.support();
    let (lb, hb) = pb.support();
    let lo = la.max(lb);
    let hi = ha.min(hb);
    if hi <= lo {
        return 0.0;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(10);
    cuts.push(lo);
    for &t in pa.breakpoints().iter().chain(pb.breakpoints()) {
        if t > lo && t < hi {
            cuts.push(t);
        }
    }
    cuts.push(hi);
    cuts.sort_unstable_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let (fa, fb) = pa.piece_limits(t0, t1);
        let (ga, gb) = pb.piece_limits(t0, t1);
        let fm = 0.5 * (fa + fb);
        let gm = 0.5 * (ga + gb);
        acc += (t1 - t0) / 6.0 * (fa * ga + 4.0 * fm * gm + fb * gb);
    }
    acc
}

/// Rescaled pair integral against a level-`k` square, and the sup-norm gap
/// between it and the level-1 chord over the level-`k` square's offsets.
///
/// `eta` addresses a depth-`k` square, `kappa` a depth-1 square. Returns
/// `(V, Err)` where `V = L^2k * ∫ |l ∩ Q(eta)| |l ∩ Q(kappa)| dt` and
/// `Err = sup { | |l(t) ∩ Q(kappa)| - V | : l(t) ∩ Q(eta) != ∅ }`,
/// the sup taken with open-interior values at chord jumps.
pub fn scaled_pair_integral_and_err(
    angle: Angle,
    l: u32,
    eta: &[Cell],
    kappa: Cell,
) -> Result<(f64, f64)> {
    let k = eta.len() as u32;
    if k < 1 {
        return Err(Error::Parameter("eta must have depth >= 1".into()));
    }
    let q_eta = Square::from_cells(l, eta);
    let q_kappa = Square::from_cells(l, &[kappa]);
    let scale = math::powi(l as f64, 2 * k);
    let v = scale * pair_chord_integral(angle, &q_eta, &q_kappa);

    let (lo, hi) = square_projection_span(angle, &q_eta);
    let pk = chord_profile(angle, &q_kappa);
    let mut cuts: Vec<f64> = Vec::with_capacity(6);
    cuts.push(lo);
    for &t in pk.breakpoints() {
        if t > lo && t < hi {
            cuts.push(t);
        }
    }
    cuts.push(hi);
    cuts.sort_unstable_by(f64::total_cmp);
    let mut err: f64 = 0.0;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (va, vb) = pk.piece_limits(w[0], w[1]);
        err = err.max(math::abs(va - v)).max(math::abs(vb - v));
    }
    Ok((v, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const SQRT2: f64 = core::f64::consts::SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn projection_of_unit_square_axis() {
        let u = Shape::Square(Square::unit());
        let p0 = projection_interval(Angle::new(0.0), &u);
        assert_eq!(p0.intervals(), &[(0.0, 1.0)]);
        let p90 = projection_interval(Angle::new(FRAC_PI_2), &u);
        let (lo, hi) = p90.span().unwrap();
        assert!(close(lo, -1.0, 1e-12) && close(hi, 0.0, 1e-12));
        let p45 = projection_interval(Angle::new(FRAC_PI_4), &u);
        let (lo, hi) = p45.span().unwrap();
        assert!(close(lo, -SQRT2 / 2.0, 1e-12) && close(hi, SQRT2 / 2.0, 1e-12));
    }

    #[test]
    fn chord_length_examples() {
        let u = Square::unit();
        let l = Line::new(Angle::new(0.0), 0.3);
        assert!(close(square_chord(&l, &u), 1.0, 1e-12));
        let l = Line::new(Angle::new(FRAC_PI_4), 0.0);
        assert!(close(square_chord(&l, &u), SQRT2, 1e-12));
        let d = Disc::new(0.5, 0.5, 0.5);
        let l = Line::new(Angle::new(FRAC_PI_2), -0.5);
        assert!(close(disc_chord(&l, &d), 1.0, 1e-12));
        // disjoint line
        let l = Line::new(Angle::new(0.0), 1.5);
        assert_eq!(square_chord(&l, &u), 0.0);
    }

    #[test]
    fn profile_tent_and_plateau() {
        let u = Square::unit();
        let p = chord_profile(Angle::new(FRAC_PI_4), &u);
        assert!(close(p.peak(), SQRT2, 1e-12));
        assert!(close(p.eval(0.0), SQRT2, 1e-12));
        let (lo, hi) = p.support();
        assert!(close(lo, -SQRT2 / 2.0, 1e-12) && close(hi, SQRT2 / 2.0, 1e-12));

        let p = chord_profile(Angle::new(0.0), &u);
        assert_eq!(p.breakpoints().len(), 2);
        assert!(close(p.eval(0.5), 1.0, 1e-12));
        assert!(close(p.integral(), 1.0, 1e-12));

        // arctan(1/2): plateau sqrt(5)/2
        let theta = math::atan(0.5);
        let p = chord_profile(Angle::new(theta), &u);
        assert!(close(p.peak(), math::sqrt(5.0) / 2.0, 1e-12));
    }

    #[test]
    fn union_measure_examples() {
        assert_eq!(interval_union_measure(&[], 0.0), 0.0);
        let m = interval_union_measure(&[(0.0, 1.0), (0.5, 2.0), (3.0, 3.0)], 0.0);
        assert!(close(m, 2.0, 1e-12));
        let m = interval_union_measure(&[(0.0, 1.0)], 0.1);
        assert!(close(m, 1.2, 1e-12));
    }

    #[test]
    fn pair_integral_examples() {
        let u = Square::unit();
        let v = pair_chord_integral(Angle::new(0.0), &u, &u);
        assert!(close(v, 1.0, 1e-12));
        let v = pair_chord_integral(Angle::new(FRAC_PI_4), &u, &u);
        assert!(close(v, 2.0 * SQRT2 / 3.0, 1e-10));
        let a = Square::new(0.0, 0.0, 0.5);
        let b = Square::new(0.5, 0.0, 0.5);
        let v = pair_chord_integral(Angle::new(0.0), &a, &b);
        assert!(close(v, 0.125, 1e-12));
    }

    #[test]
    fn scaled_pair_examples() {
        // same row: constant chord 1/2 over eta's support
        let (v, err) =
            scaled_pair_integral_and_err(Angle::new(0.0), 2, &[Cell::new(1, 1)], Cell::new(2, 1))
                .unwrap();
        assert!(close(v, 0.5, 1e-12));
        assert!(close(err, 0.0, 1e-12));
        // other row: disjoint offset supports
        let (v, err) =
            scaled_pair_integral_and_err(Angle::new(0.0), 2, &[Cell::new(1, 1)], Cell::new(2, 2))
                .unwrap();
        assert!(close(v, 0.0, 1e-12));
        assert!(close(err, 0.0, 1e-12));
        // diagonal direction, deeper eta: strictly positive gap, bounded by peak
        let eta = [Cell::new(1, 1), Cell::new(1, 1)];
        let (v, err) =
            scaled_pair_integral_and_err(Angle::new(FRAC_PI_4), 2, &eta, Cell::new(2, 2)).unwrap();
        let peak = SQRT2 * 0.5;
        assert!(err > 0.0);
        assert!(err <= peak + v);
    }

    #[test]
    fn profile_matches_chord_at_generic_offsets() {
        let mut rng = crate::rng::Key::new(42).rng();
        for _ in 0..200 {
            let theta = rng.next_f64() * PI;
            let a = Angle::new(theta);
            let sq = Square::new(rng.next_f64(), rng.next_f64(), 0.1 + rng.next_f64());
            let p = chord_profile(a, &sq);
            let (lo, hi) = p.support();
            let t = lo + (hi - lo) * rng.next_f64();
            let c = square_chord(&Line::new(a, t), &sq);
            assert!(close(p.eval(t), c, 1e-12 * (1.0 + sq.side)));
        }
    }
}
