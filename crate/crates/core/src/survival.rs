//! Exact per-line survival probabilities and expected chord lengths for
//! grid models, by recursion over the subdivision tree, plus the derived
//! expected projection and Favard quantities by quadrature.
//!
//! For a line `l(theta, t)` and depth `n`, the recursion renormalizes the
//! line into each intersected child cell (`t' = L t - proj(child corner)`)
//! and combines child survival probabilities under the branching law:
//! factorized for the per-cell-independent law, by atom enumeration for an
//! explicit support. Expected chords need only per-cell inclusion
//! probabilities and ride along in the same pass.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{square_chord, Angle, Line, Square};
use crate::math;
use crate::models::{GridModel, Law, Model};
use crate::quad::{jittered_midpoints, midpoints, QuadValue, QuadratureRule};

pub use crate::quad::QuadratureRule as Rule;

/// Hard ceiling on tree nodes visited per line.
pub const RECURSION_BUDGET: u64 = 10_000_000;

/// Offsets within this distance of a cell boundary are flagged as lattice
/// hits (they are answered with closed-cell semantics).
pub const LATTICE_EPS: f64 = 1e-12;

/// Result of the per-line recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStats {
    /// `P[l ∩ S_n != ∅]`.
    pub survival: f64,
    /// `E[L^n |l ∩ S_n|]`.
    pub expected_chord: f64,
    /// `expected_chord / survival` when survival is positive.
    pub conditional_chord: Option<f64>,
    /// The line ran within `LATTICE_EPS` of a cell boundary at some level.
    pub on_lattice: bool,
}

struct Recursion<'a> {
    law: &'a Law,
    scale: f64,
    /// projection span of each child cell of the unit square, by digit
    spans: Vec<(f64, f64)>,
    /// projection of each child cell's integer corner, by digit
    offsets: Vec<f64>,
    unit_span: (f64, f64),
    unit_angle: Angle,
    inclusion: Vec<f64>,
    /// one reusable child buffer per recursion depth
    scratch: Vec<Vec<Option<(f64, f64)>>>,
    visited: u64,
    lattice: bool,
}

impl<'a> Recursion<'a> {
    fn new(model: &'a GridModel, angle: Angle) -> Recursion<'a> {
        let l = model.l();
        let lf = l as f64;
        let n2 = (l * l) as usize;
        let mut spans = Vec::with_capacity(n2);
        let mut offsets = Vec::with_capacity(n2);
        for d in 0..n2 {
            let c = (d as u32 % l) as f64;
            let r = (d as u32 / l) as f64;
            let sq = Square::new(c / lf, r / lf, 1.0 / lf);
            spans.push(crate::geometry::square_projection_span(angle, &sq));
            offsets.push(angle.project(c, r));
        }
        let unit_span = crate::geometry::square_projection_span(angle, &Square::unit());
        Recursion {
            law: model.law(),
            scale: lf,
            spans,
            offsets,
            unit_span,
            unit_angle: angle,
            inclusion: model.inclusion_probs(),
            scratch: Vec::new(),
            visited: 0,
            lattice: false,
        }
    }

    /// `(survival, expected_chord)` for the renormalized process at local
    /// offset `t` with `remaining` subdivision levels.
    fn node(&mut self, t: f64, remaining: u32) -> Result<(f64, f64)> {
        self.visited += 1;
        if self.visited > RECURSION_BUDGET {
            return Err(Error::ResourceGuard(format!(
                "line recursion exceeded {RECURSION_BUDGET} visited cells"
            )));
        }
        let (lo, hi) = self.unit_span;
        if t < lo || t > hi {
            return Ok((0.0, 0.0));
        }
        if math::abs(t - lo) < LATTICE_EPS || math::abs(t - hi) < LATTICE_EPS {
            self.lattice = true;
        }
        if remaining == 0 {
            let chord = square_chord(&Line::new(self.unit_angle, t), &Square::unit());
            return Ok((1.0, chord));
        }
        let n2 = self.spans.len();
        // child results by digit; None = not intersected
        let depth_slot = remaining as usize - 1;
        if self.scratch.len() <= depth_slot {
            self.scratch.resize(depth_slot + 1, Vec::new());
        }
        let mut child = core::mem::take(&mut self.scratch[depth_slot]);
        child.clear();
        child.resize(n2, None);
        for d in 0..n2 {
            let (clo, chi) = self.spans[d];
            if t < clo || t > chi {
                continue;
            }
            if math::abs(t - clo) < LATTICE_EPS || math::abs(t - chi) < LATTICE_EPS {
                self.lattice = true;
            }
            let tc = self.scale * t - self.offsets[d];
            match self.node(tc, remaining - 1) {
                Ok(r) => child[d] = Some(r),
                Err(e) => {
                    self.scratch[depth_slot] = child;
                    return Err(e);
                }
            }
        }
        let mut expected = 0.0;
        for (d, c) in child.iter().enumerate().take(n2) {
            if let Some((_, e)) = c {
                expected += self.inclusion[d] * e;
            }
        }
        let survival = match self.law {
            Law::Bernoulli(p) => {
                let mut miss = 1.0;
                for c in child.iter().take(n2).flatten() {
                    miss *= 1.0 - p * c.0;
                }
                1.0 - miss
            }
            Law::Explicit(atoms) => {
                let mut miss = 0.0;
                for a in atoms {
                    let mut m = 1.0;
                    for &d in &a.cells {
                        if let Some((ps, _)) = child[d as usize] {
                            m *= 1.0 - ps;
                        }
                    }
                    miss += a.prob * m;
                }
                1.0 - miss
            }
        };
        self.scratch[depth_slot] = child;
        Ok((survival.clamp(0.0, 1.0), expected))
    }
}

fn line_stats(model: &GridModel, line: &Line, n: u32) -> Result<LineStats> {
    let mut rec = Recursion::new(model, line.angle);
    let (p, e) = rec.node(line.t, n)?;
    Ok(LineStats {
        survival: p,
        expected_chord: e,
        conditional_chord: if p > 0.0 { Some(e / p) } else { None },
        on_lattice: rec.lattice,
    })
}

fn require_grid(model: &Model) -> Result<&GridModel> {
    model.as_grid().map_err(|_| {
        Error::Unsupported("exact recursion is defined for grid models only".into())
    })
}

/// Exact `P[l(theta, t) ∩ S_n != ∅]`.
pub fn survival_probability(model: &Model, line: &Line, n: u32) -> Result<LineStats> {
    line_stats(require_grid(model)?, line, n)
}

/// Exact `E[L^n |l ∩ S_n|]` with the conditional value attached.
///
/// For uniform laws this equals `|l ∩ [0,1]^2|` identically (a cross-check,
/// not an assumption; non-uniform laws genuinely differ).
pub fn expected_chord(model: &Model, line: &Line, n: u32) -> Result<LineStats> {
    line_stats(require_grid(model)?, line, n)
}

/// `E |proj_theta S_n|` by adaptive midpoint quadrature of the survival
/// probability over the projection span of the unit square.
pub fn expected_projection_length(
    model: &Model,
    angle: Angle,
    n: u32,
    rule: QuadratureRule,
) -> Result<QuadValue> {
    let g = require_grid(model)?;
    let (lo, hi) = crate::geometry::square_projection_span(angle, &Square::unit());
    let eval = |m: u32| -> Result<f64> {
        let h = (hi - lo) / m as f64;
        let mut acc = 0.0;
        for t in jittered_midpoints(lo, hi, m) {
            acc += line_stats(g, &Line::new(angle, t), n)?.survival;
        }
        Ok(acc * h)
    };
    let mut m = rule.offset_nodes();
    let mut value = eval(m)?;
    let mut err = f64::INFINITY;
    for _ in 0..5 {
        m = (2 * m) | 1;
        let next = eval(m)?;
        err = math::abs(next - value);
        value = next;
        if err < 1e-4 {
            break;
        }
    }
    Ok(QuadValue {
        value,
        refine_error: err,
    })
}

/// `E Fav(S_n)` by double quadrature of survival probabilities; the
/// refinement estimate compares the angle grid against its doubling.
pub fn expected_favard_exact(
    model: &Model,
    n: u32,
    theta_rule: QuadratureRule,
    t_rule: QuadratureRule,
) -> Result<QuadValue> {
    require_grid(model)?;
    let eval = |m: u32| -> Result<f64> {
        let h = core::f64::consts::PI / m as f64;
        let mut acc = 0.0;
        for theta in midpoints(0.0, core::f64::consts::PI, m) {
            acc += expected_projection_length(model, Angle::new(theta), n, t_rule)?.value;
        }
        Ok(acc * h)
    };
    let m = theta_rule.angle_nodes();
    let coarse = eval(m)?;
    let fine = eval(2 * m)?;
    Ok(QuadValue {
        value: fine,
        refine_error: math::abs(fine - coarse),
    })
}
