//! Midpoint quadrature rules and deterministic aggregation helpers.

use alloc::vec::Vec;

/// Node-count request for a midpoint rule.
///
/// Node counts are adjusted so nodes can never coincide with grid-aligned
/// values: angle rules round up to a multiple of 4 (midpoints of `[0, pi]`
/// then avoid 0, pi/4, pi/2, 3pi/4 and pi exactly), offset rules round up
/// to an odd count (midpoints of an interval with odd subdivision never
/// land on binary or `L`-adic subdivision points of that interval).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    pub nodes: u32,
}

impl QuadratureRule {
    pub fn new(nodes: u32) -> QuadratureRule {
        QuadratureRule { nodes: nodes.max(1) }
    }

    /// Effective node count for angle integration over `[0, pi]`.
    pub fn angle_nodes(self) -> u32 {
        (self.nodes + 3) & !3
    }

    /// Effective node count for offset integration.
    pub fn offset_nodes(self) -> u32 {
        self.nodes | 1
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { nodes: 256 }
    }
}

/// A quadrature result together with a grid-refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub refine_error: f64,
}

/// Midpoint nodes of `[lo, hi]` with `m` subdivisions.
pub fn midpoints(lo: f64, hi: f64, m: u32) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / m as f64;
    (0..m).map(move |i| lo + (i as f64 + 0.5) * h)
}

/// Sub-spacing jitter applied to offset nodes, as a fraction of the node
/// spacing (a scaled golden-ratio tail, so shifted nodes cannot coincide
/// with subdivision points of the interval at any level).
pub const NODE_JITTER: f64 = 6.180339887498949e-4;

/// Midpoint nodes shifted by `NODE_JITTER * spacing`.
///
/// Plain midpoints of an interval always contain grid-aligned offsets
/// (for an interval of unit length, the node `(2k+1)/(2m)` collapses to a
/// binary rational for some `k`), which sit exactly on the discontinuity
/// set of projection survival integrands. The fixed jitter moves every
/// node off that set while perturbing the rule by `O(jitter * spacing)`,
/// well below the refinement targets.
pub fn jittered_midpoints(lo: f64, hi: f64, m: u32) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / m as f64;
    (0..m).map(move |i| lo + (i as f64 + 0.5 + NODE_JITTER) * h)
}

/// Sum with a fixed pairwise reduction tree; deterministic for a given
/// slice regardless of how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, crate::math::sqrt(var / n as f64))
}

/// Mean and standard error from accumulated sum / sum of squares.
pub fn mean_stderr_from_sums(sum: f64, sumsq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, crate::math::sqrt(var / nf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_rule_integrates_linear_exactly() {
        let s: f64 = midpoints(0.0, 2.0, 8).map(|x| 3.0 * x + 1.0).sum::<f64>() * (2.0 / 8.0);
        assert!((s - 8.0).abs() < 1e-12);
    }

    #[test]
    fn angle_nodes_avoid_lattice_angles() {
        let m = QuadratureRule::new(256).angle_nodes();
        for theta in midpoints(0.0, core::f64::consts::PI, m) {
            for special in [
                0.0,
                core::f64::consts::FRAC_PI_4,
                core::f64::consts::FRAC_PI_2,
                3.0 * core::f64::consts::FRAC_PI_4,
                core::f64::consts::PI,
            ] {
                assert!((theta - special).abs() > 1e-6);
            }
        }
    }

    #[test]
    fn pairwise_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - seq).abs() < 1e-9);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, se) = mean_stderr(&[2.0; 50]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }
}
