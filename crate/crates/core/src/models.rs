//! Branching-model definitions, validation, classification, and sampling.
//!
//! A grid model on the `L x L` subdivision of the unit square is given by a
//! law for the random set of child cells: either an explicit finite support
//! (atoms = subsets of cells with probabilities) or an independent
//! per-cell inclusion probability. A disc model places `L` (or a random
//! number of) internally tangent child discs at a uniformly random phase.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::address::{self, Cell};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::Key;

/// Leaf-count guard for sampled chains (about 6.7e7 leaves).
pub const MAX_LEAVES: u64 = 1 << 26;

/// Tolerance for probability normalization of model files.
pub const PROB_SUM_TOL: f64 = 1e-9;

fn check_level(l: u32) -> Result<()> {
    if !(2..=16).contains(&l) {
        return Err(Error::Parameter(format!(
            "grid level must be in [2, 16], got {l}"
        )));
    }
    Ok(())
}

/// One support atom: a set of child cells (as digits) and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Sorted, distinct cell digits in `[0, L^2)`.
    pub cells: Vec<u8>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Explicit(Vec<Atom>),
    /// Independent inclusion of every cell with probability `p`.
    Bernoulli(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    l: u32,
    law: Law,
}

impl GridModel {
    /// Builds and canonicalizes an explicit-support model: cells sorted,
    /// identical atoms merged, zero-probability atoms dropped, probabilities
    /// checked to sum to 1 within `PROB_SUM_TOL` and then renormalized.
    pub fn from_atoms(l: u32, atoms: Vec<(Vec<Cell>, f64)>) -> Result<GridModel> {
        check_level(l)?;
        let mut canon: Vec<Atom> = Vec::new();
        let mut sum = 0.0;
        for (cells, prob) in atoms {
            if prob < 0.0 {
                return Err(Error::InvalidModel("negative atom probability".into()));
            }
            let mut digits: Vec<u8> = Vec::with_capacity(cells.len());
            for c in cells {
                if c.col < 1 || c.col as u32 > l || c.row < 1 || c.row as u32 > l {
                    return Err(Error::InvalidModel(format!(
                        "cell ({}, {}) outside [1, {l}]^2",
                        c.col, c.row
                    )));
                }
                digits.push(c.digit(l));
            }
            digits.sort_unstable();
            if digits.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidModel("atom lists a cell twice".into()));
            }
            sum += prob;
            if prob == 0.0 {
                continue;
            }
            match canon.iter_mut().find(|a| a.cells == digits) {
                Some(a) => a.prob += prob,
                None => canon.push(Atom { cells: digits, prob }),
            }
        }
        if math::abs(sum - 1.0) > PROB_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "atom probabilities sum to {sum}, not 1 within {PROB_SUM_TOL}"
            )));
        }
        for a in &mut canon {
            a.prob /= sum;
        }
        canon.sort_by(|a, b| a.cells.cmp(&b.cells));
        Ok(GridModel {
            l,
            law: Law::Explicit(canon),
        })
    }

    pub fn bernoulli(l: u32, p: f64) -> Result<GridModel> {
        check_level(l)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "inclusion probability must be in (0, 1], got {p}"
            )));
        }
        Ok(GridModel {
            l,
            law: Law::Bernoulli(p),
        })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    /// Per-cell inclusion probabilities `P[cell in S_1]`, indexed by digit.
    pub fn inclusion_probs(&self) -> Vec<f64> {
        let n = (self.l * self.l) as usize;
        match &self.law {
            Law::Bernoulli(p) => alloc::vec![*p; n],
            Law::Explicit(atoms) => {
                let mut q = alloc::vec![0.0; n];
                for a in atoms {
                    for &d in &a.cells {
                        q[d as usize] += a.prob;
                    }
                }
                q
            }
        }
    }

    /// Flat `L^2 x L^2` matrix of `P[d1 in S_1 and d2 in S_1]`
    /// (diagonal entries are the inclusion probabilities).
    pub fn pairwise_probs(&self) -> Vec<f64> {
        let n = (self.l * self.l) as usize;
        let mut m = alloc::vec![0.0; n * n];
        match &self.law {
            Law::Bernoulli(p) => {
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = if i == j { *p } else { p * p };
                    }
                }
            }
            Law::Explicit(atoms) => {
                for a in atoms {
                    for &d1 in &a.cells {
                        for &d2 in &a.cells {
                            m[d1 as usize * n + d2 as usize] += a.prob;
                        }
                    }
                }
            }
        }
        m
    }
}

/// Disc model: `L` child discs of relative radius `1/L`, internally tangent,
/// equally spaced at a uniformly random phase. With `random_count` the
/// number of children is uniform on `{0, ..., 2L}` (mean `L`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscModel {
    l: u32,
    random_count: bool,
}

impl DiscModel {
    pub fn new(l: u32, random_count: bool) -> Result<DiscModel> {
        if l < 3 {
            return Err(Error::Parameter(format!(
                "disc model needs at least 3 children per level, got {l}"
            )));
        }
        Ok(DiscModel { l, random_count })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn random_count(&self) -> bool {
        self.random_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Grid(GridModel),
    Disc(DiscModel),
}

impl Model {
    pub fn l(&self) -> u32 {
        match self {
            Model::Grid(g) => g.l(),
            Model::Disc(d) => d.l(),
        }
    }

    pub fn as_grid(&self) -> Result<&GridModel> {
        match self {
            Model::Grid(g) => Ok(g),
            Model::Disc(_) => Err(Error::Unsupported(
                "operation is defined for grid models only".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Percolation,
    UniformChoice,
    PeresSolomyak,
    ColumnDegenerate,
    RowDegenerate,
    FourCorner,
    VvDiscs,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Percolation,
        Builtin::UniformChoice,
        Builtin::PeresSolomyak,
        Builtin::ColumnDegenerate,
        Builtin::RowDegenerate,
        Builtin::FourCorner,
        Builtin::VvDiscs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Percolation => "percolation",
            Builtin::UniformChoice => "uniform_choice",
            Builtin::PeresSolomyak => "peres_solomyak",
            Builtin::ColumnDegenerate => "column_degenerate",
            Builtin::RowDegenerate => "row_degenerate",
            Builtin::FourCorner => "four_corner",
            Builtin::VvDiscs => "vv_discs",
        }
    }

    pub fn parse(s: &str) -> Option<Builtin> {
        Builtin::ALL.iter().copied().find(|b| b.name() == s)
    }

    /// The level the builtin forces, if any.
    pub fn forced_l(self) -> Option<u32> {
        match self {
            Builtin::PeresSolomyak | Builtin::FourCorner => Some(4),
            _ => None,
        }
    }
}

fn subsets_of_size(n: u8, k: u8) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = Vec::with_capacity(k as usize);
    fn rec(start: u8, n: u8, k: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == k as usize {
            out.push(cur.clone());
            return;
        }
        let need = k as usize - cur.len();
        for d in start..=(n - need as u8) {
            cur.push(d);
            rec(d + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Builds one of the named models at level `l`.
pub fn make_builtin(name: Builtin, l: u32) -> Result<Model> {
    if let Some(forced) = name.forced_l() {
        if l != forced {
            return Err(Error::Parameter(format!(
                "{} requires L = {forced}, got {l}",
                name.name()
            )));
        }
    }
    let digits_of =
        |cells: &[(u8, u8)]| -> Vec<Cell> { cells.iter().map(|&(c, r)| Cell::new(c, r)).collect() };
    match name {
        Builtin::Percolation => Ok(Model::Grid(GridModel::bernoulli(l, 1.0 / l as f64)?)),
        Builtin::UniformChoice => {
            if l > 4 {
                return Err(Error::Parameter(
                    "uniform_choice enumerates all size-L cell subsets; L <= 4 supported".into(),
                ));
            }
            let subs = subsets_of_size((l * l) as u8, l as u8);
            let p = 1.0 / subs.len() as f64;
            let atoms = subs
                .into_iter()
                .map(|digits| {
                    (
                        digits
                            .into_iter()
                            .map(|d| Cell::from_digit(d, l))
                            .collect::<Vec<_>>(),
                        p,
                    )
                })
                .collect();
            Ok(Model::Grid(GridModel::from_atoms(l, atoms)?))
        }
        Builtin::PeresSolomyak => {
            // one uniform choice in each 2x2 block of the 4x4 grid
            let mut atoms: Vec<(Vec<Cell>, f64)> = Vec::with_capacity(256);
            let block_cells = |bx: u8, by: u8| -> [Cell; 4] {
                [
                    Cell::new(2 * bx + 1, 2 * by + 1),
                    Cell::new(2 * bx + 2, 2 * by + 1),
                    Cell::new(2 * bx + 1, 2 * by + 2),
                    Cell::new(2 * bx + 2, 2 * by + 2),
                ]
            };
            let blocks = [
                block_cells(0, 0),
                block_cells(1, 0),
                block_cells(0, 1),
                block_cells(1, 1),
            ];
            for i0 in 0..4 {
                for i1 in 0..4 {
                    for i2 in 0..4 {
                        for i3 in 0..4 {
                            atoms.push((
                                alloc::vec![
                                    blocks[0][i0],
                                    blocks[1][i1],
                                    blocks[2][i2],
                                    blocks[3][i3]
                                ],
                                1.0 / 256.0,
                            ));
                        }
                    }
                }
            }
            Ok(Model::Grid(GridModel::from_atoms(l, atoms)?))
        }
        Builtin::ColumnDegenerate | Builtin::RowDegenerate => {
            if l > 4 {
                return Err(Error::Parameter(
                    "degenerate builtins enumerate L^L atoms; L <= 4 supported".into(),
                ));
            }
            let mut atoms: Vec<(Vec<Cell>, f64)> = Vec::new();
            let count = (l as u64).pow(l);
            let p = 1.0 / count as f64;
            for mut pick in 0..count {
                let mut cells = Vec::with_capacity(l as usize);
                for i in 1..=l as u8 {
                    let j = (pick % l as u64) as u8 + 1;
                    pick /= l as u64;
                    cells.push(if name == Builtin::ColumnDegenerate {
                        Cell::new(i, j)
                    } else {
                        Cell::new(j, i)
                    });
                }
                atoms.push((cells, p));
            }
            Ok(Model::Grid(GridModel::from_atoms(l, atoms)?))
        }
        Builtin::FourCorner => Ok(Model::Grid(GridModel::from_atoms(
            l,
            alloc::vec![(digits_of(&[(1, 1), (4, 1), (1, 4), (4, 4)]), 1.0)],
        )?)),
        Builtin::VvDiscs => Ok(Model::Disc(DiscModel::new(l, false)?)),
    }
}

/// Structural flags of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub is_uniform: bool,
    pub is_vertically_degenerate: bool,
    pub is_horizontally_degenerate: bool,
    pub is_ahlfors: bool,
    pub is_surviving: bool,
    /// Single-atom support (the chain is non-random).
    pub is_deterministic: bool,
    pub rho: f64,
    pub mean_offspring: f64,
}

impl Classification {
    pub fn is_degenerate(&self) -> bool {
        self.is_vertically_degenerate || self.is_horizontally_degenerate
    }
}

/// Computes the flags by exact support enumeration (or closed form for the
/// per-cell-independent law) and checks criticality `E[offspring] = L`.
pub fn classify(model: &Model) -> Result<Classification> {
    let l = model.l();
    match model {
        Model::Grid(g) => {
            let q = g.inclusion_probs();
            let mean: f64 = q.iter().sum();
            if math::abs(mean - l as f64) > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "mean offspring {mean} violates criticality E = L = {l}"
                )));
            }
            let is_uniform = q.iter().all(|&p| math::abs(p - 1.0 / l as f64) <= 1e-12);
            let (v_deg, h_deg, ahlfors, surviving, deterministic) = match g.law() {
                Law::Bernoulli(_) => (false, false, false, false, false),
                Law::Explicit(atoms) => {
                    let one_per = |by_col: bool| {
                        atoms.iter().all(|a| {
                            if a.cells.len() != l as usize {
                                return false;
                            }
                            let mut seen = [false; 16];
                            for &d in &a.cells {
                                let idx = if by_col {
                                    (d % l as u8) as usize
                                } else {
                                    (d / l as u8) as usize
                                };
                                if seen[idx] {
                                    return false;
                                }
                                seen[idx] = true;
                            }
                            true
                        })
                    };
                    (
                        one_per(true),
                        one_per(false),
                        atoms.iter().all(|a| a.cells.len() == l as usize),
                        atoms.iter().all(|a| !a.cells.is_empty()),
                        atoms.len() == 1,
                    )
                }
            };
            Ok(Classification {
                is_uniform,
                is_vertically_degenerate: v_deg,
                is_horizontally_degenerate: h_deg,
                is_ahlfors: ahlfors,
                is_surviving: surviving,
                is_deterministic: deterministic,
                rho: 1.0 / l as f64,
                mean_offspring: mean,
            })
        }
        Model::Disc(d) => Ok(Classification {
            is_uniform: false,
            is_vertically_degenerate: false,
            is_horizontally_degenerate: false,
            is_ahlfors: !d.random_count(),
            is_surviving: !d.random_count(),
            is_deterministic: false,
            rho: 1.0 / l as f64,
            mean_offspring: l as f64,
        }),
    }
}

/// Per-level contents of a sampled chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Levels {
    /// Sorted packed addresses per level.
    Grid(Vec<Vec<u64>>),
    /// Sorted disc centers per level; the level-`k` radius is `L^-k`.
    Disc(Vec<Vec<(f64, f64)>>),
}

/// A sampled nested chain `S_0 ⊃ S_1 ⊃ ... ⊃ S_n` with its normalized
/// population trace `Z_k = L^-k #S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    l: u32,
    levels: Levels,
    z: Vec<f64>,
}

impl Realization {
    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn depth(&self) -> u32 {
        self.z.len() as u32 - 1
    }

    pub fn z_trace(&self) -> &[f64] {
        &self.z
    }

    pub fn count_at(&self, k: u32) -> usize {
        match &self.levels {
            Levels::Grid(v) => v[k as usize].len(),
            Levels::Disc(v) => v[k as usize].len(),
        }
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn grid_codes(&self, k: u32) -> Option<&[u64]> {
        match &self.levels {
            Levels::Grid(v) => v.get(k as usize).map(|x| x.as_slice()),
            Levels::Disc(_) => None,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.levels, Levels::Grid(_))
    }

    /// Squares (or discs) of level `k` as geometry objects.
    pub fn grid_squares(&self, k: u32) -> Vec<crate::geometry::Square> {
        match &self.levels {
            Levels::Grid(v) => v[k as usize]
                .iter()
                .map(|&code| crate::geometry::Square::from_code(self.l, k, code))
                .collect(),
            Levels::Disc(_) => Vec::new(),
        }
    }

    /// Builds a grid realization from explicit per-level address lists;
    /// validates nesting and sorts levels.
    pub fn from_grid_levels(l: u32, mut levels: Vec<Vec<u64>>) -> Result<Realization> {
        if levels.is_empty() || levels[0] != [0] {
            return Err(Error::Parameter("level 0 must be the single root".into()));
        }
        let base = (l * l) as u64;
        for lvl in levels.iter_mut() {
            lvl.sort_unstable();
        }
        for k in 1..levels.len() {
            let (parents, children) = (&levels[k - 1], &levels[k]);
            for &c in children {
                if parents.binary_search(&(c / base)).is_err() {
                    return Err(Error::Parameter(format!(
                        "address {c} at level {k} has no parent"
                    )));
                }
            }
        }
        let z = levels
            .iter()
            .enumerate()
            .map(|(k, lvl)| lvl.len() as f64 / math::powi(l as f64, k as u32))
            .collect();
        Ok(Realization {
            l,
            levels: Levels::Grid(levels),
            z,
        })
    }

    /// True when the deepest level has exactly one square in every column.
    pub fn is_one_per_column(&self) -> bool {
        let n = self.depth();
        let codes = match self.grid_codes(n) {
            Some(c) => c,
            None => return false,
        };
        let mut columns: u64 = 1;
        for _ in 0..n {
            columns = match columns.checked_mul(self.l as u64) {
                Some(c) => c,
                None => return false,
            };
        }
        if codes.len() as u64 != columns {
            return false;
        }
        let mut cols: Vec<u64> = codes
            .iter()
            .map(|&c| address::column_units(c, n, self.l))
            .collect();
        cols.sort_unstable();
        cols.windows(2).all(|w| w[0] != w[1])
    }
}

/// Samples a nested chain to depth `n`. Every node's draw is keyed by
/// `key.child(digit path)`, so the result is a pure function of
/// `(key, model, n)` and identical under any evaluation order.
pub fn sample_chain(model: &Model, n: u32, key: Key) -> Result<Realization> {
    let l = model.l();
    let mut leaves: u64 = 1;
    for _ in 0..n {
        leaves = leaves.saturating_mul(l as u64);
        if leaves > MAX_LEAVES {
            return Err(Error::ResourceGuard(format!(
                "depth {n} exceeds the {MAX_LEAVES}-leaf memory guard for L = {l}"
            )));
        }
    }
    match model {
        Model::Grid(g) => {
            let base = (l * l) as u64;
            let mut levels: Vec<Vec<u64>> = Vec::with_capacity(n as usize + 1);
            levels.push(alloc::vec![0]);
            let mut work: Vec<(u64, Key)> = alloc::vec![(0, key)];
            for _depth in 0..n {
                let mut next: Vec<(u64, Key)> = Vec::with_capacity(work.len() * l as usize);
                for &(code, k) in &work {
                    let mut rng = k.rng();
                    match g.law() {
                        Law::Bernoulli(p) => {
                            for d in 0..base {
                                if rng.next_f64() < *p {
                                    next.push((code * base + d, k.child(d)));
                                }
                            }
                        }
                        Law::Explicit(atoms) => {
                            let u = rng.next_f64();
                            let mut acc = 0.0;
                            let mut chosen = &atoms[atoms.len() - 1];
                            for a in atoms {
                                acc += a.prob;
                                if u < acc {
                                    chosen = a;
                                    break;
                                }
                            }
                            for &d in &chosen.cells {
                                next.push((code * base + d as u64, k.child(d as u64)));
                            }
                        }
                    }
                }
                levels.push(next.iter().map(|&(c, _)| c).collect());
                work = next;
            }
            let z = levels
                .iter()
                .enumerate()
                .map(|(k, lvl)| lvl.len() as f64 / math::powi(l as f64, k as u32))
                .collect();
            Ok(Realization {
                l,
                levels: Levels::Grid(levels),
                z,
            })
        }
        Model::Disc(dm) => {
            let two_pi = 2.0 * core::f64::consts::PI;
            let mut levels: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n as usize + 1);
            levels.push(alloc::vec![(0.0, 0.0)]);
            let mut work: Vec<((f64, f64), Key)> = alloc::vec![((0.0, 0.0), key)];
            for depth in 0..n {
                let parent_r = math::powi(1.0 / l as f64, depth);
                let child_r = parent_r / l as f64;
                let orbit = parent_r - child_r;
                let mut next: Vec<((f64, f64), Key)> = Vec::new();
                for &((px, py), k) in &work {
                    let mut rng = k.rng();
                    let count = if dm.random_count() {
                        rng.next_index(2 * l as usize + 1)
                    } else {
                        l as usize
                    };
                    let phase = rng.next_f64() * two_pi;
                    for i in 0..count {
                        let a = phase + two_pi * i as f64 / count as f64;
                        let c = (px + orbit * math::cos(a), py + orbit * math::sin(a));
                        next.push((c, k.child(i as u64)));
                    }
                }
                next.sort_unstable_by(|a, b| {
                    a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1))
                });
                levels.push(next.iter().map(|&(c, _)| c).collect());
                work = next;
            }
            let z = levels
                .iter()
                .enumerate()
                .map(|(k, lvl)| lvl.len() as f64 / math::powi(l as f64, k as u32))
                .collect();
            Ok(Realization {
                l,
                levels: Levels::Disc(levels),
                z,
            })
        }
    }
}

/// Stable identifier used in result files.
pub fn model_id(name: &str, l: u32) -> String {
    format!("{name}-L{l}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtin(b: Builtin, l: u32) -> Model {
        make_builtin(b, l).unwrap()
    }

    #[test]
    fn percolation_classification() {
        let m = builtin(Builtin::Percolation, 2);
        let c = classify(&m).unwrap();
        assert!((c.mean_offspring - 2.0).abs() < 1e-12);
        assert!(c.is_uniform);
        assert!(!c.is_degenerate());
        assert!(!c.is_ahlfors);
        assert!(!c.is_surviving);
    }

    #[test]
    fn uniform_choice_classification() {
        let m = builtin(Builtin::UniformChoice, 2);
        if let Model::Grid(g) = &m {
            if let Law::Explicit(atoms) = g.law() {
                assert_eq!(atoms.len(), 6);
            } else {
                panic!("expected explicit law");
            }
        }
        let c = classify(&m).unwrap();
        assert!(c.is_uniform && c.is_ahlfors && !c.is_degenerate() && c.is_surviving);
    }

    #[test]
    fn peres_solomyak_classification() {
        let m = builtin(Builtin::PeresSolomyak, 4);
        let c = classify(&m).unwrap();
        assert!(c.is_uniform && c.is_ahlfors && !c.is_degenerate());
        assert!((c.mean_offspring - 4.0).abs() < 1e-9);
    }

    #[test]
    fn column_degenerate_classification() {
        let m = builtin(Builtin::ColumnDegenerate, 2);
        if let Model::Grid(g) = &m {
            if let Law::Explicit(atoms) = g.law() {
                assert_eq!(atoms.len(), 4);
                assert!(atoms.iter().all(|a| (a.prob - 0.25).abs() < 1e-12));
            }
        }
        let c = classify(&m).unwrap();
        assert!(c.is_vertically_degenerate && !c.is_horizontally_degenerate);
        assert!(c.is_uniform && c.is_ahlfors);
    }

    #[test]
    fn four_corner_is_deterministic_not_uniform() {
        let m = builtin(Builtin::FourCorner, 4);
        let c = classify(&m).unwrap();
        assert!(c.is_deterministic);
        assert!(!c.is_uniform);
        // two corner squares share each occupied column, so the law does not
        // pick one square per column
        assert!(!c.is_vertically_degenerate && !c.is_horizontally_degenerate);
        assert!(c.is_ahlfors && c.is_surviving);
    }

    #[test]
    fn incompatible_builtin_level() {
        assert!(make_builtin(Builtin::PeresSolomyak, 2).is_err());
        assert!(make_builtin(Builtin::VvDiscs, 2).is_err());
    }

    #[test]
    fn criticality_violation_rejected() {
        let m = Model::Grid(GridModel::bernoulli(2, 0.3).unwrap());
        assert!(matches!(classify(&m), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_nested() {
        let m = builtin(Builtin::Percolation, 2);
        let a = sample_chain(&m, 6, Key::new(77).child(3)).unwrap();
        let b = sample_chain(&m, 6, Key::new(77).child(3)).unwrap();
        assert_eq!(a, b);
        for k in 1..=6 {
            let parents = a.grid_codes(k - 1).unwrap();
            for &c in a.grid_codes(k).unwrap() {
                assert!(parents.binary_search(&(c / 4)).is_ok());
            }
        }
    }

    #[test]
    fn ahlfors_chains_have_unit_z() {
        let m = builtin(Builtin::UniformChoice, 2);
        let r = sample_chain(&m, 8, Key::new(5)).unwrap();
        assert!(r.z_trace().iter().all(|&z| (z - 1.0).abs() < 1e-12));
        let d = builtin(Builtin::VvDiscs, 3);
        let r = sample_chain(&d, 4, Key::new(5)).unwrap();
        assert!(r.z_trace().iter().all(|&z| (z - 1.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_models_pick_one_per_column_always() {
        let m = builtin(Builtin::ColumnDegenerate, 2);
        for rep in 0..200 {
            let r = sample_chain(&m, 1, Key::new(11).child(rep)).unwrap();
            let cells: Vec<Cell> = r
                .grid_codes(1)
                .unwrap()
                .iter()
                .map(|&c| Cell::from_digit(c as u8, 2))
                .collect();
            assert_eq!(cells.len(), 2);
            let mut cols: Vec<u8> = cells.iter().map(|c| c.col).collect();
            cols.sort_unstable();
            assert_eq!(cols, alloc::vec![1, 2]);
        }
    }

    #[test]
    fn memory_guard_trips() {
        let m = builtin(Builtin::Percolation, 2);
        assert!(matches!(
            sample_chain(&m, 27, Key::new(1)),
            Err(Error::ResourceGuard(_))
        ));
    }

    #[test]
    fn empirical_inclusion_frequency_uniform() {
        let m = builtin(Builtin::UniformChoice, 2);
        let reps = 2000;
        let mut counts = [0u32; 4];
        for rep in 0..reps {
            let r = sample_chain(&m, 1, Key::new(4242).child(rep)).unwrap();
            for &c in r.grid_codes(1).unwrap() {
                counts[c as usize] += 1;
            }
        }
        // each cell appears with probability 1/2
        let se = (0.25f64 / reps as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / reps as f64;
            assert!((freq - 0.5).abs() < 5.0 * se, "freq {freq}");
        }
    }

    #[test]
    fn population_mean_matches_criticality() {
        // E #S_8 = 2^8 for critical percolation at L = 2
        let m = builtin(Builtin::Percolation, 2);
        let reps = 1000;
        let counts: Vec<f64> = (0..reps)
            .map(|rep| {
                sample_chain(&m, 8, Key::new(900).child(rep))
                    .unwrap()
                    .count_at(8) as f64
            })
            .collect();
        let (mean, se) = crate::quad::mean_stderr(&counts);
        assert!(
            (mean - 256.0).abs() < 5.0 * se,
            "mean {mean}, stderr {se}"
        );
    }

    #[test]
    fn z_is_an_empirical_martingale() {
        let m = builtin(Builtin::Percolation, 2);
        let reps = 1000;
        for k in 0..8u32 {
            let diffs: Vec<f64> = (0..reps)
                .map(|rep| {
                    let r = sample_chain(&m, k + 1, Key::new(31).child(rep)).unwrap();
                    r.z_trace()[k as usize + 1] - r.z_trace()[k as usize]
                })
                .collect();
            let (mean, se) = crate::quad::mean_stderr(&diffs);
            assert!(mean.abs() < 5.0 * se.max(1e-12), "k={k} mean {mean} se {se}");
        }
    }
}
