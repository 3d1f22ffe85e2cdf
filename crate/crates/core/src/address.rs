//! Addresses of dyadic-style grid cells.
//!
//! A depth-`n` cell of the `L`-adic subdivision of the unit square is
//! addressed by a word of `n` cells, each a 1-based `(col, row)` pair in
//! `[1, L]^2`. Addresses are packed into `u64` codes base `L^2`, most
//! significant digit first, so sibling blocks are contiguous and sorted
//! codes group by ancestor.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One grid cell, 1-based, `col` horizontal and `row` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub col: u8,
    pub row: u8,
}

impl Cell {
    pub fn new(col: u8, row: u8) -> Cell {
        Cell { col, row }
    }

    /// Digit in `[0, L^2)`: `(col-1) + (row-1) * L`.
    #[inline]
    pub fn digit(self, l: u32) -> u8 {
        debug_assert!(1 <= self.col && self.col as u32 <= l);
        debug_assert!(1 <= self.row && self.row as u32 <= l);
        (self.col - 1) + (self.row - 1) * l as u8
    }

    #[inline]
    pub fn from_digit(d: u8, l: u32) -> Cell {
        Cell {
            col: d % l as u8 + 1,
            row: d / l as u8 + 1,
        }
    }
}

/// Packs cells (level 1 first) into a base-`L^2` code.
pub fn pack(cells: &[Cell], l: u32) -> u64 {
    let base = (l * l) as u64;
    cells
        .iter()
        .fold(0u64, |acc, c| acc * base + c.digit(l) as u64)
}

/// Inverse of [`pack`] for a known depth.
pub fn unpack(code: u64, depth: u32, l: u32) -> Vec<Cell> {
    let base = (l * l) as u64;
    let mut cells = alloc::vec![Cell::new(1, 1); depth as usize];
    let mut c = code;
    for k in (0..depth as usize).rev() {
        cells[k] = Cell::from_digit((c % base) as u8, l);
        c /= base;
    }
    cells
}

/// Lower-left corner of the addressed square, in integer grid units of
/// size `L^-depth` (exact).
pub fn corner_units(code: u64, depth: u32, l: u32) -> (u64, u64) {
    let base = (l * l) as u64;
    let lu = l as u64;
    let mut x = 0u64;
    let mut y = 0u64;
    let mut c = code;
    // digits come out level-n first; accumulate positionally
    let mut place = 1u64;
    for _ in 0..depth {
        let d = c % base;
        x += (d % lu) * place;
        y += (d / lu) * place;
        c /= base;
        place *= lu;
    }
    (x, y)
}

/// Lower-left corner and side length of the addressed square.
pub fn square_geometry(code: u64, depth: u32, l: u32) -> (f64, f64, f64) {
    let (xu, yu) = corner_units(code, depth, l);
    let side = crate::math::powi(1.0 / l as f64, depth);
    (xu as f64 * side, yu as f64 * side, side)
}

/// Column index (0-based, in `[0, L^depth)`) of the addressed square.
pub fn column_units(code: u64, depth: u32, l: u32) -> u64 {
    corner_units(code, depth, l).0
}

/// The number of depth-`n` cells `L^(2n)`, guarded against overflow.
pub fn level_size(l: u32, depth: u32) -> Result<u64> {
    let base = (l as u64) * (l as u64);
    let mut s: u64 = 1;
    for _ in 0..depth {
        s = s
            .checked_mul(base)
            .ok_or_else(|| Error::ResourceGuard(alloc::format!("L^2n overflows at depth {depth}")))?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_roundtrip() {
        let l = 3;
        let cells = alloc::vec![Cell::new(2, 3), Cell::new(1, 1), Cell::new(3, 2)];
        let code = pack(&cells, l);
        assert_eq!(unpack(code, 3, l), cells);
    }

    #[test]
    fn corner_nesting() {
        // child (2,1) of (1,1) at L=2 sits at (1/4, 0) with side 1/4
        let code = pack(&[Cell::new(1, 1), Cell::new(2, 1)], 2);
        let (x, y, s) = square_geometry(code, 2, 2);
        assert_eq!((x, y, s), (0.25, 0.0, 0.25));
    }

    #[test]
    fn corner_level_one() {
        // (i,j) occupies [(i-1)/L, i/L] x [(j-1)/L, j/L]
        let code = pack(&[Cell::new(4, 1)], 4);
        let (x, y, s) = square_geometry(code, 1, 4);
        assert_eq!((x, y, s), (0.75, 0.0, 0.25));
    }
}
