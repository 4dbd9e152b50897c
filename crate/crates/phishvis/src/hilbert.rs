//! Hilbert space-filling curve: conversions between a 1-D curve index and
//! 2-D grid coordinates.
//!
//! The curve visits every cell of a `2^k x 2^k` grid exactly once and
//! consecutive indices are always grid-adjacent, which is what makes it a
//! good layout for byte streams: bytes that are close in the document stay
//! close in the image.
//!
//! Orientation is fixed: index 0 maps to `(0, 0)` and the last index lands
//! on row `y = 0`.

use crate::{Error, Result};

/// Curve recursion depth `k`, with `2^k` cells per axis.
///
/// Order 7 (a 128x128 grid) is the production size; orders above 12 are
/// rejected to keep exhaustive checks bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveOrder(u8);

impl CurveOrder {
    pub const MAX_K: u8 = 12;

    pub fn new(k: u8) -> Result<CurveOrder> {
        if k == 0 || k > Self::MAX_K {
            return Err(Error::OutOfRange(format!(
                "curve order {k} outside 1..={}",
                Self::MAX_K
            )));
        }
        Ok(CurveOrder(k))
    }

    /// The 128x128 production order.
    pub const fn order7() -> CurveOrder {
        CurveOrder(7)
    }

    pub fn k(self) -> u8 {
        self.0
    }

    /// Cells per axis: `2^k`.
    pub fn side(self) -> usize {
        1 << self.0
    }

    /// Total cells: `4^k`.
    pub fn n_cells(self) -> usize {
        1 << (2 * self.0)
    }
}

impl Default for CurveOrder {
    fn default() -> CurveOrder {
        CurveOrder::order7()
    }
}

/// A grid cell. `x` is the column, `y` the row, both in `[0, side)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

/// Map a curve index to the cell visited at that step.
pub fn d2xy(order: CurveOrder, d: usize) -> Result<Cell> {
    if d >= order.n_cells() {
        return Err(Error::OutOfRange(format!(
            "curve index {d} >= {}",
            order.n_cells()
        )));
    }
    let side = order.side();
    let mut t = d;
    let mut x = 0usize;
    let mut y = 0usize;
    let mut s = 1usize;
    while s < side {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        rotate(s, &mut x, &mut y, rx, ry);
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    Ok(Cell { x, y })
}

/// Inverse of [`d2xy`]: the step at which the curve visits `cell`.
pub fn xy2d(order: CurveOrder, cell: Cell) -> Result<usize> {
    let side = order.side();
    if cell.x >= side || cell.y >= side {
        return Err(Error::OutOfRange(format!(
            "cell ({}, {}) outside {side}x{side} grid",
            cell.x, cell.y
        )));
    }
    let mut x = cell.x;
    let mut y = cell.y;
    let mut d = 0usize;
    let mut s = side / 2;
    while s > 0 {
        let rx = usize::from(x & s > 0);
        let ry = usize::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        rotate(s, &mut x, &mut y, rx, ry);
        s /= 2;
    }
    Ok(d)
}

// Quadrant rotation/reflection for one recursion level. The reflection uses
// wrapping arithmetic because during xy2d the coordinates can exceed the
// current quadrant size before the high bits are stripped.
fn rotate(s: usize, x: &mut usize, y: &mut usize, rx: usize, ry: usize) {
    if ry == 0 {
        if rx == 1 {
            *x = (s - 1).wrapping_sub(*x);
            *y = (s - 1).wrapping_sub(*y);
        }
        std::mem::swap(x, y);
    }
}
