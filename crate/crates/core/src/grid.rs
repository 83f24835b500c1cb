//! Dyadic grids on `[0,1)^d` and grid functions (nonnegative cell masses).
//!
//! A [`DyadicGrid`] of resolution `p` in dimension `d` has `2^p` cells per
//! axis. Cell `i` (a multi-index in `{0..2^p-1}^d`) is the half-open box
//! `2^-p [i, i+1)`. Flat cell indices use row-major lexicographic order: the
//! first coordinate varies slowest, so in `d = 2` the cells are listed
//! `(0,0), (0,1), ..., (0,K-1), (1,0), ...` with `K = 2^p`.
//!
//! A [`GridFunction`] stores one mass per cell. Its cumulative value at a
//! corner `s = 2^-p j`, `j` in `{0..K}^d`, is the total mass of the cells
//! lying in `[0, s)`. Corners with a coordinate equal to `K` are the limits
//! from below at the right edge of the cube.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported `p * d`; keeps cell arrays at or below 2^20 entries.
pub const MAX_CELL_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicGrid {
    d: usize,
    p: u32,
}

impl DyadicGrid {
    pub fn new(d: usize, p: u32) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if p * d as u32 > MAX_CELL_BITS {
            return Err(Error::InvalidGrid(format!(
                "resolution p = {p} in d = {d} exceeds 2^{MAX_CELL_BITS} cells"
            )));
        }
        Ok(DyadicGrid { d, p })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.p
    }

    /// Cells per axis, `2^p`.
    pub fn side(&self) -> usize {
        1usize << self.p
    }

    /// Total number of cells, `2^(pd)`.
    pub fn num_cells(&self) -> usize {
        1usize << (self.p as usize * self.d)
    }

    /// Lebesgue measure of one cell, `2^(-pd)`.
    pub fn cell_volume(&self) -> f64 {
        (self.num_cells() as f64).recip()
    }

    /// Number of corners of the closed lattice, `(2^p + 1)^d`.
    pub fn num_corners(&self) -> usize {
        (self.side() + 1).pow(self.d as u32)
    }

    /// Multi-index of a flat cell index.
    pub fn cell_index(&self, flat: usize) -> [usize; 3] {
        unravel(flat, self.side(), self.d)
    }

    pub fn flat_cell(&self, idx: &[usize]) -> usize {
        ravel(idx, self.side())
    }

    /// Multi-index of a flat corner index (lattice side `2^p + 1`).
    pub fn corner_index(&self, flat: usize) -> [usize; 3] {
        unravel(flat, self.side() + 1, self.d)
    }

    pub fn flat_corner(&self, idx: &[usize]) -> usize {
        ravel(idx, self.side() + 1)
    }

    /// Cell containing a point of `[0,1)^d`, by `floor(2^p u)` per axis.
    /// Returns `None` when a coordinate falls outside `[0, 1)`.
    pub fn locate(&self, u: &[f64]) -> Option<usize> {
        let side = self.side();
        let scale = side as f64;
        let mut flat = 0usize;
        for &x in &u[..self.d] {
            if !(0.0..1.0).contains(&x) {
                return None;
            }
            let k = ((x * scale) as usize).min(side - 1);
            flat = flat * side + k;
        }
        Some(flat)
    }

    fn check_same(&self, other: &DyadicGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(d={}, p={}) vs (d={}, p={})",
                self.d, self.p, other.d, other.p
            )));
        }
        Ok(())
    }
}

fn unravel(mut flat: usize, side: usize, d: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for k in (0..d).rev() {
        idx[k] = flat % side;
        flat /= side;
    }
    idx
}

fn ravel(idx: &[usize], side: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * side + i)
}

/// Nonnegative cell masses on a dyadic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunctionRepr", into = "GridFunctionRepr")]
pub struct GridFunction {
    grid: DyadicGrid,
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFunctionRepr {
    d: usize,
    p: u32,
    masses: Vec<f64>,
}

impl TryFrom<GridFunctionRepr> for GridFunction {
    type Error = Error;

    fn try_from(r: GridFunctionRepr) -> Result<Self> {
        GridFunction::new(DyadicGrid::new(r.d, r.p)?, r.masses)
    }
}

impl From<GridFunction> for GridFunctionRepr {
    fn from(g: GridFunction) -> Self {
        GridFunctionRepr { d: g.grid.d, p: g.grid.p, masses: g.masses }
    }
}

impl GridFunction {
    pub fn new(grid: DyadicGrid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.num_cells() {
            return Err(Error::InvalidGrid(format!(
                "expected {} masses, got {}",
                grid.num_cells(),
                masses.len()
            )));
        }
        if let Some((flat, &m)) = masses.iter().enumerate().find(|(_, m)| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::NegativeMass { cell: grid.cell_index(flat)[..grid.d].to_vec(), mass: m });
        }
        Ok(GridFunction { grid, masses })
    }

    pub fn zero(grid: DyadicGrid) -> Self {
        GridFunction { grid, masses: vec![0.0; grid.num_cells()] }
    }

    /// Constant density `slope` per unit volume: the grid image of
    /// `s -> slope * s_1 * ... * s_d`.
    pub fn uniform(grid: DyadicGrid, slope: f64) -> Result<Self> {
        GridFunction::new(grid, vec![slope * grid.cell_volume(); grid.num_cells()])
    }

    /// The grid image of the Lebesgue distribution function.
    pub fn identity(grid: DyadicGrid) -> Self {
        GridFunction { grid, masses: vec![grid.cell_volume(); grid.num_cells()] }
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Cumulative values at every corner of the closed lattice `{0..2^p}^d`,
    /// flat in row-major order with side `2^p + 1`.
    pub fn cumulative(&self) -> Vec<f64> {
        let side = self.grid.side();
        let cside = side + 1;
        let d = self.grid.d;
        let mut c = vec![0.0; self.grid.num_corners()];
        for (flat, &m) in self.masses.iter().enumerate() {
            let idx = self.grid.cell_index(flat);
            let mut shifted = [0usize; 3];
            for k in 0..d {
                shifted[k] = idx[k] + 1;
            }
            c[ravel(&shifted[..d], cside)] = m;
        }
        // prefix sums along each axis in turn
        let mut stride = 1usize;
        for _ in 0..d {
            for flat in 0..c.len() {
                let coord = (flat / stride) % cside;
                if coord > 0 {
                    c[flat] += c[flat - stride];
                }
            }
            stride *= cside;
        }
        c
    }

    /// Cumulative value at corner `2^-p j`.
    pub fn cumulative_at(&self, j: &[usize]) -> f64 {
        let d = self.grid.d;
        let mut total = 0.0;
        for (flat, &m) in self.masses.iter().enumerate() {
            let idx = self.grid.cell_index(flat);
            if (0..d).all(|k| idx[k] < j[k]) {
                total += m;
            }
        }
        total
    }

    /// Cumulative values of a `d = 1` grid function at the lower corners
    /// `0, 2^-p, ..., 1 - 2^-p` followed by the total mass.
    pub fn corner_values_1d(&self) -> Vec<f64> {
        debug_assert_eq!(self.grid.d, 1);
        let mut out = Vec::with_capacity(self.masses.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &m in &self.masses {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// Aggregates masses onto a coarser grid of resolution `p < self.p`.
    pub fn coarsen(&self, p: u32) -> Result<GridFunction> {
        if p > self.grid.p {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen resolution {} to {p}",
                self.grid.p
            )));
        }
        let coarse = DyadicGrid::new(self.grid.d, p)?;
        let shift = self.grid.p - p;
        let mut masses = vec![0.0; coarse.num_cells()];
        for (flat, &m) in self.masses.iter().enumerate() {
            let idx = self.grid.cell_index(flat);
            let mut cidx = [0usize; 3];
            for k in 0..self.grid.d {
                cidx[k] = idx[k] >> shift;
            }
            masses[coarse.flat_cell(&cidx[..self.grid.d])] += m;
        }
        Ok(GridFunction { grid: coarse, masses })
    }

    pub fn scaled(&self, factor: f64) -> Result<GridFunction> {
        GridFunction::new(self.grid, self.masses.iter().map(|m| m * factor).collect())
    }
}

/// Builds the grid function whose cumulative corner values equal `g_eval`
/// at every corner of `{0, 2^-p, ..., 1}^d`. Cell masses come from
/// `d`-dimensional finite differences; `g_eval` must vanish on corners with
/// a zero coordinate and be a distribution function on the lattice.
pub fn discretize<F>(g_eval: F, grid: DyadicGrid) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let d = grid.d;
    let cside = grid.side() + 1;
    let step = (grid.side() as f64).recip();
    let values: Vec<f64> = (0..grid.num_corners())
        .map(|flat| {
            let j = grid.corner_index(flat);
            let s: Vec<f64> = j[..d].iter().map(|&jk| jk as f64 * step).collect();
            g_eval(&s)
        })
        .collect();
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let slack = 1e-12 * scale;
    for (flat, &v) in values.iter().enumerate() {
        let j = grid.corner_index(flat);
        if j[..d].contains(&0) && v.abs() > slack {
            return Err(Error::Domain(format!(
                "g must vanish at corner {:?} on the lower boundary, got {v}",
                &j[..d]
            )));
        }
    }
    let mut masses = Vec::with_capacity(grid.num_cells());
    for flat in 0..grid.num_cells() {
        let i = grid.cell_index(flat);
        let mut m = 0.0;
        for e in 0..(1usize << d) {
            let mut corner = [0usize; 3];
            let mut ones = 0;
            for k in 0..d {
                let bit = (e >> k) & 1;
                corner[k] = i[k] + bit;
                ones += bit;
            }
            let sign = if (d - ones).is_multiple_of(2) { 1.0 } else { -1.0 };
            m += sign * values[ravel(&corner[..d], cside)];
        }
        if m < -slack || !m.is_finite() {
            return Err(Error::NegativeMass { cell: i[..d].to_vec(), mass: m });
        }
        masses.push(m.max(0.0));
    }
    Ok(GridFunction { grid, masses })
}

/// Sup-norm of the difference of cumulative values over every corner of
/// the closed lattice (including the total-mass corner).
pub fn sup_norm_dist(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    if a.grid.d == 1 {
        let mut acc = 0.0f64;
        let mut best = 0.0f64;
        for (x, y) in a.masses.iter().zip(&b.masses) {
            acc += x - y;
            best = best.max(acc.abs());
        }
        return Ok(best);
    }
    let ca = a.cumulative();
    let cb = b.cumulative();
    Ok(ca.iter().zip(&cb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_limits() {
        assert!(DyadicGrid::new(0, 1).is_err());
        assert!(DyadicGrid::new(4, 1).is_err());
        assert!(DyadicGrid::new(1, 20).is_ok());
        assert!(DyadicGrid::new(2, 11).is_err());
        let g = DyadicGrid::new(2, 3).unwrap();
        assert_eq!(g.num_cells(), 64);
        assert_eq!(g.num_corners(), 81);
        assert_eq!(g.cell_volume(), 1.0 / 64.0);
    }

    #[test]
    fn row_major_order() {
        let g = DyadicGrid::new(2, 1).unwrap();
        assert_eq!(g.cell_index(1)[..2], [0, 1]);
        assert_eq!(g.cell_index(2)[..2], [1, 0]);
        assert_eq!(g.flat_cell(&[1, 0]), 2);
        assert_eq!(g.locate(&[0.7, 0.2]), Some(2));
        assert_eq!(g.locate(&[1.0, 0.2]), None);
    }

    #[test]
    fn discretize_identity_1d() {
        let grid = DyadicGrid::new(1, 2).unwrap();
        let gf = discretize(|s| s[0], grid).unwrap();
        let corners = gf.corner_values_1d();
        assert_eq!(&corners[..4], &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(corners[4], 1.0);
    }

    #[test]
    fn discretize_zero() {
        let grid = DyadicGrid::new(3, 2).unwrap();
        let gf = discretize(|_| 0.0, grid).unwrap();
        assert!(gf.masses().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn discretize_product_2d() {
        // direct volumes of the product measure: each quarter square has 1/4
        let grid = DyadicGrid::new(2, 1).unwrap();
        let gf = discretize(|s| s[0] * s[1], grid).unwrap();
        assert_eq!(gf.masses(), &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(gf.cumulative_at(&[1, 1]), 0.25);
        assert_eq!(gf.cumulative_at(&[2, 1]), 0.5);
    }

    #[test]
    fn discretize_rejects_decreasing() {
        let grid = DyadicGrid::new(1, 2).unwrap();
        let err = discretize(|s| if s[0] > 0.6 { 0.1 } else { s[0] }, grid).unwrap_err();
        assert_eq!(err, Error::NegativeMass { cell: vec![2], mass: 0.1 - 0.5 });
        assert!(matches!(discretize(|s| s[0] + 1.0, grid), Err(Error::Domain(_))));
    }

    #[test]
    fn cumulative_matches_direct_sum() {
        let grid = DyadicGrid::new(2, 2).unwrap();
        let masses: Vec<f64> = (0..16).map(|i| (i * 7 % 5) as f64).collect();
        let gf = GridFunction::new(grid, masses).unwrap();
        let c = gf.cumulative();
        for flat in 0..grid.num_corners() {
            let j = grid.corner_index(flat);
            assert_eq!(c[flat], gf.cumulative_at(&j[..2]));
        }
    }

    #[test]
    fn sup_norm_examples() {
        let grid = DyadicGrid::new(1, 1).unwrap();
        let a = GridFunction::new(grid, vec![0.5, 0.5]).unwrap();
        let b = GridFunction::new(grid, vec![0.25, 0.75]).unwrap();
        assert_eq!(sup_norm_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(sup_norm_dist(&a, &b).unwrap(), 0.25);
        let grid6 = DyadicGrid::new(1, 6).unwrap();
        let d = sup_norm_dist(&GridFunction::zero(grid6), &GridFunction::identity(grid6)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let other = DyadicGrid::new(1, 2).unwrap();
        assert!(matches!(sup_norm_dist(&a, &GridFunction::zero(other)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sup_norm_2d_uses_edge_corners() {
        // mass only in the top-left cell is visible only at corners with s_1 = 1
        let grid = DyadicGrid::new(2, 1).unwrap();
        let a = GridFunction::new(grid, vec![0.0, 0.0, 0.3, 0.0]).unwrap();
        let z = GridFunction::zero(grid);
        assert_eq!(sup_norm_dist(&a, &z).unwrap(), 0.3);
    }

    #[test]
    fn coarsen_preserves_mass() {
        let grid = DyadicGrid::new(2, 3).unwrap();
        let gf = GridFunction::new(grid, (0..64).map(|i| i as f64).collect()).unwrap();
        let c = gf.coarsen(1).unwrap();
        assert_eq!(c.total_mass(), gf.total_mass());
        assert_eq!(c.masses()[0], gf.cumulative_at(&[4, 4]));
    }

    #[test]
    fn json_shape() {
        let grid = DyadicGrid::new(1, 1).unwrap();
        let gf = GridFunction::new(grid, vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&gf).unwrap();
        assert_eq!(s, r#"{"d":1,"p":1,"masses":[0.25,0.75]}"#);
        let back: GridFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, gf);
        assert!(serde_json::from_str::<GridFunction>(r#"{"d":1,"p":1,"masses":[-1,0]}"#).is_err());
        assert!(serde_json::from_str::<GridFunction>(r#"{"d":1,"p":1,"masses":[1]}"#).is_err());
        assert!(serde_json::from_str::<GridFunction>(r#"{"d":1,"p":1,"masses":[1,1],"x":0}"#).is_err());
    }
}
