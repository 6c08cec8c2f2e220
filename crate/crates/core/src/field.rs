//! Scalar fields on the spatial grid, space-time fields and masks.
//!
//! Extinction (`u = -inf`) is stored as a finite floor value. Any value at or
//! below the floor is read as extinct by every consumer in this crate.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Default floor standing in for `-inf`.
pub const DEFAULT_FLOOR: f64 = -50.0;

#[inline]
pub fn is_extinct(v: f64, floor: f64) -> bool {
    v <= floor
}

/// Values at the spatial nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.nx
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.nx] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid, values: grid.nodes().into_iter().map(f).collect() }
    }

    /// Largest `|u[i+1]-u[i]|/dx` over pairs of finite nodes.
    pub fn lipschitz(&self, floor: f64) -> f64 {
        let dx = self.grid.dx();
        self.values
            .windows(2)
            .filter(|w| !is_extinct(w[0], floor) && !is_extinct(w[1], floor))
            .map(|w| (w[1] - w[0]).abs() / dx)
            .fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn shifted(&self, by: f64) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| v + by).collect() }
    }
}

/// Row-major `(nt+1) x nx` array; row `k` is time `k*dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub floor: f64,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn filled(grid: Grid, floor: f64, value: f64) -> Self {
        SpaceTimeField { grid, floor, values: vec![value; (grid.nt + 1) * grid.nx] }
    }

    pub fn from_rows(grid: Grid, floor: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != grid.nt + 1 || rows.iter().any(|r| r.len() != grid.nx) {
            return Err(Error::GridMismatch("row layout does not match grid".into()));
        }
        Ok(SpaceTimeField { grid, floor, values: rows.concat() })
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.grid.nx + i]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, v: f64) {
        let nx = self.grid.nx;
        self.values[k * nx + i] = v;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[k * nx..(k + 1) * nx]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[k * nx..(k + 1) * nx]
    }

    pub fn set_row(&mut self, k: usize, row: &[f64]) {
        self.row_mut(k).copy_from_slice(row);
    }

    pub fn row_field(&self, k: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.row(k).to_vec() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn is_extinct_at(&self, k: usize, i: usize) -> bool {
        is_extinct(self.get(k, i), self.floor)
    }

    /// Pointwise map; the floor is re-applied to the output.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let floor = self.floor;
        SpaceTimeField {
            grid: self.grid,
            floor,
            values: self.values.iter().map(|&v| f(v).max(floor)).collect(),
        }
    }

    pub fn extinct_count(&self, k: usize) -> usize {
        self.row(k).iter().filter(|&&v| is_extinct(v, self.floor)).count()
    }
}

/// Boolean space-time set on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeMask {
    pub grid: Grid,
    flags: Vec<bool>,
}

impl SpaceTimeMask {
    pub fn filled(grid: Grid, value: bool) -> Self {
        SpaceTimeMask { grid, flags: vec![value; (grid.nt + 1) * grid.nx] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::filled(grid, false);
        for k in 0..=grid.nt {
            for i in 0..grid.nx {
                m.set(k, i, f(k, i));
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> bool {
        self.flags[k * self.grid.nx + i]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, v: bool) {
        let nx = self.grid.nx;
        self.flags[k * nx + i] = v;
    }

    pub fn row(&self, k: usize) -> &[bool] {
        let nx = self.grid.nx;
        &self.flags[k * nx..(k + 1) * nx]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }

    pub fn intersect(&self, other: &SpaceTimeMask) -> Result<Self> {
        self.check_same(other)?;
        Ok(SpaceTimeMask {
            grid: self.grid,
            flags: self.flags.iter().zip(&other.flags).map(|(a, b)| *a && *b).collect(),
        })
    }

    /// True when every flagged node of `self` is flagged in `other`.
    pub fn is_subset_of(&self, other: &SpaceTimeMask) -> bool {
        self.flags.iter().zip(&other.flags).all(|(a, b)| !*a || *b)
    }

    /// Number of nodes where the two masks differ.
    pub fn mismatch_count(&self, other: &SpaceTimeMask) -> usize {
        self.flags.iter().zip(&other.flags).filter(|(a, b)| a != b).count()
    }

    fn check_same(&self, other: &SpaceTimeMask) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("masks live on different grids".into()));
        }
        Ok(())
    }
}
