//! Uniform space-time grids on `[x_min, x_max] x [0, t_final]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid with `nx` space nodes and `nt` time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_final: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_final: f64, nt: usize) -> Result<Self> {
        let g = Grid { x_min, x_max, nx, t_final, nt };
        g.validate()?;
        Ok(g)
    }

    /// Checks the invariants; used after deserialization too.
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_min >= self.x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min ({}) must be below x_max ({})",
                self.x_min, self.x_max
            )));
        }
        if self.nx < 3 {
            return Err(Error::InvalidGrid(format!("nx = {} but at least 3 nodes are required", self.nx)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("t_final = {} must be positive", self.t_final)));
        }
        if self.nt < 1 {
            return Err(Error::InvalidGrid("nt must be at least 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `x`, clamped to the domain.
    pub fn nearest_node(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.dx()).round();
        s.clamp(0.0, (self.nx - 1) as f64) as usize
    }

    /// Index of the time row closest to `t`, clamped to `[0, nt]`.
    pub fn nearest_row(&self, t: f64) -> usize {
        let s = (t / self.dt()).round();
        s.clamp(0.0, self.nt as f64) as usize
    }

    /// Same spatial nodes, different time stepping.
    pub fn with_time(&self, t_final: f64, nt: usize) -> Result<Self> {
        Grid::new(self.x_min, self.x_max, self.nx, t_final, nt)
    }

    pub fn same_space(&self, other: &Grid) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.nx == other.nx
    }
}
