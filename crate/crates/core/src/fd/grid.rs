use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Tensor grid on `[−π, π) × [−p_max, p_max]`, periodic in `q`.
///
/// Flat index of node `(i, j)` (position `i`, momentum `j`) is `j·m_q + i`,
/// so `q` varies fastest and each fixed-momentum row is contiguous.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub m_q: usize,
    pub m_p: usize,
    pub p_max: f64,
}

impl Default for FdGrid {
    fn default() -> Self {
        Self {
            m_q: 200,
            m_p: 400,
            p_max: 5.0,
        }
    }
}

impl FdGrid {
    pub fn new(m_q: usize, m_p: usize, p_max: f64) -> Result<Self> {
        let g = Self { m_q, m_p, p_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_q < 3 {
            return Err(Error::invalid("m_q", "need at least 3 nodes"));
        }
        if self.m_p < 8 {
            return Err(Error::invalid("m_p", "need at least 8 nodes"));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::invalid("p_max", "must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m_q * self.m_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dq(&self) -> f64 {
        TAU / self.m_q as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / (self.m_p - 1) as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        -PI + i as f64 * self.dq()
    }

    /// Written so that `p(m_p − 1 − j) == −p(j)` exactly.
    pub fn p(&self, j: usize) -> f64 {
        let m = (self.m_p - 1) as f64;
        self.p_max * (2.0 * j as f64 - m) / m
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.m_q + i
    }

    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.m_q, k / self.m_q)
    }
}

/// Values on every node of an [`FdGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    grid: FdGrid,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: FdGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: FdGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: FdGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.m_p {
            let p = grid.p(j);
            for i in 0..grid.m_q {
                values.push(f(grid.q(i), p));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &FdGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Σ w·f` against a weight field on the same grid.
    pub fn integrate(&self, weights: &DiscreteField) -> f64 {
        self.values.iter().zip(&weights.values).map(|(f, w)| f * w).sum()
    }
}
