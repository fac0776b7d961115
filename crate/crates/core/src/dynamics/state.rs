use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthorhombic periodic box, one length per spatial axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBox {
    lengths: Vec<f64>,
}

impl PeriodicBox {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::invalid("box", "at least one axis is required"));
        }
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid("box", format!("lengths must be positive, got {lengths:?}")));
        }
        Ok(Self { lengths })
    }

    pub fn cubic(length: f64, dim: usize) -> Result<Self> {
        Self::new(vec![length; dim])
    }

    /// The 2π torus used by the one-dimensional test system.
    pub fn torus_1d() -> Self {
        Self {
            lengths: vec![std::f64::consts::TAU],
        }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Maps `x` into `[0, L_axis)`.
    #[inline]
    pub fn wrap(&self, x: f64, axis: usize) -> f64 {
        let l = self.lengths[axis];
        let w = x - l * (x / l).floor();
        // floor can leave w == l after rounding for tiny negative x
        if w >= l {
            0.0
        } else {
            w
        }
    }

    /// Minimum-image displacement along `axis`.
    #[inline]
    pub fn minimum_image(&self, dx: f64, axis: usize) -> f64 {
        let l = self.lengths[axis];
        dx - l * (dx / l).round()
    }
}

/// Positions and momenta of `n_particles` particles in `dim_per_particle`
/// dimensions, stored particle-major (`q[i * dim + axis]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    dim_per_particle: usize,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, dim_per_particle: usize) -> Result<Self> {
        if dim_per_particle == 0 {
            return Err(Error::invalid("dim_per_particle", "must be positive"));
        }
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        if q.len() % dim_per_particle != 0 {
            return Err(Error::invalid(
                "q",
                format!("length {} is not a multiple of {dim_per_particle}", q.len()),
            ));
        }
        Ok(Self {
            q,
            p,
            dim_per_particle,
        })
    }

    /// Single particle in one dimension.
    pub fn scalar(q: f64, p: f64) -> Self {
        Self {
            q: vec![q],
            p: vec![p],
            dim_per_particle: 1,
        }
    }

    pub fn zeros(n_particles: usize, dim_per_particle: usize) -> Self {
        let d = n_particles * dim_per_particle;
        Self {
            q: vec![0.0; d],
            p: vec![0.0; d],
            dim_per_particle,
        }
    }

    /// Total number of degrees of freedom `d`.
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn dim_per_particle(&self) -> usize {
        self.dim_per_particle
    }

    pub fn n_particles(&self) -> usize {
        self.q.len() / self.dim_per_particle
    }

    pub fn wrap_into(&mut self, cell: &PeriodicBox) {
        let dim = cell.dim();
        for (i, x) in self.q.iter_mut().enumerate() {
            *x = cell.wrap(*x, i % dim);
        }
    }

    /// Whether every position component lies in `[0, L_axis)`.
    pub fn is_wrapped(&self, cell: &PeriodicBox) -> bool {
        let dim = cell.dim();
        self.q
            .iter()
            .enumerate()
            .all(|(i, x)| *x >= 0.0 && *x < cell.length(i % dim))
    }
}
