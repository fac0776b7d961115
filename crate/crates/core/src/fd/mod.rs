//! Deterministic finite-difference oracle for the one-dimensional Langevin
//! system on the torus: generator, Poisson solve, Green–Kubo reference and
//! the finite-`η` bias of the perturbation maps.

mod generator;
mod grid;
mod solver;

use serde::{Deserialize, Serialize};

pub use generator::{build_generator, gibbs_weights, CsrMatrix, DiscreteGenerator};
pub use grid::{DiscreteField, FdGrid};
pub use solver::BlockSystem;

use crate::coupling::ols_slope;
use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::forcing::test_observable;

/// Relative residual accepted from the Poisson solve.
pub const POISSON_TOLERANCE: f64 = 1e-8;

/// Solution `𝓡` of `−L𝓡 = R − c` with `⟨𝓡⟩_w = 0`.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: DiscreteField,
    /// Constant removed from the right-hand side to make it consistent;
    /// the mean of `R` under the discrete invariant measure.
    pub projected_mean: f64,
    /// `‖L𝓡 + R − c‖_∞ / ‖R‖_∞`.
    pub relative_residual: f64,
}

/// Solves `−L𝓡 = R − c` on the kernel-free subspace.
///
/// The generator has a one-dimensional kernel (constants). One row is
/// replaced by a pinning condition, the system is solved for `R` and for
/// the constant field, and the combination that satisfies the dropped row
/// is kept; this fixes `c` as the mean of `R` under the left null vector.
/// The result is finally shifted to have zero Gibbs mean.
pub fn solve_poisson(l: &DiscreteGenerator, r: &DiscreteField, weights: &DiscreteField) -> Result<PoissonSolution> {
    let grid = *l.grid();
    if r.grid() != &grid || weights.grid() != &grid {
        return Err(Error::invalid("field", "grid differs from the generator grid"));
    }
    let scale = r.max_abs();
    if scale == 0.0 {
        return Ok(PoissonSolution {
            field: DiscreteField::zeros(grid),
            projected_mean: 0.0,
            relative_residual: 0.0,
        });
    }
    let a = l.matrix();
    let neg = negate(a);
    let mut sys = BlockSystem::from_csr(&neg, grid.m_q)?;
    let pin = (3 * grid.m_q..grid.len() - 4 * grid.m_q)
        .max_by(|&x, &y| weights.values()[x].total_cmp(&weights.values()[y]))
        .expect("grid has interior blocks");
    sys.pin(pin)?;
    let mut rhs_r = r.values().to_vec();
    let mut rhs_1 = vec![1.0; grid.len()];
    rhs_r[pin] = 0.0;
    rhs_1[pin] = 0.0;
    let rhs = [rhs_r, rhs_1];
    let mut sols = sys.solve(&rhs)?;
    let mut attempt = 0;
    loop {
        let (x, x1) = (&sols[0], &sols[1]);
        let rho = -a.row_dot(pin, x) - r.values()[pin];
        let rho1 = -a.row_dot(pin, x1) - 1.0;
        let c = rho / rho1;
        let mut sol: Vec<f64> = x.iter().zip(x1).map(|(u, v)| u - c * v).collect();
        let mean: f64 = sol.iter().zip(weights.values()).map(|(s, w)| s * w).sum();
        sol.iter_mut().for_each(|s| *s -= mean);
        let lsol = a.apply(&sol);
        let residual = lsol
            .iter()
            .zip(r.values())
            .map(|(ls, rv)| (ls + rv - c).abs())
            .fold(0.0, f64::max)
            / scale;
        if residual < POISSON_TOLERANCE {
            return Ok(PoissonSolution {
                field: DiscreteField::new(grid, sol)?,
                projected_mean: c,
                relative_residual: residual,
            });
        }
        if attempt == MAX_REFINEMENTS {
            return Err(Error::Solver {
                residual,
                tolerance: POISSON_TOLERANCE,
            });
        }
        attempt += 1;
        // iterative refinement on the pinned system
        let defects: Vec<Vec<f64>> = sols
            .iter()
            .zip(&rhs)
            .map(|(x, b)| {
                let mut d: Vec<f64> = a.apply(x).iter().zip(b).map(|(ax, bv)| bv + ax).collect();
                d[pin] = b[pin] - x[pin];
                d
            })
            .collect();
        let corrections = sys.solve(&defects)?;
        for (x, dx) in sols.iter_mut().zip(&corrections) {
            x.iter_mut().zip(dx).for_each(|(u, v)| *u += v);
        }
    }
}

const MAX_REFINEMENTS: usize = 3;

fn negate(a: &CsrMatrix) -> CsrMatrix {
    let mut m = a.clone();
    m.scale(-1.0);
    m
}

/// `⟨𝓡 S⟩_w`.
pub fn reference_transport(solution: &DiscreteField, conjugate: &DiscreteField, weights: &DiscreteField) -> f64 {
    solution
        .values()
        .iter()
        .zip(conjugate.values())
        .zip(weights.values())
        .map(|((r, s), w)| r * s * w)
        .sum()
}

/// Parameters of the one-dimensional test system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneDimSystem {
    pub potential: Potential,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for OneDimSystem {
    fn default() -> Self {
        Self {
            potential: Potential::Cosine1D { amplitude: 1.0 },
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Everything needed to evaluate the bias for the unit forcing `F = 1` with
/// conjugate `S = βp` and response `R = (cos q − sin q)e^{βV(q)}`.
#[derive(Clone, Debug)]
pub struct FdOracle {
    pub system: OneDimSystem,
    pub grid: FdGrid,
    pub weights: DiscreteField,
    pub solution: PoissonSolution,
}

impl FdOracle {
    pub fn new(system: OneDimSystem, grid: FdGrid) -> Result<Self> {
        if !(system.beta > 0.0) || !(system.gamma > 0.0) {
            return Err(Error::invalid("system", "beta and gamma must be positive"));
        }
        let l = build_generator(&system.potential, system.beta, system.gamma, grid)?;
        let weights = gibbs_weights(&system.potential, system.beta, grid);
        let r = DiscreteField::from_fn(grid, |q, _| test_observable(q, system.beta, &system.potential));
        let solution = solve_poisson(&l, &r, &weights)?;
        Ok(Self {
            system,
            grid,
            weights,
            solution,
        })
    }

    pub fn conjugate(&self) -> DiscreteField {
        let beta = self.system.beta;
        DiscreteField::from_fn(self.grid, |_, p| beta * p)
    }

    /// `∫(−L⁻¹R)S dμ`.
    pub fn reference_transport(&self) -> f64 {
        reference_transport(&self.solution.field, &self.conjugate(), &self.weights)
    }

    /// `|(1/η)⟨𝓡∘Φ_η^α⟩_w − ⟨𝓡 S⟩_w|`; at `η = 0` the first term is the
    /// directional derivative `⟨∂_p𝓡⟩_w`.
    pub fn bias(&self, order: u8, eta: f64) -> Result<f64> {
        if order != 1 && order != 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let g = &self.grid;
        let beta = self.system.beta;
        let limit = g.dp() * g.m_p as f64;
        let shift = eta.abs() * (1.0 + beta * g.p_max * eta.abs() / 2.0);
        if shift >= limit {
            return Err(Error::MapExitsDomain { shift, limit });
        }
        let f = self.solution.field.values();
        let w = self.weights.values();
        let mut first = 0.0;
        for j in 0..g.m_p {
            let p = g.p(j);
            let mapped = if order == 1 {
                p + eta
            } else {
                p + eta - 0.5 * eta * eta * beta * p
            };
            for i in 0..g.m_q {
                let k = g.index(i, j);
                let v = if eta == 0.0 {
                    self.derivative_p(i, j)
                } else {
                    (self.interpolate_p(i, mapped) - f[k]) / eta
                };
                first += w[k] * v;
            }
        }
        let second = self.reference_transport();
        Ok((first - second).abs())
    }

    /// Cubic Lagrange interpolation in `p` at fixed node `i`; outside the
    /// grid the boundary cubic is extrapolated.
    pub fn interpolate_p(&self, i: usize, p: f64) -> f64 {
        let g = &self.grid;
        let s = (p + g.p_max) / g.dp();
        let base = (s.floor() as isize - 1).clamp(0, g.m_p as isize - 4) as usize;
        let t = s - base as f64;
        let f = |j: usize| self.solution.field.at(i, base + j);
        let (f0, f1, f2, f3) = (f(0), f(1), f(2), f(3));
        // nodes at t = 0, 1, 2, 3
        -f0 * (t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0 + f1 * t * (t - 2.0) * (t - 3.0) / 2.0
            - f2 * t * (t - 1.0) * (t - 3.0) / 2.0
            + f3 * t * (t - 1.0) * (t - 2.0) / 6.0
    }

    /// Right derivative of the interpolant at node `(i, j)`, the `η → 0⁺`
    /// limit of the difference quotient used in [`bias`](Self::bias).
    fn derivative_p(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let base = (j as isize - 1).clamp(0, g.m_p as isize - 4) as usize;
        let t = (j - base) as f64;
        let f = |k: usize| self.solution.field.at(i, base + k);
        // d/dt of the cubic through t = 0..3
        let d0 = -((t - 2.0) * (t - 3.0) + (t - 1.0) * (t - 3.0) + (t - 1.0) * (t - 2.0)) / 6.0;
        let d1 = ((t - 2.0) * (t - 3.0) + t * (t - 3.0) + t * (t - 2.0)) / 2.0;
        let d2 = -((t - 1.0) * (t - 3.0) + t * (t - 3.0) + t * (t - 1.0)) / 2.0;
        let d3 = ((t - 1.0) * (t - 2.0) + t * (t - 2.0) + t * (t - 1.0)) / 6.0;
        (d0 * f(0) + d1 * f(1) + d2 * f(2) + d3 * f(3)) / g.dp()
    }

    /// Bias at `η = 0.01·2^j`, `j = 0..n`, for both map orders.
    pub fn sweep(&self, etas: &[f64]) -> Result<BiasSweep> {
        let mut rows = Vec::with_capacity(etas.len());
        for &eta in etas {
            rows.push(BiasRow {
                eta,
                bias_alpha1: self.bias(1, eta)?,
                bias_alpha2: self.bias(2, eta)?,
            });
        }
        let fit = |sel: fn(&BiasRow) -> f64| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.eta > 0.0 && sel(r) > 0.0)
                .map(|r| (r.eta.ln(), sel(r).ln()))
                .unzip();
            if x.len() < 2 {
                f64::NAN
            } else {
                ols_slope(&x, &y)
            }
        };
        let slope_alpha1 = fit(|r| r.bias_alpha1);
        let slope_alpha2 = fit(|r| r.bias_alpha2);
        Ok(BiasSweep {
            rows,
            slope_alpha1,
            slope_alpha2,
            reference_transport: self.reference_transport(),
        })
    }
}

/// Default sweep `η ∈ {0.01·2^j : j = 0..5}`.
pub fn default_etas() -> Vec<f64> {
    (0..6).map(|j| 0.01 * f64::powi(2.0, j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub eta: f64,
    pub bias_alpha1: f64,
    pub bias_alpha2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasSweep {
    pub rows: Vec<BiasRow>,
    pub slope_alpha1: f64,
    pub slope_alpha2: f64,
    pub reference_transport: f64,
}

impl BiasSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,bias_alpha1,bias_alpha2\n");
        for r in &self.rows {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.eta, r.bias_alpha1, r.bias_alpha2));
        }
        out
    }
}
