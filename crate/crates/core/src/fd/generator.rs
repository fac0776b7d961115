use crate::dynamics::Potential;
use crate::error::Result;

use super::grid::{DiscreteField, FdGrid};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    #[cfg(test)]
    pub(crate) fn from_dense(a: &[f64], n: usize) -> Self {
        let mut row_ptr = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for r in 0..n {
            for c in 0..n {
                if a[r * n + c] != 0.0 {
                    cols.push(c);
                    vals.push(a[r * n + c]);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn scale(&mut self, factor: f64) {
        self.vals.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row_dot(r, x)).collect()
    }
}

/// Finite-difference Langevin generator (unit mass)
/// `L = p∂_q − V′(q)∂_p − γp∂_p + (γ/β)∂²_p`.
///
/// Transport in `q` uses second-order upwind differences (periodic); a
/// centered stencil would leave the checkerboard mode `(−1)^i` in the
/// kernel since nothing else couples neighbouring `q` nodes. Momentum
/// derivatives are centered, with one-sided second-order stencils on the
/// two boundary rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteGenerator {
    grid: FdGrid,
    matrix: CsrMatrix,
}

impl DiscreteGenerator {
    pub fn grid(&self) -> &FdGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, f: &DiscreteField) -> DiscreteField {
        DiscreteField::new(self.grid, self.matrix.apply(f.values())).expect("same grid")
    }
}

pub fn build_generator(potential: &Potential, beta: f64, gamma: f64, grid: FdGrid) -> Result<DiscreteGenerator> {
    grid.validate()?;
    let (mq, mp) = (grid.m_q, grid.m_p);
    let (dq, dp) = (grid.dq(), grid.dp());
    let diff = gamma / beta;
    let n = grid.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(7 * n);
    let mut vals = Vec::with_capacity(7 * n);
    row_ptr.push(0);
    let dv: Vec<f64> = (0..mq).map(|i| potential.derivative_1d(grid.q(i))).collect();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(8);
    for j in 0..mp {
        let p = grid.p(j);
        for i in 0..mq {
            entries.clear();
            let adv = p / (2.0 * dq);
            if p >= 0.0 {
                entries.push((grid.index(i, j), 3.0 * adv));
                entries.push((grid.index((i + mq - 1) % mq, j), -4.0 * adv));
                entries.push((grid.index((i + mq - 2) % mq, j), adv));
            } else {
                entries.push((grid.index(i, j), -3.0 * adv));
                entries.push((grid.index((i + 1) % mq, j), 4.0 * adv));
                entries.push((grid.index((i + 2) % mq, j), -adv));
            }
            let drift = -dv[i] - gamma * p;
            // (offset, d/dp coefficient, d²/dp² coefficient) before scaling
            let stencil: &[(isize, f64, f64)] = if j == 0 {
                &[(0, -3.0, 2.0), (1, 4.0, -5.0), (2, -1.0, 4.0), (3, 0.0, -1.0)]
            } else if j == mp - 1 {
                &[(0, 3.0, 2.0), (-1, -4.0, -5.0), (-2, 1.0, 4.0), (-3, 0.0, -1.0)]
            } else {
                &[(-1, -1.0, 1.0), (0, 0.0, -2.0), (1, 1.0, 1.0)]
            };
            for &(off, d1, d2) in stencil {
                let jj = (j as isize + off) as usize;
                let v = drift * d1 / (2.0 * dp) + diff * d2 / (dp * dp);
                entries.push((grid.index(i, jj), v));
            }
            entries.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in &entries {
                if c == last {
                    *vals.last_mut().expect("nonempty") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = c;
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(DiscreteGenerator {
        grid,
        matrix: CsrMatrix { n, row_ptr, cols, vals },
    })
}

/// Normalized Gibbs quadrature weights `∝ e^{−β(V(q)+p²/2)}ΔqΔp`, halved on
/// the momentum boundary rows (trapezoid in `p`).
pub fn gibbs_weights(potential: &Potential, beta: f64, grid: FdGrid) -> DiscreteField {
    let vmin = (0..grid.m_q)
        .map(|i| potential.value_1d(grid.q(i)))
        .fold(f64::INFINITY, f64::min);
    let cell = grid.dq() * grid.dp();
    let mut w = DiscreteField::from_fn(grid, |q, p| {
        (-beta * (potential.value_1d(q) - vmin + 0.5 * p * p)).exp() * cell
    });
    let mq = grid.m_q;
    let n = grid.len();
    for x in w.values_mut()[..mq].iter_mut() {
        *x *= 0.5;
    }
    for x in w.values_mut()[n - mq..].iter_mut() {
        *x *= 0.5;
    }
    let total: f64 = w.values().iter().sum();
    for x in w.values_mut() {
        *x /= total;
    }
    w
}
