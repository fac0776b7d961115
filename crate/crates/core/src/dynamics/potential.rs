use serde::{Deserialize, Serialize};

use super::state::PeriodicBox;
use crate::error::{Error, Result};
use crate::lj::{self, LjParams};

/// Potential energy `V(q)`.
///
/// `Harmonic` and `Cosine1D` act coordinate-wise (`Σ k q_i²/2`, `Σ a cos q_i`);
/// `LennardJones` is the pairwise shifted-force fluid in three dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    Harmonic { stiffness: f64 },
    Cosine1D { amplitude: f64 },
    LennardJones(LjParams),
}

impl Potential {
    pub fn energy(&self, q: &[f64], cell: Option<&PeriodicBox>) -> Result<f64> {
        match self {
            Potential::Zero => Ok(0.0),
            Potential::Harmonic { stiffness } => {
                Ok(0.5 * stiffness * q.iter().map(|x| x * x).sum::<f64>())
            }
            Potential::Cosine1D { amplitude } => Ok(amplitude * q.iter().map(|x| x.cos()).sum::<f64>()),
            Potential::LennardJones(params) => {
                let mut scratch = vec![0.0; q.len()];
                lj::lj_forces_auto(q, require_box(cell)?, params, &mut scratch)
            }
        }
    }

    /// Writes `−∇V(q)` into `out` and returns `V(q)`.
    pub fn force_into(&self, q: &[f64], cell: Option<&PeriodicBox>, out: &mut [f64]) -> Result<f64> {
        if out.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: out.len(),
            });
        }
        match self {
            Potential::Zero => {
                out.fill(0.0);
                Ok(0.0)
            }
            Potential::Harmonic { stiffness } => {
                let mut e = 0.0;
                for (f, x) in out.iter_mut().zip(q) {
                    *f = -stiffness * x;
                    e += x * x;
                }
                Ok(0.5 * stiffness * e)
            }
            Potential::Cosine1D { amplitude } => {
                let mut e = 0.0;
                for (f, x) in out.iter_mut().zip(q) {
                    let (s, c) = x.sin_cos();
                    *f = amplitude * s;
                    e += c;
                }
                Ok(amplitude * e)
            }
            Potential::LennardJones(params) => lj::lj_forces_auto(q, require_box(cell)?, params, out),
        }
    }

    /// First derivative of a one-dimensional potential.
    pub fn derivative_1d(&self, q: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { stiffness } => stiffness * q,
            Potential::Cosine1D { amplitude } => -amplitude * q.sin(),
            Potential::LennardJones(_) => f64::NAN,
        }
    }

    pub fn value_1d(&self, q: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { stiffness } => 0.5 * stiffness * q * q,
            Potential::Cosine1D { amplitude } => amplitude * q.cos(),
            Potential::LennardJones(_) => f64::NAN,
        }
    }
}

fn require_box(cell: Option<&PeriodicBox>) -> Result<&PeriodicBox> {
    cell.ok_or_else(|| Error::invalid("box", "the Lennard-Jones potential needs a periodic box"))
}

/// `−∇V(q)`.
pub fn force(potential: &Potential, q: &[f64], cell: Option<&PeriodicBox>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; q.len()];
    potential.force_into(q, cell, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NoiseStream;

    fn fd_gradient_check(potential: &Potential, q: &[f64], cell: Option<&PeriodicBox>) -> f64 {
        let f = force(potential, q, cell).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..q.len() {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[i] += h;
            qm[i] -= h;
            let grad = (potential.energy(&qp, cell).unwrap() - potential.energy(&qm, cell).unwrap()) / (2.0 * h);
            let err = (grad + f[i]).abs() / (1.0 + f[i].abs());
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn zero_potential_has_zero_force() {
        assert_eq!(force(&Potential::Zero, &[1.0, -2.0, 3.0], None).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn harmonic_force_is_minus_q() {
        let f = force(&Potential::Harmonic { stiffness: 1.0 }, &[1.0], None).unwrap();
        assert_eq!(f, vec![-1.0]);
    }

    #[test]
    fn lj_without_box_is_rejected() {
        let lj = Potential::LennardJones(LjParams::default());
        assert!(force(&lj, &[0.0; 6], None).is_err());
    }

    #[test]
    fn gradient_consistency_for_smooth_potentials() {
        let mut noise = NoiseStream::new(3, 0);
        for potential in [
            Potential::Zero,
            Potential::Harmonic { stiffness: 2.5 },
            Potential::Cosine1D { amplitude: 1.3 },
        ] {
            for _ in 0..100 {
                let q: Vec<f64> = (0..4).map(|_| 3.0 * noise.standard_normal()).collect();
                let err = fd_gradient_check(&potential, &q, None);
                assert!(err < 1e-6, "{potential:?}: {err}");
            }
        }
    }
}
