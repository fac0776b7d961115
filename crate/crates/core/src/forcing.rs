//! Forcing fields `F(q)`, conjugate responses `S` and response observables `R`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LangevinParams, PhaseState, Potential};

/// External forcing direction `F(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    /// Constant force on every coordinate of a one-dimensional system.
    Constant1D { value: f64 },
    /// Colored drift: particle `i` (0-based) is pushed along `±x` with
    /// alternating sign, normalized by `1/√N`.
    ColoredDrift { n_particles: usize },
    /// Transverse sinusoidal field `(sin(2π q_y / L_y), 0, 0)`.
    SinusoidalTransverse { box_y: f64 },
}

impl ForcingSpec {
    /// Writes `F(q)` into `out`.
    pub fn eval_into(&self, q: &[f64], out: &mut [f64]) {
        match *self {
            ForcingSpec::Constant1D { value } => out.fill(value),
            ForcingSpec::ColoredDrift { n_particles } => {
                let scale = 1.0 / (n_particles as f64).sqrt();
                for (i, f) in out.chunks_mut(3).enumerate() {
                    f[0] = if i % 2 == 0 { scale } else { -scale };
                    f[1] = 0.0;
                    f[2] = 0.0;
                }
            }
            ForcingSpec::SinusoidalTransverse { box_y } => {
                for (f, x) in out.chunks_mut(3).zip(q.chunks(3)) {
                    f[0] = (TAU * x[1] / box_y).sin();
                    f[1] = 0.0;
                    f[2] = 0.0;
                }
            }
        }
    }

    /// Component `i` of `F(q)`.
    #[inline]
    pub fn component(&self, q: &[f64], i: usize) -> f64 {
        match *self {
            ForcingSpec::Constant1D { value } => value,
            ForcingSpec::ColoredDrift { n_particles } => {
                if i % 3 != 0 {
                    0.0
                } else if (i / 3) % 2 == 0 {
                    1.0 / (n_particles as f64).sqrt()
                } else {
                    -1.0 / (n_particles as f64).sqrt()
                }
            }
            ForcingSpec::SinusoidalTransverse { box_y } => {
                if i % 3 != 0 {
                    0.0
                } else {
                    (TAU * q[i + 1] / box_y).sin()
                }
            }
        }
    }

    /// `F(q)ᵀ M⁻¹ p`.
    pub fn dot_velocity(&self, state: &PhaseState, params: &LangevinParams) -> f64 {
        match *self {
            ForcingSpec::Constant1D { value } => state
                .p
                .iter()
                .enumerate()
                .map(|(i, p)| value * p / params.mass.get(i))
                .sum(),
            _ => (0..state.dim())
                .step_by(3)
                .map(|i| self.component(&state.q, i) * state.p[i] / params.mass.get(i))
                .sum(),
        }
    }

    /// Net momentum injection is nonzero for odd particle counts.
    pub fn is_balanced(&self) -> bool {
        !matches!(self, ForcingSpec::ColoredDrift { n_particles } if n_particles % 2 == 1)
    }
}

/// `F(q)` as a vector.
pub fn eval_forcing(spec: &ForcingSpec, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    spec.eval_into(q, &mut out);
    out
}

/// Conjugate response `S(q, p) = β F(q)ᵀ M⁻¹ p`.
pub fn conjugate_response(spec: &ForcingSpec, params: &LangevinParams, state: &PhaseState) -> f64 {
    params.beta * spec.dot_velocity(state, params)
}

/// Nonequilibrium drive `ηF(q)` added to the force during evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub eta: f64,
    pub forcing: ForcingSpec,
}

impl Drive {
    pub fn new(eta: f64, forcing: ForcingSpec) -> Self {
        Self { eta, forcing }
    }

    /// `out += η F(q)`.
    pub fn add_force(&self, q: &[f64], out: &mut [f64]) {
        match self.forcing {
            ForcingSpec::Constant1D { value } => {
                let v = self.eta * value;
                out.iter_mut().for_each(|f| *f += v);
            }
            _ => {
                for i in (0..q.len()).step_by(3) {
                    out[i] += self.eta * self.forcing.component(q, i);
                }
            }
        }
    }
}

/// Response observable `R(q, p)`, mean zero under the equilibrium measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `F(q)ᵀ M⁻¹ p`.
    VelocityAlongF { forcing: ForcingSpec },
    /// `Im[(1/N) Σ (M⁻¹p)_{n,x} exp(2πi q_{n,y}/L_y)]`.
    ShearFourierIm { box_y: f64 },
    /// `(cos q − sin q) e^{βV(q)}` on the 2π torus.
    Test1D { beta: f64, potential: Potential },
}

impl Observable {
    pub fn eval(&self, state: &PhaseState, params: &LangevinParams) -> f64 {
        match self {
            Observable::VelocityAlongF { forcing } => forcing.dot_velocity(state, params),
            Observable::ShearFourierIm { box_y } => {
                let n = state.n_particles();
                let mut acc = 0.0;
                for k in 0..n {
                    let i = 3 * k;
                    acc += state.p[i] / params.mass.get(i) * (TAU * state.q[i + 1] / box_y).sin();
                }
                acc / n as f64
            }
            Observable::Test1D { beta, potential } => {
                let q = state.q[0];
                test_observable(q, *beta, potential)
            }
        }
    }
}

/// `(cos q − sin q) e^{βV(q)}`.
#[inline]
pub fn test_observable(q: f64, beta: f64, potential: &Potential) -> f64 {
    let (s, c) = q.sin_cos();
    (c - s) * (beta * potential.value_1d(q)).exp()
}

pub fn eval_observable(obs: &Observable, state: &PhaseState, params: &LangevinParams) -> f64 {
    obs.eval(state, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn unit() -> LangevinParams {
        LangevinParams::new(1.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn colored_drift_alternates_and_is_normalized() {
        let f = eval_forcing(&ForcingSpec::ColoredDrift { n_particles: 2 }, &[0.0; 6]);
        let want = [FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2, 0.0, 0.0];
        for (a, b) in f.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        for n in [2usize, 10, 1000] {
            let f = eval_forcing(&ForcingSpec::ColoredDrift { n_particles: n }, &vec![0.0; 3 * n]);
            let norm: f64 = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-14);
        }
        assert!(!ForcingSpec::ColoredDrift { n_particles: 3 }.is_balanced());
    }

    #[test]
    fn sinusoidal_profile() {
        let spec = ForcingSpec::SinusoidalTransverse { box_y: 8.0 };
        let f = eval_forcing(&spec, &[0.3, 0.0, 0.1, 5.0, 2.0, 0.0]);
        assert_eq!(f[0], 0.0);
        assert!((f[3] - 1.0).abs() < 1e-15);
        assert_eq!(&f[1..3], &[0.0, 0.0]);
        // only the y coordinate matters
        let g = eval_forcing(&spec, &[7.0, 2.0, 3.3, 0.0, 0.0, 0.0]);
        assert_eq!(g[0], f[3]);
    }

    #[test]
    fn conjugate_response_by_substitution() {
        let s = PhaseState::scalar(0.2, 0.0);
        assert_eq!(conjugate_response(&ForcingSpec::Constant1D { value: 1.0 }, &unit(), &s), 0.0);
        let s = PhaseState::scalar(0.2, 0.7);
        assert_eq!(conjugate_response(&ForcingSpec::Constant1D { value: 1.0 }, &unit(), &s), 0.7);
        let params = LangevinParams::new(2.0, 1.0, 1e-3).unwrap();
        let s = PhaseState::new(vec![0.0; 6], vec![3.0, 0.0, 0.0, 1.0, 0.0, 0.0], 3).unwrap();
        let value = conjugate_response(&ForcingSpec::ColoredDrift { n_particles: 2 }, &params, &s);
        assert!((value - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn observables_vanish_at_rest_and_are_odd_in_p() {
        let params = unit();
        let obs = [
            Observable::VelocityAlongF {
                forcing: ForcingSpec::ColoredDrift { n_particles: 2 },
            },
            Observable::ShearFourierIm { box_y: 5.0 },
        ];
        let q = vec![0.1, 1.2, 0.4, 3.0, 4.1, 2.2];
        let p = vec![0.3, -1.0, 2.0, -0.7, 0.5, 1.1];
        let minus_p: Vec<f64> = p.iter().map(|x| -x).collect();
        for o in &obs {
            let rest = PhaseState::new(q.clone(), vec![0.0; 6], 3).unwrap();
            assert_eq!(o.eval(&rest, &params), 0.0);
            let a = o.eval(&PhaseState::new(q.clone(), p.clone(), 3).unwrap(), &params);
            let b = o.eval(&PhaseState::new(q.clone(), minus_p.clone(), 3).unwrap(), &params);
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn shear_observable_unit_phase() {
        let params = unit();
        let s = PhaseState::new(vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], 3).unwrap();
        let r = Observable::ShearFourierIm { box_y: 4.0 }.eval(&s, &params);
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn test_observable_symmetry_zero() {
        let obs = Observable::Test1D {
            beta: 1.0,
            potential: Potential::Cosine1D { amplitude: 1.0 },
        };
        let r = obs.eval(&PhaseState::scalar(FRAC_PI_4, 0.3), &unit());
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn drive_adds_scaled_forcing() {
        let drive = Drive::new(0.5, ForcingSpec::SinusoidalTransverse { box_y: 4.0 });
        let mut out = vec![1.0; 3];
        drive.add_force(&[0.0, 1.0, 0.0], &mut out);
        assert_eq!(out, vec![1.5, 1.0, 1.0]);
    }
}
