//! Perturbation maps on initial conditions and synchronously coupled trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{LangevinParams, LangevinStepper, Mass, NoiseStream, PeriodicBox, PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::forcing::{Drive, ForcingSpec};

/// Deterministic map `Φ_η^α` from equilibrium to perturbed initial conditions.
///
/// Only momenta move: `p ↦ p + ηF(q)` for `α = 1`, and additionally
/// `− (η²/2) S(q, p) F(q)` for `α = 2`, with `S = βF(q)ᵀM⁻¹p` evaluated at
/// the input momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMap {
    order: u8,
    eta: f64,
    forcing: ForcingSpec,
    beta: f64,
    mass: Mass,
}

impl PerturbationMap {
    pub fn new(order: u8, eta: f64, forcing: ForcingSpec, params: &LangevinParams) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !eta.is_finite() {
            return Err(Error::invalid("eta", "must be finite"));
        }
        Ok(Self {
            order,
            eta,
            forcing,
            beta: params.beta,
            mass: params.mass.clone(),
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.forcing
    }

    /// Maps momenta in place; positions are only read.
    pub fn apply_in_place(&self, q: &[f64], p: &mut [f64]) {
        if self.eta == 0.0 {
            return;
        }
        let f: Vec<f64> = (0..q.len()).map(|i| self.forcing.component(q, i)).collect();
        let shift2 = if self.order == 2 {
            let s: f64 = self.beta
                * f.iter()
                    .zip(p.iter())
                    .enumerate()
                    .map(|(i, (fi, pi))| fi * pi / self.mass.get(i))
                    .sum::<f64>();
            0.5 * self.eta * self.eta * s
        } else {
            0.0
        };
        for (pi, fi) in p.iter_mut().zip(&f) {
            *pi += self.eta * fi - shift2 * fi;
        }
    }

    pub fn apply(&self, state: &PhaseState) -> PhaseState {
        let mut out = state.clone();
        self.apply_in_place(&state.q, &mut out.p);
        out
    }
}

/// Free function form of [`PerturbationMap::apply`].
pub fn apply_map(map: &PerturbationMap, state: &PhaseState) -> PhaseState {
    map.apply(state)
}

/// Several copies of the same dynamics driven by one shared noise stream.
///
/// Member 0 is the equilibrium reference; the others are perturbed copies.
/// Each step draws one Gaussian block and applies it to every member.
#[derive(Clone, Debug)]
pub struct SynchronousBundle {
    states: Vec<PhaseState>,
    steppers: Vec<LangevinStepper>,
    noise: NoiseStream,
    gaussians: Vec<f64>,
}

impl SynchronousBundle {
    pub fn new(reference: PhaseState, perturbed: Vec<PhaseState>, system: &SystemSpec, noise: NoiseStream) -> Result<Self> {
        let mut states = Vec::with_capacity(perturbed.len() + 1);
        states.push(reference);
        states.extend(perturbed);
        let drives = vec![None; states.len()];
        Self::with_drives(states, drives, system, noise)
    }

    /// Members evolved under their own (optional) constant-magnitude drive,
    /// still sharing every Gaussian increment.
    pub fn with_drives(
        states: Vec<PhaseState>,
        drives: Vec<Option<Drive>>,
        system: &SystemSpec,
        noise: NoiseStream,
    ) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::invalid("states", "need at least one member"));
        };
        if drives.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                actual: drives.len(),
            });
        }
        let d = first.dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        let steppers = states
            .iter()
            .zip(drives)
            .map(|(s, drive)| LangevinStepper::new(system, drive, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            states,
            steppers,
            noise,
            gaussians: vec![0.0; d],
        })
    }

    pub fn step(&mut self) -> Result<()> {
        self.noise.fill_standard_normal(&mut self.gaussians);
        for (k, (state, stepper)) in self.states.iter_mut().zip(&mut self.steppers).enumerate() {
            stepper.step_with_gaussians(state, &self.gaussians).map_err(|e| match e {
                Error::BlowUp { step } => Error::CoupledBlowUp {
                    member: if k == 0 { "equilibrium" } else { "transient" },
                    step,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn reference(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn perturbed(&self) -> &[PhaseState] {
        &self.states[1..]
    }

    pub fn members(&self) -> &[PhaseState] {
        &self.states
    }

    pub fn noise(&self) -> &NoiseStream {
        &self.noise
    }
}

/// Transient state `x` and equilibrium state `y` with synchronous noise.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    inner: SynchronousBundle,
}

impl CoupledPair {
    /// `x = Φ(y)`.
    pub fn from_map(y: PhaseState, map: &PerturbationMap, system: &SystemSpec, noise: NoiseStream) -> Result<Self> {
        let x = map.apply(&y);
        Self::from_states(x, y, system, noise)
    }

    pub fn from_states(x: PhaseState, y: PhaseState, system: &SystemSpec, noise: NoiseStream) -> Result<Self> {
        Ok(Self {
            inner: SynchronousBundle::new(y, vec![x], system, noise)?,
        })
    }

    pub fn x(&self) -> &PhaseState {
        &self.inner.perturbed()[0]
    }

    pub fn y(&self) -> &PhaseState {
        self.inner.reference()
    }

    /// One BAOAB step of both members with the same Gaussian vector.
    pub fn step(&mut self) -> Result<()> {
        self.inner.step()
    }

    pub fn noise(&self) -> &NoiseStream {
        self.inner.noise()
    }
}

pub fn coupled_step(pair: &mut CoupledPair) -> Result<()> {
    pair.step()
}

/// Euclidean distance of `(Δq, Δp)`, with per-axis minimum image for `Δq`
/// when a box is given.
pub fn coupling_distance(x: &PhaseState, y: &PhaseState, cell: Option<&PeriodicBox>) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.dim() {
        let mut dq = x.q[i] - y.q[i];
        if let Some(cell) = cell {
            dq = cell.minimum_image(dq, i % cell.dim());
        }
        let dp = x.p[i] - y.p[i];
        acc += dq * dq + dp * dp;
    }
    acc.sqrt()
}

/// Linear drift `b(x) = rate · x`, whose one-sided Lipschitz constant is `rate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDrift {
    pub rate: f64,
}

/// Outcome of [`contraction_test`].
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionFit {
    /// Least-squares slope of `log|X_t − Y_t|` against `t`.
    pub slope: f64,
    /// Set when the distance reached exactly zero; `slope` is then `−∞`.
    pub collapsed: bool,
    pub times: Vec<f64>,
    pub log_distances: Vec<f64>,
    /// `max_n (log d_n − log d_0 − B t_n)`; nonpositive up to rounding when
    /// the exponential decoupling bound holds.
    pub max_bound_excess: f64,
}

/// Runs a synchronously coupled pair of overdamped dynamics
/// `dX = b(X)dt + sqrt(2/β) dW` (β = 1) from `Y_0 ~ N(0,1)`, `X_0 = Y_0 + offset`
/// and fits the exponential rate of the coupling distance.
pub fn contraction_test(
    drift: LinearDrift,
    initial_offset: f64,
    t_max: f64,
    n_steps: usize,
    noise: &mut NoiseStream,
) -> Result<ContractionFit> {
    if n_steps == 0 || !(t_max > 0.0) {
        return Err(Error::invalid("contraction_test", "need t_max > 0 and at least one step"));
    }
    if initial_offset == 0.0 {
        return Err(Error::invalid("initial_offset", "must be nonzero"));
    }
    let dt = t_max / n_steps as f64;
    let sigma = (2.0 * dt).sqrt();
    let mut y = noise.standard_normal();
    let mut x = y + initial_offset;
    let d0 = (x - y).abs();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut logs = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    logs.push(d0.ln());
    let mut collapsed = false;
    let mut max_excess = 0.0f64;
    for n in 1..=n_steps {
        let g = noise.standard_normal();
        x += drift.rate * x * dt + sigma * g;
        y += drift.rate * y * dt + sigma * g;
        let d = (x - y).abs();
        if d == 0.0 {
            collapsed = true;
            break;
        }
        let t = n as f64 * dt;
        let l = d.ln();
        max_excess = max_excess.max(l - d0.ln() - drift.rate * t);
        times.push(t);
        logs.push(l);
    }
    let slope = if collapsed {
        f64::NEG_INFINITY
    } else {
        ols_slope(&times, &logs)
    };
    Ok(ContractionFit {
        slope,
        collapsed,
        times,
        log_distances: logs,
        max_bound_excess: max_excess,
    })
}

pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Potential;

    fn params() -> LangevinParams {
        LangevinParams::new(1.5, 1.0, 0.01).unwrap()
    }

    #[test]
    fn zero_eta_is_identity() {
        let s = PhaseState::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5], 3).unwrap();
        for order in [1, 2] {
            let map = PerturbationMap::new(order, 0.0, ForcingSpec::SinusoidalTransverse { box_y: 3.0 }, &params()).unwrap();
            assert_eq!(map.apply(&s), s);
        }
    }

    #[test]
    fn one_dimensional_maps() {
        let params = params();
        let (q, p, eta) = (0.4, 0.9, 0.1);
        let s = PhaseState::scalar(q, p);
        let f = ForcingSpec::Constant1D { value: 1.0 };
        let m1 = PerturbationMap::new(1, eta, f.clone(), &params).unwrap().apply(&s);
        assert_eq!(m1.q, vec![q]);
        assert!((m1.p[0] - (p + eta)).abs() < 1e-15);
        let m2 = PerturbationMap::new(2, eta, f, &params).unwrap().apply(&s);
        assert!((m2.p[0] - (p + eta - eta * eta * params.beta * p / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let err = PerturbationMap::new(3, 0.1, ForcingSpec::Constant1D { value: 1.0 }, &params()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedOrder(3)));
    }

    #[test]
    fn identical_members_stay_identical() {
        let system = SystemSpec::new(
            Potential::Cosine1D { amplitude: 1.0 },
            params(),
            Some(PeriodicBox::torus_1d()),
        );
        let y = PhaseState::scalar(1.0, 0.3);
        let mut pair = CoupledPair::from_states(y.clone(), y, &system, NoiseStream::new(1, 2)).unwrap();
        for _ in 0..500 {
            pair.step().unwrap();
        }
        assert_eq!(pair.x(), pair.y());
        assert_eq!(pair.noise().counter(), 2 * 500);
    }

    #[test]
    fn distances() {
        let a = PhaseState::scalar(1.0, 0.5);
        let b = PhaseState::scalar(0.0, 0.0);
        assert_eq!(coupling_distance(&a, &a, None), 0.0);
        assert!((coupling_distance(&a, &b, None) - 1.25f64.sqrt()).abs() < 1e-15);
        let cell = PeriodicBox::cubic(10.0, 1).unwrap();
        let c = PhaseState::scalar(9.75, 0.0);
        let d = PhaseState::scalar(0.25, 0.0);
        assert!((coupling_distance(&c, &d, Some(&cell)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn contraction_rates_for_linear_drifts() {
        for rate in [-1.0, 0.0, 1.0] {
            let fit = contraction_test(LinearDrift { rate }, 0.1, 5.0, 500, &mut NoiseStream::new(4, 0)).unwrap();
            assert!(!fit.collapsed);
            assert!((fit.slope - rate).abs() < 0.05, "rate {rate}: slope {}", fit.slope);
            assert!(fit.max_bound_excess < 1e-12);
        }
    }

    #[test]
    fn collapse_returns_sentinel() {
        // 1 + Bdt = 0 kills the difference in one step
        let fit = contraction_test(LinearDrift { rate: -100.0 }, 0.5, 1.0, 100, &mut NoiseStream::new(0, 0)).unwrap();
        assert!(fit.collapsed);
        assert_eq!(fit.slope, f64::NEG_INFINITY);
    }
}
