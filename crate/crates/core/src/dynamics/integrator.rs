use serde::{Deserialize, Serialize};

use super::noise::NoiseStream;
use super::state::PhaseState;
use super::SystemSpec;
use crate::error::{Error, Result};
use crate::forcing::Drive;

/// Any |q| or |p| above this aborts the trajectory.
pub const BLOW_UP_BOUND: f64 = 1e12;

/// Diagonal mass matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mass {
    Uniform(f64),
    Diagonal(Vec<f64>),
}

impl Mass {
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Mass::Uniform(m) => *m,
            Mass::Diagonal(m) => m[i],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Mass::Uniform(m) => m.is_finite() && *m > 0.0,
            Mass::Diagonal(m) => !m.is_empty() && m.iter().all(|x| x.is_finite() && *x > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("mass", "entries must be positive and finite"))
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Mass::Diagonal(m) if m.len() != d => Err(Error::DimensionMismatch {
                expected: d,
                actual: m.len(),
            }),
            _ => Ok(()),
        }
    }
}

impl Default for Mass {
    fn default() -> Self {
        Mass::Uniform(1.0)
    }
}

/// Inverse temperature, damping, mass matrix and timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    #[serde(default)]
    pub mass: Mass,
}

impl LangevinParams {
    /// Unit masses. A zero timestep is accepted and gives the identity step.
    pub fn new(beta: f64, gamma: f64, dt: f64) -> Result<Self> {
        Self::with_mass(beta, gamma, dt, Mass::Uniform(1.0))
    }

    pub fn with_mass(beta: f64, gamma: f64, dt: f64, mass: Mass) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::invalid("dt", format!("must be nonnegative, got {dt}")));
        }
        mass.validate()?;
        Ok(Self { beta, gamma, dt, mass })
    }

    /// `sqrt(2γ/β)`, the diffusion coefficient of the momentum equation.
    pub fn noise_amplitude(&self) -> f64 {
        (2.0 * self.gamma / self.beta).sqrt()
    }
}

/// BAOAB integrator for one trajectory.
///
/// Keeps the total force at the current positions between steps so that each
/// step costs one force evaluation. The optional [`Drive`] adds `ηF(q)` to
/// the force in both kicks (nonequilibrium dynamics); a drive with `η = 0` is
/// dropped so the stepper is then identical to the equilibrium one.
#[derive(Clone, Debug)]
pub struct LangevinStepper {
    system: SystemSpec,
    drive: Option<Drive>,
    inv_mass: Vec<f64>,
    ou_decay: Vec<f64>,
    ou_scale: Vec<f64>,
    force: Vec<f64>,
    potential_energy: f64,
    steps: u64,
    gaussians: Vec<f64>,
}

impl LangevinStepper {
    pub fn new(system: &SystemSpec, drive: Option<Drive>, state: &PhaseState) -> Result<Self> {
        let d = state.dim();
        let params = &system.params;
        params.mass.check_dim(d)?;
        if let Some(cell) = &system.cell {
            if cell.dim() != state.dim_per_particle() {
                return Err(Error::DimensionMismatch {
                    expected: state.dim_per_particle(),
                    actual: cell.dim(),
                });
            }
        }
        let drive = drive.filter(|dr| dr.eta != 0.0);
        let mut inv_mass = Vec::with_capacity(d);
        let mut ou_decay = Vec::with_capacity(d);
        let mut ou_scale = Vec::with_capacity(d);
        for i in 0..d {
            let m = params.mass.get(i);
            let c1 = (-params.gamma * params.dt / m).exp();
            inv_mass.push(1.0 / m);
            ou_decay.push(c1);
            ou_scale.push(((1.0 - c1 * c1) * m / params.beta).sqrt());
        }
        let mut stepper = Self {
            system: system.clone(),
            drive,
            inv_mass,
            ou_decay,
            ou_scale,
            force: vec![0.0; d],
            potential_energy: 0.0,
            steps: 0,
            gaussians: vec![0.0; d],
        };
        stepper.refresh(state)?;
        Ok(stepper)
    }

    /// Recomputes the cached force; required after positions change outside
    /// of [`step`](Self::step).
    pub fn refresh(&mut self, state: &PhaseState) -> Result<()> {
        self.potential_energy = self
            .system
            .potential
            .force_into(&state.q, self.system.cell.as_ref(), &mut self.force)?;
        if let Some(drive) = &self.drive {
            drive.add_force(&state.q, &mut self.force);
        }
        Ok(())
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    /// Potential energy at the current positions.
    pub fn potential_energy(&self) -> f64 {
        self.potential_energy
    }

    /// Total force (including the drive) at the current positions.
    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One step drawing `d` standard normals from `noise`.
    pub fn step(&mut self, state: &mut PhaseState, noise: &mut NoiseStream) -> Result<()> {
        let mut g = std::mem::take(&mut self.gaussians);
        noise.fill_standard_normal(&mut g);
        let out = self.step_with_gaussians(state, &g);
        self.gaussians = g;
        out
    }

    /// One step with prescribed Gaussians for the O substep.
    pub fn step_with_gaussians(&mut self, state: &mut PhaseState, gaussians: &[f64]) -> Result<()> {
        let d = state.dim();
        if gaussians.len() != d || self.force.len() != d {
            return Err(Error::DimensionMismatch {
                expected: self.force.len(),
                actual: gaussians.len().min(d),
            });
        }
        let half = 0.5 * self.system.params.dt;
        self.kick(state, half);
        self.drift(state, half);
        for i in 0..d {
            state.p[i] = self.ou_decay[i] * state.p[i] + self.ou_scale[i] * gaussians[i];
        }
        self.drift(state, half);
        self.steps += 1;
        self.refresh(state)?;
        self.kick(state, half);
        self.check_finite(state)
    }

    #[inline]
    fn kick(&self, state: &mut PhaseState, h: f64) {
        for (p, f) in state.p.iter_mut().zip(&self.force) {
            *p += h * f;
        }
    }

    #[inline]
    fn drift(&self, state: &mut PhaseState, h: f64) {
        for i in 0..state.q.len() {
            state.q[i] += h * self.inv_mass[i] * state.p[i];
        }
        if let Some(cell) = &self.system.cell {
            state.wrap_into(cell);
        }
    }

    fn check_finite(&self, state: &PhaseState) -> Result<()> {
        let ok = state
            .q
            .iter()
            .chain(&state.p)
            .all(|x| x.is_finite() && x.abs() <= BLOW_UP_BOUND);
        if ok {
            Ok(())
        } else {
            Err(Error::BlowUp { step: self.steps })
        }
    }

    /// Kinetic energy `p·M⁻¹p / 2`.
    pub fn kinetic_energy(&self, state: &PhaseState) -> f64 {
        0.5 * state
            .p
            .iter()
            .zip(&self.inv_mass)
            .map(|(p, im)| p * p * im)
            .sum::<f64>()
    }
}

/// Single BAOAB step from `state`, drawing Gaussians from `noise`.
///
/// Evaluates the force at the input positions; for long trajectories use a
/// [`LangevinStepper`], which caches it.
pub fn baoab_step(
    state: &PhaseState,
    system: &SystemSpec,
    drive: Option<&Drive>,
    noise: &mut NoiseStream,
) -> Result<PhaseState> {
    let mut next = state.clone();
    let mut stepper = LangevinStepper::new(system, drive.cloned(), state)?;
    stepper.step(&mut next, noise)?;
    Ok(next)
}

/// Momenta drawn from the Gibbs marginal: independent `N(0, m_i/β)`.
pub fn sample_momenta(params: &LangevinParams, noise: &mut NoiseStream, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| (params.mass.get(i) / params.beta).sqrt() * noise.standard_normal())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{PeriodicBox, Potential};

    fn harmonic_system(dt: f64) -> SystemSpec {
        SystemSpec::new(
            Potential::Harmonic { stiffness: 1.0 },
            LangevinParams::new(1.0, 1.0, dt).unwrap(),
            None,
        )
    }

    #[test]
    fn zero_timestep_is_identity() {
        let system = SystemSpec::new(Potential::Zero, LangevinParams::new(1.0, 1.0, 0.0).unwrap(), None);
        let s0 = PhaseState::new(vec![0.3, -1.2], vec![0.7, 2.0], 1).unwrap();
        let mut s = s0.clone();
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        stepper.step(&mut s, &mut NoiseStream::new(0, 0)).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn free_flight_with_zero_noise() {
        let (h, gamma, m) = (0.1, 0.7, 2.0);
        let params = LangevinParams::with_mass(1.0, gamma, h, Mass::Uniform(m)).unwrap();
        let system = SystemSpec::new(Potential::Zero, params, None);
        let (q0, p0) = (0.25, 1.5);
        let mut s = PhaseState::scalar(q0, p0);
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        stepper.step_with_gaussians(&mut s, &[0.0]).unwrap();
        let c1 = (-gamma * h / m).exp();
        assert_eq!(s.p[0], c1 * p0);
        // half drift with p0, half drift with the damped momentum
        let q_expected = q0 + 0.5 * h * p0 / m + 0.5 * h * (c1 * p0) / m;
        assert!((s.q[0] - q_expected).abs() < 1e-15);
    }

    #[test]
    fn harmonic_two_steps_match_hand_unrolled_substeps() {
        let dt = 0.01;
        let system = harmonic_system(dt);
        let mut s = PhaseState::scalar(1.0, 1.0);
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        stepper.step_with_gaussians(&mut s, &[0.5]).unwrap();
        stepper.step_with_gaussians(&mut s, &[-0.3]).unwrap();

        // independent straight-line transcription, k = m = γ = β = 1
        let c1 = f64::exp(-dt);
        let c2 = (1.0 - c1 * c1).sqrt();
        let (mut q, mut p) = (1.0f64, 1.0f64);
        for g in [0.5, -0.3] {
            p -= 0.5 * dt * q;
            q += 0.5 * dt * p;
            p = c1 * p + c2 * g;
            q += 0.5 * dt * p;
            p -= 0.5 * dt * q;
        }
        assert!((s.q[0] - q).abs() < 1e-15, "{} vs {}", s.q[0], q);
        assert!((s.p[0] - p).abs() < 1e-15, "{} vs {}", s.p[0], p);
    }

    #[test]
    fn zero_drive_is_bit_identical_to_equilibrium() {
        use crate::forcing::{Drive, ForcingSpec};
        let system = SystemSpec::new(
            Potential::Cosine1D { amplitude: 1.0 },
            LangevinParams::new(1.0, 1.0, 0.01).unwrap(),
            Some(PeriodicBox::torus_1d()),
        );
        let drive = Drive::new(0.0, ForcingSpec::Constant1D { value: 1.0 });
        let mut a = PhaseState::scalar(1.0, -0.4);
        let mut b = a.clone();
        let mut sa = LangevinStepper::new(&system, None, &a).unwrap();
        let mut sb = LangevinStepper::new(&system, Some(drive), &b).unwrap();
        let mut na = NoiseStream::new(9, 9);
        let mut nb = NoiseStream::new(9, 9);
        for _ in 0..1000 {
            sa.step(&mut a, &mut na).unwrap();
            sb.step(&mut b, &mut nb).unwrap();
        }
        assert_eq!(a.q[0].to_bits(), b.q[0].to_bits());
        assert_eq!(a.p[0].to_bits(), b.p[0].to_bits());
    }

    #[test]
    fn blow_up_is_reported_with_step_index() {
        let system = SystemSpec::new(
            Potential::Harmonic { stiffness: -1e6 },
            LangevinParams::new(1.0, 1.0, 0.1).unwrap(),
            None,
        );
        let mut s = PhaseState::scalar(1.0, 0.0);
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        let mut noise = NoiseStream::new(0, 0);
        let err = (0..1000)
            .find_map(|_| stepper.step(&mut s, &mut noise).err())
            .expect("trajectory must diverge");
        assert!(matches!(err, Error::BlowUp { step } if step > 0));
    }

    #[test]
    fn consumes_d_gaussians_per_step() {
        let system = SystemSpec::new(Potential::Zero, LangevinParams::new(1.0, 1.0, 0.01).unwrap(), None);
        let mut s = PhaseState::zeros(4, 1);
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        let mut noise = NoiseStream::new(0, 0);
        stepper.step(&mut s, &mut noise).unwrap();
        assert_eq!(noise.counter(), 2 * 4);
    }

    #[test]
    fn sampled_momenta_have_gibbs_variance() {
        for (beta, m, expected) in [(2.0, 1.0, 0.5), (1.0, 4.0, 4.0)] {
            let params = LangevinParams::with_mass(beta, 1.0, 0.01, Mass::Uniform(m)).unwrap();
            let mut noise = NoiseStream::new(5, 1);
            let p = sample_momenta(&params, &mut noise, 1_000_000);
            let var = p.iter().map(|x| x * x).sum::<f64>() / p.len() as f64;
            assert!((var / expected - 1.0).abs() < 0.01, "{var} vs {expected}");
        }
        let params = LangevinParams::new(1.0, 1.0, 0.01).unwrap();
        let a = sample_momenta(&params, &mut NoiseStream::at(1, 2, 3), 16);
        let b = sample_momenta(&params, &mut NoiseStream::at(1, 2, 3), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn harmonic_equilibrium_moments() {
        let system = harmonic_system(0.01);
        let mut s = PhaseState::scalar(0.0, 0.0);
        let mut stepper = LangevinStepper::new(&system, None, &s).unwrap();
        let mut noise = NoiseStream::new(2024, 0);
        for _ in 0..10_000 {
            stepper.step(&mut s, &mut noise).unwrap();
        }
        let n = 4_000_000;
        let (mut q2, mut p2) = (0.0, 0.0);
        for _ in 0..n {
            stepper.step(&mut s, &mut noise).unwrap();
            q2 += s.q[0] * s.q[0];
            p2 += s.p[0] * s.p[0];
        }
        let (q2, p2) = (q2 / n as f64, p2 / n as f64);
        assert!((q2 - 1.0).abs() < 0.03, "<q^2> = {q2}");
        assert!((p2 - 1.0).abs() < 0.03, "<p^2> = {p2}");
    }
}
