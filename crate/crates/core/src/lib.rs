//! Transport coefficients of Langevin particle systems by transient subtraction.
//!
//! A perturbed copy of an equilibrium configuration is evolved alongside the
//! unperturbed one with identical Brownian increments; the time-integrated
//! difference of a response observable, divided by the perturbation magnitude,
//! estimates the linear response with a variance that stays bounded as the
//! perturbation vanishes. Green–Kubo, TTCF and NEMD estimators are provided
//! for cross-validation, together with a deterministic finite-difference
//! oracle for the one-dimensional test system.
//!
//! Module map:
//! - [`dynamics`]: phase states, potentials, counter-based noise, BAOAB.
//! - [`lj`]: shifted-force Lennard–Jones fluid with cell lists.
//! - [`forcing`]: forcing fields, conjugate responses and observables.
//! - [`coupling`]: perturbation maps and synchronously coupled trajectories.
//! - [`estimators`]: all estimators, streaming statistics, variance tables.
//! - [`fd`]: finite-difference generator, Poisson solver and bias oracle.
//! - [`harness`]: run configuration, orchestration, outputs and manifests.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod fd;
pub mod forcing;
pub mod harness;
pub mod lj;

pub use coupling::{CoupledPair, PerturbationMap};
pub use dynamics::{
    LangevinParams, LangevinStepper, NoiseStream, PeriodicBox, PhaseState, Potential, SystemSpec,
};
pub use error::{Error, Result};
pub use estimators::EstimatorResult;
pub use forcing::{Drive, ForcingSpec, Observable};
pub use lj::LjParams;
