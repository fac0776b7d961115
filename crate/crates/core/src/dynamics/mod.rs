//! Phase space, potentials, noise and the BAOAB Langevin integrator.

mod integrator;
mod noise;
mod potential;
mod state;

pub use integrator::{baoab_step, sample_momenta, LangevinParams, LangevinStepper, Mass, BLOW_UP_BOUND};
pub use noise::NoiseStream;
pub use potential::{force, Potential};
pub use state::{PeriodicBox, PhaseState};

use serde::{Deserialize, Serialize};

/// Reference dynamics: potential, Langevin parameters and optional periodic box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub potential: Potential,
    pub params: LangevinParams,
    pub cell: Option<PeriodicBox>,
}

impl SystemSpec {
    pub fn new(potential: Potential, params: LangevinParams, cell: Option<PeriodicBox>) -> Self {
        Self {
            potential,
            params,
            cell,
        }
    }
}
