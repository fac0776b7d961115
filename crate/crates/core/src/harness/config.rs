use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::dynamics::{LangevinParams, PeriodicBox, Potential};
use crate::error::{Error, Result};
use crate::fd::{default_etas, FdGrid, OneDimSystem};
use crate::forcing::{ForcingSpec, Observable};
use crate::lj::{box_side, LjParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Mobility,
    Shear,
    Bias1d,
    Gk1d,
    Ttcf1d,
    Custom,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mobility => "mobility",
            Mode::Shear => "shear",
            Mode::Bias1d => "bias1d",
            Mode::Gk1d => "gk1d",
            Mode::Ttcf1d => "ttcf1d",
            Mode::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mobility" => Ok(Mode::Mobility),
            "shear" => Ok(Mode::Shear),
            "bias1d" => Ok(Mode::Bias1d),
            "gk1d" => Ok(Mode::Gk1d),
            "ttcf1d" => Ok(Mode::Ttcf1d),
            "custom" => Ok(Mode::Custom),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }

    /// Lennard–Jones transient-subtraction modes.
    pub fn is_fluid(self) -> bool {
        matches!(self, Mode::Mobility | Mode::Shear | Mode::Custom)
    }
}

fn scalar_or_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

/// Complete description of a run. Every field has a per-mode default, so a
/// config file only needs `mode` plus the values it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Forcing magnitudes; a scalar or a list. All values share the
    /// equilibrium trajectory of each realization.
    #[serde(deserialize_with = "scalar_or_list")]
    pub eta: Vec<f64>,
    pub alpha: u8,
    /// Final time `T` of each trajectory.
    #[serde(rename = "T")]
    pub t_final: f64,
    pub t_therm: f64,
    pub dt: f64,
    /// Number of realizations `K`.
    #[serde(rename = "K")]
    pub realizations: u64,
    /// Number of particles `N`.
    #[serde(rename = "N")]
    pub n_particles: usize,
    pub density: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lj: LjParams,
    pub master_seed: u64,
    /// First stream id; realization `k` uses stream `first_stream + k`.
    pub first_stream: u64,
    /// Observables are recorded every `stride` steps.
    pub stride: u64,
    pub output_dir: PathBuf,
    /// Times at which the variance table is reported.
    pub report_times: Vec<f64>,
    /// Forcing and observable for `custom` mode.
    pub forcing: Option<ForcingSpec>,
    pub observable: Option<Observable>,
    /// One-dimensional system: `V(q) = amplitude·cos q`.
    pub amplitude: f64,
    pub grid: FdGrid,
    /// Constant added to the response in `ttcf1d` mode.
    pub response_offset: f64,
    /// Length and burn-in of the steady-state run used for recentering.
    pub nemd_time: f64,
    pub nemd_burn_in: f64,
    pub nemd_batches: usize,
    pub pilot_realizations: u64,
}

impl RunConfig {
    /// Parameter set of the reference simulations for each mode.
    pub fn defaults_for(mode: Mode) -> Self {
        let fluid = RunConfig {
            mode,
            eta: vec![0.01, 0.1, 1.0],
            alpha: 1,
            t_final: 3.5,
            t_therm: 1.0,
            dt: 1e-3,
            realizations: 100_000,
            n_particles: 1000,
            density: 0.7,
            beta: 1.25,
            gamma: 1.0,
            lj: LjParams::default(),
            master_seed: 0,
            first_stream: 0,
            stride: 1,
            output_dir: PathBuf::from(format!("out/{}", mode.name())),
            report_times: vec![1.0, 2.0],
            forcing: None,
            observable: None,
            amplitude: 1.0,
            grid: FdGrid::default(),
            response_offset: 0.0,
            nemd_time: 2000.0,
            nemd_burn_in: 20.0,
            nemd_batches: 40,
            pilot_realizations: 100,
        };
        match mode {
            Mode::Shear | Mode::Custom => RunConfig {
                report_times: vec![2.0, 3.5],
                ..fluid
            },
            Mode::Mobility => RunConfig {
                t_final: 2.0,
                beta: 0.8,
                density: 0.6,
                report_times: vec![1.0, 2.0],
                ..fluid
            },
            Mode::Bias1d | Mode::Gk1d | Mode::Ttcf1d => RunConfig {
                eta: if mode == Mode::Bias1d { default_etas() } else { vec![0.1] },
                t_final: 20.0,
                t_therm: 0.0,
                dt: 0.01,
                realizations: 5000,
                n_particles: 1,
                beta: 1.0,
                gamma: 1.0,
                report_times: vec![],
                ..fluid
            },
        }
    }

    /// Reads TOML or JSON (chosen by extension, `.json` for JSON). A run
    /// manifest is accepted too, in which case its config snapshot is used.
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut value: serde_json::Value = if is_json {
            serde_json::from_str(&text)?
        } else {
            let t: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            serde_json::to_value(t)?
        };
        if let Some(cfg) = value.get("config").cloned() {
            value = cfg;
        }
        Self::from_value(value, overrides)
    }

    /// Defaults for `mode` with `KEY=VALUE` overrides applied.
    pub fn from_mode(mode: Mode, overrides: &[(String, String)]) -> Result<Self> {
        Self::from_value(serde_json::json!({ "mode": mode }), overrides)
    }

    fn from_value(mut value: serde_json::Value, overrides: &[(String, String)]) -> Result<Self> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Config("config must be a table".into()))?;
        for (k, v) in overrides {
            obj.insert(k.clone(), parse_override(v)?);
        }
        let mode = match obj.get("mode") {
            Some(m) => serde_json::from_value::<Mode>(m.clone()).map_err(|_| Error::UnknownMode(m.to_string()))?,
            None => return Err(Error::Config("missing `mode`".into())),
        };
        let mut merged = serde_json::to_value(Self::defaults_for(mode))?;
        merge(&mut merged, value);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {x}")))
            }
        };
        positive("dt", self.dt)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("T", "must be nonnegative"));
        }
        if !(self.t_therm >= 0.0 && self.t_therm.is_finite()) {
            return Err(Error::invalid("t_therm", "must be nonnegative"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("K", "need at least one realization"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        if self.alpha != 1 && self.alpha != 2 {
            return Err(Error::UnsupportedOrder(self.alpha));
        }
        if self.eta.is_empty() || self.eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("eta", "need at least one finite value"));
        }
        if self.mode != Mode::Bias1d && self.eta.iter().any(|&e| e == 0.0) {
            return Err(Error::ZeroForcing);
        }
        if self.mode.is_fluid() {
            positive("density", self.density)?;
            if self.n_particles < 2 {
                return Err(Error::invalid("N", "need at least two particles"));
            }
            let side = box_side(self.n_particles, self.density);
            self.lj.validate(&PeriodicBox::cubic(side, 3)?)?;
            if self.mode == Mode::Custom && (self.forcing.is_none() || self.observable.is_none()) {
                return Err(Error::Config("custom mode needs `forcing` and `observable`".into()));
            }
        } else {
            self.grid.validate()?;
        }
        if self.mode == Mode::Ttcf1d {
            positive("nemd_time", self.nemd_time)?;
            if self.nemd_burn_in >= self.nemd_time {
                return Err(Error::BurnIn {
                    burn_in: self.nemd_burn_in,
                    length: self.nemd_time,
                });
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<LangevinParams> {
        LangevinParams::new(self.beta, self.gamma, self.dt)
    }

    pub fn forcing_spec(&self) -> ForcingSpec {
        match self.mode {
            Mode::Mobility => ForcingSpec::ColoredDrift {
                n_particles: self.n_particles,
            },
            Mode::Shear => ForcingSpec::SinusoidalTransverse {
                box_y: box_side(self.n_particles, self.density),
            },
            Mode::Custom => self.forcing.clone().expect("validated"),
            Mode::Bias1d | Mode::Gk1d | Mode::Ttcf1d => ForcingSpec::Constant1D { value: 1.0 },
        }
    }

    pub fn observable_spec(&self) -> Observable {
        match self.mode {
            Mode::Mobility => Observable::VelocityAlongF {
                forcing: self.forcing_spec(),
            },
            Mode::Shear => Observable::ShearFourierIm {
                box_y: box_side(self.n_particles, self.density),
            },
            Mode::Custom => self.observable.clone().expect("validated"),
            Mode::Bias1d | Mode::Gk1d | Mode::Ttcf1d => Observable::Test1D {
                beta: self.beta,
                potential: self.potential_1d(),
            },
        }
    }

    pub fn potential_1d(&self) -> Potential {
        Potential::Cosine1D {
            amplitude: self.amplitude,
        }
    }

    pub fn one_dim_system(&self) -> OneDimSystem {
        OneDimSystem {
            potential: self.potential_1d(),
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    /// Steps per trajectory and the recorded sample count.
    pub fn steps(&self) -> (u64, usize) {
        let steps = (self.t_final / self.dt).round() as u64;
        (steps, (steps / self.stride) as usize + 1)
    }

    pub fn sample_dt(&self) -> f64 {
        self.dt * self.stride as f64
    }
}

fn parse_override(v: &str) -> Result<serde_json::Value> {
    // reuse the TOML value grammar; bare words become strings
    match toml::from_str::<toml::Table>(&format!("v = {v}")) {
        Ok(mut t) => Ok(serde_json::to_value(t.remove("v").expect("key present"))?),
        Err(_) => Ok(serde_json::Value::String(v.to_string())),
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults() {
        let shear = RunConfig::defaults_for(Mode::Shear);
        assert_eq!(shear.beta, 1.25);
        assert_eq!(shear.t_final, 3.5);
        assert_eq!(shear.density, 0.7);
        assert_eq!(shear.realizations, 100_000);
        assert_eq!(shear.n_particles, 1000);
        let mob = RunConfig::defaults_for(Mode::Mobility);
        assert_eq!(mob.t_final, 2.0);
        assert_eq!(mob.beta, 0.8);
        assert_eq!(mob.density, 0.6);
        assert_eq!((mob.dt, mob.t_therm, mob.gamma), (1e-3, 1.0, 1.0));
        assert_eq!(mob.lj.r_cut, 2.5);
        assert!(matches!(Mode::parse("viscosity"), Err(Error::UnknownMode(_))));
    }

    #[test]
    fn overrides_and_scalar_eta() {
        let cfg = RunConfig::from_mode(
            Mode::Mobility,
            &[("eta".into(), "0.5".into()), ("N".into(), "125".into()), ("K".into(), "10".into())],
        )
        .unwrap();
        assert_eq!(cfg.eta, vec![0.5]);
        assert_eq!(cfg.n_particles, 125);
        assert_eq!(cfg.realizations, 10);
        assert_eq!(cfg.beta, 0.8);
    }

    #[test]
    fn toml_and_json_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "mode = \"shear\"\neta = [0.1, 1.0]\nK = 4\n[lj]\nr_cut = 2.0\n").unwrap();
        let cfg = RunConfig::from_file(&toml_path, &[]).unwrap();
        assert_eq!(cfg.eta, vec![0.1, 1.0]);
        assert_eq!(cfg.lj.r_cut, 2.0);
        assert_eq!(cfg.lj.sigma, 1.0);
        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(RunConfig::from_file(&json_path, &[]).unwrap(), cfg);
        std::fs::write(&toml_path, "mode = \"shear\"\nbogus = 1\n").unwrap();
        assert!(RunConfig::from_file(&toml_path, &[]).is_err());
    }

    #[test]
    fn validation() {
        let bad = |k: &str, v: &str| RunConfig::from_mode(Mode::Mobility, &[(k.into(), v.into())]).is_err();
        assert!(bad("K", "0"));
        assert!(bad("dt", "-1.0"));
        assert!(bad("alpha", "3"));
        assert!(bad("eta", "0.0"));
        assert!(bad("N", "20"));
        assert!(RunConfig::from_mode(Mode::Custom, &[]).is_err());
    }
}
