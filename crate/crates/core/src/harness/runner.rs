use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde_json::json;

use crate::coupling::{PerturbationMap, SynchronousBundle};
use crate::dynamics::{sample_momenta, LangevinParams, LangevinStepper, NoiseStream, PeriodicBox, PhaseState, Potential, SystemSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    nemd_estimate, propagate_steady_mean_error, variance_report, CurveAccumulator, EstimatorKind, EstimatorResult, NemdResult,
    VarianceTable,
};
use crate::fd::FdOracle;
use crate::forcing::{conjugate_response, Drive, Observable};
use crate::lj::{lattice_init, thermalize, ThermalizationReport};

use super::config::{Mode, RunConfig};
use super::output::{Failure, OutputSet, RunManifest, RunStatus, StreamRange};

/// Realizations handled sequentially by one task. Results are merged chunk
/// by chunk in index order, so they do not depend on the thread count.
pub const CHUNK: u64 = 64;
/// Chunks in flight at once; bounds the memory held by partial results.
const WAVE: u64 = 32;
/// A run fails when more than this fraction of realizations blow up.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

fn is_realization_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::BlowUp { .. } | Error::CoupledBlowUp { .. } | Error::SingularConfiguration { .. }
    )
}

/// Runs `work` for realizations `0..k` and merges per-chunk accumulators in
/// index order.
fn run_chunked<A, Make, Work, Merge>(
    config: &RunConfig,
    make: Make,
    work: Work,
    merge: Merge,
) -> Result<(A, Vec<Failure>)>
where
    A: Send,
    Make: Fn() -> A + Sync,
    Work: Fn(u64, u64, &mut A) -> Result<()> + Sync,
    Merge: Fn(&mut A, A),
{
    let k = config.realizations;
    let n_chunks = k.div_ceil(CHUNK);
    let mut total = make();
    let mut failures = Vec::new();
    let mut start = 0;
    while start < n_chunks {
        let end = (start + WAVE).min(n_chunks);
        let parts: Vec<Result<(A, Vec<Failure>)>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut acc = make();
                let mut fails = Vec::new();
                for idx in c * CHUNK..((c + 1) * CHUNK).min(k) {
                    let stream = config.first_stream + idx;
                    match work(idx, stream, &mut acc) {
                        Ok(()) => {}
                        Err(e) if is_realization_failure(&e) => fails.push(Failure {
                            realization: idx,
                            stream_id: stream,
                            error: e.to_string(),
                        }),
                        Err(e) => return Err(e),
                    }
                }
                Ok((acc, fails))
            })
            .collect();
        for part in parts {
            let (acc, fails) = part?;
            merge(&mut total, acc);
            failures.extend(fails);
        }
        start = end;
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * k as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: k as usize,
        });
    }
    Ok((total, failures))
}

fn series_len(config: &RunConfig) -> usize {
    config.steps().1
}

fn eta_tag(eta: f64) -> String {
    format!("eta{eta}")
}

/// Aggregated transient-subtraction results for one forcing magnitude.
#[derive(Clone, Debug)]
pub struct FluidResults {
    pub eta: f64,
    pub naive: EstimatorResult,
    pub subtraction: EstimatorResult,
}

struct FluidAcc {
    naive: Vec<CurveAccumulator>,
    sub: Vec<CurveAccumulator>,
    thermo: Vec<(u64, ThermalizationReport)>,
}

fn fluid_system(config: &RunConfig) -> Result<(SystemSpec, Vec<f64>)> {
    let params = config.params()?;
    let (q, cell) = lattice_init(config.n_particles, config.density)?;
    Ok((SystemSpec::new(Potential::LennardJones(config.lj), params, Some(cell)), q))
}

/// Thermalized equilibrium state, its perturbed images, and the recorded
/// responses of all members (equilibrium first).
fn fluid_realization(
    config: &RunConfig,
    system: &SystemSpec,
    lattice: &[f64],
    maps: &[PerturbationMap],
    observable: &Observable,
    stream: u64,
) -> Result<(Vec<Vec<f64>>, ThermalizationReport)> {
    let mut noise = NoiseStream::new(config.master_seed, stream);
    let p = sample_momenta(&system.params, &mut noise, lattice.len());
    let start = PhaseState::new(lattice.to_vec(), p, 3)?;
    let (y0, report) = thermalize(start, system, config.t_therm, &mut noise)?;
    let perturbed = maps.iter().map(|m| m.apply(&y0)).collect();
    let mut bundle = SynchronousBundle::new(y0, perturbed, system, noise)?;
    let record = |bundle: &SynchronousBundle, out: &mut Vec<Vec<f64>>| {
        for (m, state) in bundle.members().iter().enumerate() {
            out[m].push(observable.eval(state, &system.params));
        }
    };
    let (steps, len) = config.steps();
    let mut samples = vec![Vec::with_capacity(len); maps.len() + 1];
    record(&bundle, &mut samples);
    for step in 1..=steps {
        bundle.step()?;
        if step % config.stride == 0 {
            record(&bundle, &mut samples);
        }
    }
    Ok((samples, report))
}

fn run_fluid(config: &RunConfig) -> Result<(Vec<FluidResults>, Vec<(u64, ThermalizationReport)>, Vec<Failure>)> {
    let (system, lattice) = fluid_system(config)?;
    let forcing = config.forcing_spec();
    let observable = config.observable_spec();
    let maps = config
        .eta
        .iter()
        .map(|&eta| PerturbationMap::new(config.alpha, eta, forcing.clone(), &system.params))
        .collect::<Result<Vec<_>>>()?;
    let len = series_len(config);
    let sdt = config.sample_dt();
    let n_eta = config.eta.len();
    let make = || FluidAcc {
        naive: vec![CurveAccumulator::new(len, sdt); n_eta],
        sub: vec![CurveAccumulator::new(len, sdt); n_eta],
        thermo: Vec::new(),
    };
    let work = |idx: u64, stream: u64, acc: &mut FluidAcc| {
        let (samples, report) = fluid_realization(config, &system, &lattice, &maps, &observable, stream)?;
        let mut buf = vec![0.0; len];
        for (e, &eta) in config.eta.iter().enumerate() {
            let x = &samples[e + 1];
            for (b, v) in buf.iter_mut().zip(x) {
                *b = v / eta;
            }
            acc.naive[e].push(&buf);
            for ((b, v), y) in buf.iter_mut().zip(x).zip(&samples[0]) {
                *b = (v - y) / eta;
            }
            acc.sub[e].push(&buf);
        }
        acc.thermo.push((idx, report));
        Ok(())
    };
    let merge = |total: &mut FluidAcc, part: FluidAcc| {
        for (t, p) in total.naive.iter_mut().zip(&part.naive) {
            t.merge(p);
        }
        for (t, p) in total.sub.iter_mut().zip(&part.sub) {
            t.merge(p);
        }
        total.thermo.extend(part.thermo);
    };
    let (acc, failures) = run_chunked(config, make, work, merge)?;
    let results = config
        .eta
        .iter()
        .enumerate()
        .map(|(e, &eta)| FluidResults {
            eta,
            naive: EstimatorResult::from_accumulator(EstimatorKind::Naive, eta, &acc.naive[e]),
            subtraction: EstimatorResult::from_accumulator(EstimatorKind::Subtraction, eta, &acc.sub[e]),
        })
        .collect();
    Ok((results, acc.thermo, failures))
}

/// Draws `(q, p)` exactly from `e^{−β(V(q)+p²/2)}` on the torus: `q` by
/// rejection from the uniform law, `p` Gaussian.
pub fn sample_gibbs_1d(potential: &Potential, params: &LangevinParams, noise: &mut NoiseStream) -> PhaseState {
    let vmin = match potential {
        Potential::Cosine1D { amplitude } => -amplitude.abs(),
        _ => (0..1024)
            .map(|i| potential.value_1d(-PI + TAU * i as f64 / 1024.0))
            .fold(f64::INFINITY, f64::min),
    };
    let q = loop {
        let q = -PI + TAU * noise.uniform();
        let accept = (-params.beta * (potential.value_1d(q) - vmin)).exp().min(1.0);
        if noise.uniform() < accept {
            break q;
        }
    };
    let p = sample_momenta(params, noise, 1)[0];
    PhaseState::scalar(q, p)
}

fn one_dim_spec(config: &RunConfig) -> Result<SystemSpec> {
    Ok(SystemSpec::new(config.potential_1d(), config.params()?, Some(PeriodicBox::torus_1d())))
}

/// Green–Kubo curve on the one-dimensional system.
pub fn run_green_kubo_1d(config: &RunConfig) -> Result<(EstimatorResult, Vec<Failure>)> {
    let system = one_dim_spec(config)?;
    let forcing = config.forcing_spec();
    let observable = config.observable_spec();
    let len = series_len(config);
    let (steps, _) = config.steps();
    let make = || CurveAccumulator::new(len, config.sample_dt());
    let work = |_idx: u64, stream: u64, acc: &mut CurveAccumulator| {
        let mut noise = NoiseStream::new(config.master_seed, stream);
        let mut x = sample_gibbs_1d(&system.potential, &system.params, &mut noise);
        let s0 = conjugate_response(&forcing, &system.params, &x);
        let mut stepper = LangevinStepper::new(&system, None, &x)?;
        let mut buf = Vec::with_capacity(len);
        buf.push(observable.eval(&x, &system.params) * s0);
        for step in 1..=steps {
            stepper.step(&mut x, &mut noise)?;
            if step % config.stride == 0 {
                buf.push(observable.eval(&x, &system.params) * s0);
            }
        }
        acc.push_weighted(&buf, s0);
        Ok(())
    };
    let (acc, failures) = run_chunked(config, make, work, |t, p| t.merge(&p))?;
    Ok((EstimatorResult::from_accumulator(EstimatorKind::GreenKubo, 0.0, &acc), failures))
}

/// Long forced run from an equilibrium draw; returns the NEMD estimate of
/// `(⟨R⟩_η − ⟨R⟩_0)/η` and the steady mean of the (offset) response.
pub fn run_nemd_1d(config: &RunConfig, eta: f64, stream: u64) -> Result<NemdResult> {
    let system = one_dim_spec(config)?;
    let observable = config.observable_spec();
    let mut noise = NoiseStream::new(config.master_seed, stream);
    let mut y = sample_gibbs_1d(&system.potential, &system.params, &mut noise);
    let drive = Drive::new(eta, config.forcing_spec());
    let mut stepper = LangevinStepper::new(&system, Some(drive), &y)?;
    let steps = (config.nemd_time / config.dt).round() as u64;
    let mut samples = Vec::with_capacity((steps / config.stride) as usize + 1);
    let c = config.response_offset;
    samples.push(observable.eval(&y, &system.params) + c);
    for step in 1..=steps {
        stepper.step(&mut y, &mut noise)?;
        if step % config.stride == 0 {
            samples.push(observable.eval(&y, &system.params) + c);
        }
    }
    let raw = nemd_estimate(&samples, eta, config.sample_dt(), config.nemd_burn_in, config.nemd_batches)?;
    // the test response has zero equilibrium mean, so ⟨R + c⟩_0 = c
    Ok(NemdResult {
        estimate: (raw.steady.mean - c) / eta,
        ..raw
    })
}

#[derive(Clone, Debug)]
pub struct TtcfResults {
    pub eta: f64,
    pub plain: EstimatorResult,
    pub recentered: EstimatorResult,
    pub nemd: NemdResult,
}

/// Plain and recentered TTCF for every forcing magnitude; the recentering
/// constants come from NEMD runs on the streams following the realizations.
pub fn run_ttcf_1d(config: &RunConfig) -> Result<(Vec<TtcfResults>, Vec<Failure>)> {
    let system = one_dim_spec(config)?;
    let forcing = config.forcing_spec();
    let observable = config.observable_spec();
    let nemd: Vec<NemdResult> = config
        .eta
        .par_iter()
        .enumerate()
        .map(|(e, &eta)| run_nemd_1d(config, eta, config.first_stream + config.realizations + e as u64))
        .collect::<Result<Vec<_>>>()?;
    let len = series_len(config);
    let (steps, _) = config.steps();
    let n_eta = config.eta.len();
    let c = config.response_offset;
    let make = || {
        (
            vec![CurveAccumulator::new(len, config.sample_dt()); n_eta],
            vec![CurveAccumulator::new(len, config.sample_dt()); n_eta],
        )
    };
    type Acc = (Vec<CurveAccumulator>, Vec<CurveAccumulator>);
    let work = |_idx: u64, stream: u64, acc: &mut Acc| {
        let mut noise = NoiseStream::new(config.master_seed, stream);
        let y0 = sample_gibbs_1d(&system.potential, &system.params, &mut noise);
        let s0 = conjugate_response(&forcing, &system.params, &y0);
        let drives = config.eta.iter().map(|&eta| Some(Drive::new(eta, forcing.clone()))).collect();
        let mut bundle = SynchronousBundle::with_drives(vec![y0; n_eta], drives, &system, noise)?;
        let mut r = vec![Vec::with_capacity(len); n_eta];
        let record = |b: &SynchronousBundle, r: &mut Vec<Vec<f64>>| {
            for (m, s) in b.members().iter().enumerate() {
                r[m].push(observable.eval(s, &system.params) + c);
            }
        };
        record(&bundle, &mut r);
        for step in 1..=steps {
            bundle.step()?;
            if step % config.stride == 0 {
                record(&bundle, &mut r);
            }
        }
        let mut buf = vec![0.0; len];
        for e in 0..n_eta {
            for (b, v) in buf.iter_mut().zip(&r[e]) {
                *b = v * s0;
            }
            acc.0[e].push_weighted(&buf, s0);
            let m = nemd[e].steady.mean;
            for (b, v) in buf.iter_mut().zip(&r[e]) {
                *b = (v - m) * s0;
            }
            acc.1[e].push_weighted(&buf, s0);
        }
        Ok(())
    };
    let merge = |t: &mut Acc, p: Acc| {
        for (a, b) in t.0.iter_mut().zip(&p.0) {
            a.merge(b);
        }
        for (a, b) in t.1.iter_mut().zip(&p.1) {
            a.merge(b);
        }
    };
    let (acc, failures) = run_chunked(config, make, work, merge)?;
    let results = config
        .eta
        .iter()
        .enumerate()
        .map(|(e, &eta)| {
            let plain = EstimatorResult::from_accumulator(EstimatorKind::Ttcf, eta, &acc.0[e]);
            let mut recentered = EstimatorResult::from_accumulator(EstimatorKind::TtcfRecentered, eta, &acc.1[e]);
            propagate_steady_mean_error(&mut recentered, nemd[e].steady.stderr, acc.1[e].mean_weight());
            TtcfResults {
                eta,
                plain,
                recentered,
                nemd: nemd[e],
            }
        })
        .collect();
    Ok((results, failures))
}

/// Time grid index at which the subtraction error bar first exceeds the
/// naive one, as a time.
pub fn decoupling_time(naive: &EstimatorResult, sub: &EstimatorResult) -> Option<f64> {
    (1..naive.len())
        .find(|&n| sub.stderr_instantaneous[n] > naive.stderr_instantaneous[n])
        .map(|n| naive.time(n))
}

fn fluid_outputs(
    config: &RunConfig,
    results: &[FluidResults],
    thermo: &[(u64, ThermalizationReport)],
    out: &mut OutputSet,
) -> Result<VarianceTable> {
    let mode = config.mode.name();
    let mut table = VarianceTable::default();
    let mut summary = Vec::new();
    for r in results {
        out.write(&format!("{mode}_{}_naive.csv", eta_tag(r.eta)), &r.naive.to_csv())?;
        out.write(&format!("{mode}_{}_subtraction.csv", eta_tag(r.eta)), &r.subtraction.to_csv())?;
        let times: Vec<f64> = config
            .report_times
            .iter()
            .copied()
            .filter(|&t| r.naive.index_of(t).is_some())
            .collect();
        table.extend(variance_report(&r.naive, &r.subtraction, &times)?);
        summary.push(json!({
            "eta": r.eta,
            "naive": { "estimate": r.naive.estimate, "stderr": r.naive.stderr },
            "subtraction": { "estimate": r.subtraction.estimate, "stderr": r.subtraction.stderr },
            "decoupling_time": decoupling_time(&r.naive, &r.subtraction),
        }));
    }
    out.write("variance_table.csv", &table.to_csv())?;
    out.write("variance_table.txt", &table.to_text())?;
    let mut csv = String::from("realization,steps,mean_kinetic_energy,mean_potential_energy,kinetic_temperature\n");
    for (idx, t) in thermo {
        csv.push_str(&format!(
            "{idx},{},{:.16e},{:.16e},{:.16e}\n",
            t.steps, t.mean_kinetic_energy, t.mean_potential_energy, t.kinetic_temperature
        ));
    }
    out.write("thermalization.csv", &csv)?;
    let mean_temp = thermo.iter().map(|(_, t)| t.kinetic_temperature).sum::<f64>() / thermo.len().max(1) as f64;
    out.write_json(
        "summary.json",
        &json!({
            "mode": mode,
            "realizations": config.realizations,
            "T": config.t_final,
            "target_temperature": 1.0 / config.beta,
            "mean_kinetic_temperature": mean_temp,
            "results": summary,
        }),
    )?;
    Ok(table)
}

/// Everything a finished run produced, for callers that want the numbers
/// rather than the files.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    Fluid(Vec<FluidResults>),
    GreenKubo { result: EstimatorResult, reference: f64 },
    Ttcf(Vec<TtcfResults>),
    Bias(crate::fd::BiasSweep),
}

fn execute(config: &RunConfig, out: &mut OutputSet, manifest: &mut RunManifest) -> Result<RunOutcome> {
    match config.mode {
        Mode::Mobility | Mode::Shear | Mode::Custom => {
            let (results, thermo, failures) = run_fluid(config)?;
            manifest.failures = failures;
            fluid_outputs(config, &results, &thermo, out)?;
            Ok(RunOutcome::Fluid(results))
        }
        Mode::Gk1d => {
            let (result, failures) = run_green_kubo_1d(config)?;
            manifest.failures = failures;
            let oracle = FdOracle::new(config.one_dim_system(), config.grid)?;
            let reference = oracle.reference_transport();
            out.write("gk1d_green_kubo.csv", &result.to_csv())?;
            out.write_json(
                "summary.json",
                &json!({
                    "mode": "gk1d",
                    "realizations": config.realizations,
                    "T": config.t_final,
                    "green_kubo": { "estimate": result.estimate, "stderr": result.stderr },
                    "fd_reference": reference,
                    "fd_relative_residual": oracle.solution.relative_residual,
                    "z_score": (result.estimate - reference) / result.stderr,
                }),
            )?;
            Ok(RunOutcome::GreenKubo { result, reference })
        }
        Mode::Ttcf1d => {
            let (results, failures) = run_ttcf_1d(config)?;
            manifest.failures = failures;
            let mut summary = Vec::new();
            for r in &results {
                out.write(&format!("ttcf1d_{}_ttcf.csv", eta_tag(r.eta)), &r.plain.to_csv())?;
                out.write(&format!("ttcf1d_{}_ttcf_recentered.csv", eta_tag(r.eta)), &r.recentered.to_csv())?;
                summary.push(json!({
                    "eta": r.eta,
                    "ttcf": { "estimate": r.plain.estimate, "stderr": r.plain.stderr },
                    "ttcf_recentered": { "estimate": r.recentered.estimate, "stderr": r.recentered.stderr },
                    "nemd": { "estimate": r.nemd.estimate, "stderr": r.nemd.stderr,
                              "steady_mean": r.nemd.steady.mean, "steady_mean_stderr": r.nemd.steady.stderr },
                }));
            }
            out.write_json(
                "summary.json",
                &json!({ "mode": "ttcf1d", "realizations": config.realizations, "T": config.t_final,
                         "response_offset": config.response_offset, "results": summary }),
            )?;
            Ok(RunOutcome::Ttcf(results))
        }
        Mode::Bias1d => {
            let sweep = run_bias_1d(config)?;
            out.write("bias1d.csv", &sweep.to_csv())?;
            out.write_json(
                "summary.json",
                &json!({
                    "mode": "bias1d",
                    "slope_alpha1": sweep.slope_alpha1,
                    "slope_alpha2": sweep.slope_alpha2,
                    "reference_transport": sweep.reference_transport,
                }),
            )?;
            Ok(RunOutcome::Bias(sweep))
        }
    }
}

/// Deterministic bias sweep over `config.eta`.
pub fn run_bias_1d(config: &RunConfig) -> Result<crate::fd::BiasSweep> {
    FdOracle::new(config.one_dim_system(), config.grid)?.sweep(&config.eta)
}

fn stream_range(config: &RunConfig) -> StreamRange {
    let extra = if config.mode == Mode::Ttcf1d { config.eta.len() as u64 } else { 0 };
    let count = if config.mode == Mode::Bias1d { 0 } else { config.realizations + extra };
    StreamRange {
        first: config.first_stream,
        count,
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs a configuration, writing outputs and the manifest into
/// `config.output_dir`. The manifest is written with status `running` first
/// and finalized at the end, also on failure.
pub fn run_experiment(config: &RunConfig, threads: Option<usize>) -> Result<(RunManifest, RunOutcome)> {
    config.validate()?;
    let mut out = OutputSet::create(&config.output_dir)?;
    in_pool(threads, || {
        let mut manifest = RunManifest::start(config, stream_range(config), rayon::current_num_threads());
        manifest.save(out.dir())?;
        match execute(config, &mut out, &mut manifest) {
            Ok(outcome) => {
                manifest.finish(RunStatus::Complete, out.entries());
                manifest.save(out.dir())?;
                Ok((manifest, outcome))
            }
            Err(e) => {
                manifest.error = Some(e.to_string());
                manifest.finish(RunStatus::Failed, out.entries());
                manifest.save(out.dir())?;
                Err(e)
            }
        }
    })?
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PilotRow {
    pub eta: f64,
    pub decoupling_time: Option<f64>,
}

/// Short run with `pilot_realizations` realizations reporting, per forcing
/// magnitude, the first time at which the subtraction error bar exceeds the
/// naive one.
pub fn run_pilot(config: &RunConfig, threads: Option<usize>) -> Result<Vec<PilotRow>> {
    if !config.mode.is_fluid() {
        return Err(Error::Config(format!("pilot runs need a fluid mode, not {}", config.mode.name())));
    }
    let pilot = RunConfig {
        realizations: config.pilot_realizations,
        ..config.clone()
    };
    let (_, outcome) = run_experiment(&pilot, threads)?;
    let RunOutcome::Fluid(results) = outcome else {
        unreachable!("fluid mode")
    };
    let rows: Vec<PilotRow> = results
        .iter()
        .map(|r| PilotRow {
            eta: r.eta,
            decoupling_time: decoupling_time(&r.naive, &r.subtraction),
        })
        .collect();
    let mut csv = String::from("eta,decoupling_time\n");
    for r in &rows {
        match r.decoupling_time {
            Some(t) => csv.push_str(&format!("{:.16e},{:.16e}\n", r.eta, t)),
            None => csv.push_str(&format!("{:.16e},none\n", r.eta)),
        }
    }
    let mut manifest = RunManifest::load(&pilot.output_dir)?;
    let mut out = OutputSet::create(&pilot.output_dir)?;
    out.write("pilot.csv", &csv)?;
    manifest.outputs.extend(out.entries().iter().cloned());
    manifest.save(&pilot.output_dir)?;
    Ok(rows)
}

/// Verifies checksums of a finished run and renders its tables.
pub fn report(dir: &std::path::Path) -> Result<String> {
    let manifest = RunManifest::load(dir)?;
    manifest.verify(dir)?;
    let mut text = format!(
        "mode: {}\nstatus: {:?}\nrealizations: {}\nmaster seed: {}\nstreams: {}..{}\nfailures: {}\n",
        manifest.config.mode.name(),
        manifest.status,
        manifest.config.realizations,
        manifest.master_seed,
        manifest.streams.first,
        manifest.streams.first + manifest.streams.count,
        manifest.failures.len(),
    );
    if let Some(w) = manifest.wall_clock_seconds {
        text.push_str(&format!("wall clock: {w:.1} s\n"));
    }
    text.push_str(&format!("outputs: {} files, checksums verified\n", manifest.outputs.len()));
    for name in ["variance_table.txt", "bias1d.csv", "pilot.csv", "summary.json"] {
        if manifest.outputs.iter().any(|o| o.path == name) {
            text.push_str(&format!("\n== {name} ==\n"));
            text.push_str(&std::fs::read_to_string(dir.join(name))?);
        }
    }
    Ok(text)
}
