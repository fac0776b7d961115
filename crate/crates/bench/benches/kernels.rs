use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use transub_core::coupling::{CoupledPair, PerturbationMap};
use transub_core::dynamics::{sample_momenta, LangevinParams, NoiseStream, PhaseState, Potential, SystemSpec};
use transub_core::estimators::CurveAccumulator;
use transub_core::fd::{FdGrid, FdOracle, OneDimSystem};
use transub_core::forcing::ForcingSpec;
use transub_core::lj::{lattice_init, lj_forces_auto, lj_forces_brute, LjParams};

fn forces(c: &mut Criterion) {
    let params = LjParams::default();
    for (n, density) in [(125, 0.6), (1000, 0.7)] {
        let (q, cell) = lattice_init(n, density).unwrap();
        let mut out = vec![0.0; q.len()];
        c.bench_function(&format!("lj_cell_list_n{n}"), |b| {
            b.iter(|| lj_forces_auto(black_box(&q), &cell, &params, &mut out).unwrap())
        });
        if n <= 125 {
            c.bench_function(&format!("lj_brute_n{n}"), |b| b.iter(|| lj_forces_brute(black_box(&q), &cell, &params).unwrap()));
        }
    }
}

fn coupled_step(c: &mut Criterion) {
    let lp = LangevinParams::new(0.8, 1.0, 1e-3).unwrap();
    let (q, cell) = lattice_init(125, 0.6).unwrap();
    let system = SystemSpec::new(Potential::LennardJones(LjParams::default()), lp.clone(), Some(cell));
    let mut noise = NoiseStream::new(1, 0);
    let p = sample_momenta(&lp, &mut noise, q.len());
    let y = PhaseState::new(q, p, 3).unwrap();
    let map = PerturbationMap::new(1, 0.1, ForcingSpec::ColoredDrift { n_particles: 125 }, &lp).unwrap();
    let mut pair = CoupledPair::from_map(y, &map, &system, noise).unwrap();
    c.bench_function("coupled_step_n125", |b| b.iter(|| pair.step().unwrap()));
    let x = pair.x().clone();
    let mut out = vec![0.0; x.q.len()];
    let cell = system.cell.clone().unwrap();
    c.bench_function("lj_auto_liquid_n125", |b| {
        b.iter(|| lj_forces_auto(black_box(&x.q), &cell, &LjParams::default(), &mut out).unwrap())
    });
    let mut g = vec![0.0; 375];
    let mut noise = NoiseStream::new(2, 0);
    c.bench_function("gaussians_375", |b| b.iter(|| noise.fill_standard_normal(black_box(&mut g))));
}

fn accumulate(c: &mut Criterion) {
    let samples: Vec<f64> = (0..2001).map(|i| (i as f64 * 0.01).sin()).collect();
    c.bench_function("curve_push_2001", |b| {
        let mut acc = CurveAccumulator::new(samples.len(), 1e-3);
        b.iter(|| acc.push(black_box(&samples)))
    });
}

fn fd_solve(c: &mut Criterion) {
    let grid = FdGrid::new(50, 100, 5.0).unwrap();
    let mut group = c.benchmark_group("fd");
    group.sample_size(10);
    group.bench_function("poisson_50x100", |b| b.iter(|| FdOracle::new(OneDimSystem::default(), grid).unwrap()));
    group.finish();
}

criterion_group!(benches, forces, coupled_step, accumulate, fd_solve);
criterion_main!(benches);
