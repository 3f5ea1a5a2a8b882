//! Single-threaded against parallel execution of the data-parallel hot
//! paths: the exhaustive solver, dataset generation and evaluation.
//!
//! `cargo bench -p v2x-alloc` compares a one-thread pool with the default
//! rayon pool. Built with `--no-default-features`, both variants run the
//! sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use v2x_alloc::channel::{drop_vehicles, snapshot};
use v2x_alloc::dataset::{self, DEFAULT_SPLIT};
use v2x_alloc::eval::{evaluate, EvalContext, Instance, Method, Models};
use v2x_alloc::neural::PowerDecoding;
use v2x_alloc::par;
use v2x_alloc::solvers::{exhaustive_solve, SolverSettings};
use v2x_alloc::{ChannelGains, ScenarioConfig};

fn instance(cfg: &ScenarioConfig, seed: u64) -> ChannelGains {
    let top = drop_vehicles(&cfg.geometry, cfg.num_cue, cfg.num_vue_pairs, cfg.vehicle_density_per_m, cfg.vue_pair_max_distance_m, seed)
        .expect("default density supplies the vehicles");
    snapshot(&top, &cfg.channel_model(), seed)
}

/// Runs `f` either on a one-thread pool or on the default pool.
fn run<R: Send>(single: bool, f: impl FnOnce() -> R + Send) -> R {
    if single {
        par::single_threaded(f)
    } else {
        f()
    }
}

const MODES: [(&str, bool); 2] = [("single_threaded", true), ("parallel", false)];

fn bench_exhaustive(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let (params, grid) = (cfg.problem_params(), cfg.power_grid());
    let settings = SolverSettings { mc_samples: cfg.mc_samples_solver, candidate_cap: cfg.candidate_cap };
    let gains = instance(&cfg, 1);
    let mut group = c.benchmark_group("exhaustive_solve");
    group.sample_size(10);
    for (name, single) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(single, || exhaustive_solve(black_box(&gains.large_scale), &params, &grid, &settings, 3).expect("solves")))
        });
    }
    group.finish();
}

fn bench_generation(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let grid = cfg.power_grid();
    let mut group = c.benchmark_group("dataset_generate_16");
    group.sample_size(10);
    for (name, single) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(single, || dataset::generate(&cfg, &grid, 16, black_box(5), DEFAULT_SPLIT).expect("generates")))
        });
    }
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let gains: Vec<ChannelGains> = (0..8).map(|s| instance(&cfg, 100 + s)).collect();
    let instances: Vec<Instance<'_>> = gains.iter().enumerate().map(|(id, g)| Instance { id, gains: g }).collect();
    let grid = cfg.power_grid();
    let ctx = EvalContext {
        params: cfg.problem_params(),
        solver: SolverSettings { mc_samples: cfg.mc_samples_solver, candidate_cap: cfg.candidate_cap },
        mc_report: 2000,
        seed: 9,
        models: Models::default(),
        decoding: PowerDecoding::grid(&grid),
        grid,
    };
    let methods = [Method::Benchmark, Method::MaxPower, Method::MinPower, Method::RandomPower];
    let mut group = c.benchmark_group("evaluate_8_instances");
    group.sample_size(10);
    for (name, single) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(single, || evaluate(&methods, black_box(&instances), &ctx).expect("evaluates")))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_exhaustive, bench_generation, bench_evaluation);
criterion_main!(benches);
