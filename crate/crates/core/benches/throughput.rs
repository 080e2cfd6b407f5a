//! Parallel vs sequential throughput of the seed-level and net-level maps.
//!
//! `cargo bench` compares both paths in one binary; building with
//! `--no-default-features` turns `par_map` itself into the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qxlab::agents::{run_training, AgentConfig, Method, RunSpec};
use qxlab::nn::{zero_fit_demo, ZeroFitConfig};
use qxlab::parallel::{par_map, seq_map};
use qxlab::rng::lab_rng;

fn small_agent() -> AgentConfig {
    AgentConfig {
        hidden: vec![16, 16],
        batch_size: 32,
        warmup_steps: 100,
        target_cem_samples: 8,
        target_cem_top_k: 2,
        target_cem_iterations: 1,
        episode_len: 100,
        ..AgentConfig::default()
    }
}

fn seeds(c: &mut Criterion) {
    let cfg = small_agent();
    let run = RunSpec {
        episodes: 2,
        eval_every: 1,
        eval_episodes: 1,
    };
    let job = |seed: u64| run_training(Method::Qxplore, &cfg, "sparse-loco", &run, seed).unwrap().len();
    let mut g = c.benchmark_group("qxplore_seeds");
    g.sample_size(10);
    for n in [1u64, 4] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| par_map((0..n).collect(), job))
        });
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| seq_map((0..n).collect(), job))
        });
    }
    g.finish();
}

fn zero_fit(c: &mut Criterion) {
    let cfg = ZeroFitConfig {
        hidden_dims: vec![32, 32],
        n_nets: 1,
        max_steps: 300,
        grid_points: 101,
        ..ZeroFitConfig::default()
    };
    let job = |seed: u64| zero_fit_demo(&cfg, &mut lab_rng(seed)).unwrap().excluded.len();
    let mut g = c.benchmark_group("zero_fit_nets");
    g.sample_size(10);
    g.bench_function("parallel/8", |b| b.iter(|| par_map((0..8).collect(), job)));
    g.bench_function("sequential/8", |b| b.iter(|| seq_map((0..8).collect(), job)));
    g.finish();
}

criterion_group!(benches, seeds, zero_fit);
criterion_main!(benches);
