//! Thread pool against the sequential path on the same inputs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spca::gradient_scheme::StopRule;
use spca::harness::{self, ExperimentSpec, GammaGrid, InputSource, Mode};
use spca::spca_block::{self, BlockConfig};
use spca::spca_single::{self, PenaltyConfig, PenaltyKind};
use spca::Parallelism;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn single_unit(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_l1");
    group.sample_size(10);
    let base = harness::gen_gaussian(500, 4000, 0).unwrap();
    let gamma = harness::absolute_gamma(PenaltyKind::L1, harness::BENCH_GAMMA_REL, base.max_column().1);
    let pen = PenaltyConfig::l1(gamma);
    let stop = StopRule::default();
    for (name, mode) in MODES {
        let a = base.clone().with_parallelism(mode);
        let x0 = spca_single::init_column(&a).unwrap();
        group.bench_function(BenchmarkId::new(name, "500x4000"), |b| {
            b.iter(|| spca_single::solve_single(black_box(&a), &pen, &x0, &stop).unwrap())
        });
    }
    group.finish();
}

fn block(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_l0");
    group.sample_size(10);
    let base = harness::gen_gaussian(200, 2000, 1).unwrap();
    let mut cfg = BlockConfig::new(4, PenaltyConfig { kind: PenaltyKind::L0, gamma: 0.0 });
    cfg.penalty.gamma = harness::absolute_gamma(PenaltyKind::L0, harness::BENCH_GAMMA_REL, base.max_column().1);
    let stop = StopRule::default();
    for (name, mode) in MODES {
        let a = base.clone().with_parallelism(mode);
        let x0 = spca_block::init_block(&a, 4).unwrap();
        group.bench_function(BenchmarkId::new(name, "200x2000_m4"), |b| {
            b.iter(|| spca_block::solve_block(black_box(&a), &cfg, &x0, &stop).unwrap())
        });
    }
    group.finish();
}

fn tradeoff_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("tradeoff_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        let mut spec = ExperimentSpec::new(Mode::Tradeoff, InputSource::Gaussian { p: 100, n: 1000, seed: 2 });
        spec.grid = Some(GammaGrid::linear(0.0, 0.9, 20).unwrap());
        spec.reps = 4;
        spec.parallelism = mode;
        group.bench_function(BenchmarkId::new(name, "100x1000_20x4"), |b| {
            b.iter(|| harness::run(black_box(&spec), "bench").unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, single_unit, block, tradeoff_sweep);
criterion_main!(benches);
