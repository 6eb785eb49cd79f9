use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rfsdde::density::{monte_carlo_ensemble_with, Method};
use rfsdde::exec::Execution;
use rfsdde::fraccalc::{zahle_integral, FracOrder, GridFunction};
use rfsdde::{CoefficientFn, FbmSampler, HurstParam, InitialPath, ModelSpec, PenaltySpec, TimeGrid};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn model(steps_per_delay: usize) -> ModelSpec {
    ModelSpec::new(
        CoefficientFn::scaled_tanh(-0.5),
        CoefficientFn::affine_tanh(0.8, 0.3),
        InitialPath::constant(0.2),
        TimeGrid::new(0.5, 1.0, steps_per_delay).unwrap(),
        HurstParam::new(0.75).unwrap(),
    )
    .unwrap()
}

fn ensembles(c: &mut Criterion) {
    let m = model(128);
    // warm the factorization cache outside the timed region
    FbmSampler::cached(m.grid, m.hurst).unwrap();
    let penalty = PenaltySpec::for_grid(0.01, &m.grid).unwrap();
    let mut group = c.benchmark_group("ensemble_256_paths");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("reflected", name), |b| {
            b.iter(|| monte_carlo_ensemble_with(&m, Method::Reflected, 256, 1, 1.0, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("penalized", name), |b| {
            b.iter(|| {
                monte_carlo_ensemble_with(&m, Method::Penalized(penalty), 256, 1, 1.0, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 1.0, 512).unwrap();
    let sampler = FbmSampler::cached(grid, HurstParam::new(0.75).unwrap()).unwrap();
    let mut group = c.benchmark_group("fbm_64_paths_512_nodes");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| sampler.sample_many(black_box(3), 64, exec)));
    }
    group.finish();
}

fn zahle(c: &mut Criterion) {
    let n = 1 << 10;
    let grid = TimeGrid::new(1.0, 1.0, n).unwrap();
    let g = FbmSampler::cached(grid, HurstParam::new(0.75).unwrap()).unwrap().sample(5, 0);
    let g = GridFunction::uniform(0.0, 1.0, g.values().to_vec()).unwrap();
    let f = GridFunction::from_fn(0.0, 1.0, n, f64::sin).unwrap();
    let alpha = FracOrder::new(0.3).unwrap();
    c.bench_function("zahle_1024", |b| b.iter(|| zahle_integral(&f, black_box(&g), alpha).unwrap()));
}

criterion_group!(benches, ensembles, sampling, zahle);
criterion_main!(benches);
