use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use owqc::matrix::{blockwise_invert_upper, BlockPartition2x2, Mat};
use owqc::search::{reach, SearchBudget, TemplateFamily};
use owqc::{
    db_to_r, euler_decompose, simulate_owqc, solve_auto, EulerFactors, GaussianState, Layout, MonteCarloSettings,
    Sampler, SchemeProgram, SimulationMode,
};
use owqc_bench::setup;
use std::hint::black_box;

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for (name, layout, m, l) in [
        ("case1", Layout::Case1, 3, 3),
        ("case2", Layout::Case2, 3, 0),
        ("case3", Layout::Case3, 2, 4),
        ("case3", Layout::Case3, 4, 4),
    ] {
        let (model, p, a) = setup(layout, m, l);
        g.bench_with_input(BenchmarkId::new(name, format!("m{m}_l{l}")), &(), |b, _| {
            b.iter(|| solve_auto(black_box(&model), &p, &a, None).unwrap())
        });
    }
    g.finish();

    let m = Mat::from_fn(12, 12, |i, j| if i == j { 4.0 } else { ((i * 7 + j * 3) as f64).sin() });
    let blocks = BlockPartition2x2::split(&m, 6).unwrap();
    c.bench_function("blockwise_invert_12x12", |b| b.iter(|| blockwise_invert_upper(black_box(&blocks)).unwrap()));
    let s = EulerFactors { phi1: 0.4, r: 0.8, phi2: -1.1 }.reconstruct();
    c.bench_function("euler_decompose", |b| b.iter(|| euler_decompose(black_box(&s)).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let (model, partition, angles) = setup(Layout::Case3, 1, 2);
    let program =
        SchemeProgram { model, partition, angles, input_state: GaussianState::vacuum(1), squeezing: db_to_r(10.0) };
    c.bench_function("oracle_exact", |b| {
        b.iter(|| simulate_owqc(black_box(&program), SimulationMode::CovarianceExact, None).unwrap())
    });
    let mut g = c.benchmark_group("oracle_monte_carlo");
    g.sample_size(10);
    for sampler in [Sampler::Sobol, Sampler::Pseudo] {
        let settings = MonteCarloSettings { samples: 20_000, seed: 1, sampler };
        g.bench_function(format!("{sampler:?}"), |b| {
            b.iter(|| simulate_owqc(&program, SimulationMode::MonteCarlo, Some(settings)).unwrap())
        });
    }
    g.finish();
}

fn search(c: &mut Criterion) {
    let target = EulerFactors { phi1: 0.9, r: -0.6, phi2: 2.0 }.reconstruct();
    let budget = SearchBudget::default();
    let mut g = c.benchmark_group("reach");
    g.sample_size(10);
    for j in [1u8, 5] {
        g.bench_function(format!("template{j}"), |b| {
            b.iter(|| reach(&TemplateFamily { config_id: j }, black_box(&target), &budget, 3))
        });
    }
    g.finish();
}

criterion_group!(benches, solvers, oracle, search);
criterion_main!(benches);
