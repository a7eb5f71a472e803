use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logo_core::experiment::{benchmark_run_config, prepare};
use logo_core::synth::scenario_by_name;
use logo_core::{
    build_candidate_sets, mine_anchors, run_ensemble, refine, sinkhorn_solve, AnchorConfig, ClassPrior, CostMatrix,
    LabelVector, Matrix, SinkhornConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sinkhorn(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1_000, 10_000] {
        let k = 8;
        let m = Matrix::new(n, k, (0..n * k).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        let cost = CostMatrix::new(m, vec![true; k]).unwrap();
        let prior = ClassPrior::from_weights(&[8.0, 4.0, 2.0, 1.0, 1.0, 1.0, 0.5, 0.5]).unwrap();
        let cfg = SinkhornConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| sinkhorn_solve(&cost, &prior, &cfg).unwrap())
        });
    }
    group.finish();
}

fn anchors(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..8)).collect();
    let confidence: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let candidates = build_candidate_sets(&LabelVector::from_classes(&classes, 8).unwrap());
    let cfg = AnchorConfig::default();
    c.bench_function("mine_anchors/100000", |b| b.iter(|| mine_anchors(&candidates, &confidence, &cfg).unwrap()));
}

fn refinement(c: &mut Criterion) {
    let cfg = benchmark_run_config(scenario_by_name("severe-shift").unwrap());
    let prepared = prepare(&cfg.scenario, &cfg.pretrain).unwrap();
    let target = &prepared.scenario.target_features;
    let ensemble = run_ensemble(&prepared.model, target, &cfg.train.ensemble).unwrap();
    let refine_cfg = cfg.train.refine_config();
    c.bench_function("ensemble/5000x4", |b| {
        b.iter(|| run_ensemble(&prepared.model, target, &cfg.train.ensemble).unwrap())
    });
    c.bench_function("refine/5000", |b| b.iter(|| refine(&ensemble, &refine_cfg).unwrap()));
}

criterion_group!(benches, sinkhorn, anchors, refinement);
criterion_main!(benches);
