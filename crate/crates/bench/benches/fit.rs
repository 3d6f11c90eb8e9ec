use criterion::{criterion_group, criterion_main, Criterion};
use statematch::analysis::{fit_coherent, fit_pipeline, lm::LmOptions, CoherentModel, FitConfig};
use statematch::engine::phi0_grid;
use statematch::CouplingMap;
use statematch_bench::{native, noisy, records, EPSILON, THETA0};

fn coherent(c: &mut Criterion) {
    let model =
        CoherentModel::for_grid(EPSILON, THETA0, 1, &phi0_grid(50), &CouplingMap::linear(2), &[0, 1]).unwrap();
    let truth = [0.02, -0.03, 0.015];
    let targets = model.evaluate(&truth).unwrap();
    c.bench_function("model_evaluate/n1_50", |b| b.iter(|| model.evaluate(&truth).unwrap()));
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("coherent/n1_50", |b| {
        b.iter(|| fit_coherent(&targets, &model, &[0.1; 3], &LmOptions::default()).unwrap())
    });
    let spec = noisy(&native(1, 0.0));
    let data = records(50, &spec, 3);
    g.bench_function("pipeline/n1_50", |b| {
        b.iter(|| fit_pipeline(&data, &FitConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, coherent);
criterion_main!(benches);
