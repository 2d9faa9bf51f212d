use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clearance_bench::{dataset, encoded};
use clearance_core::features::{encode, fit_schema, FeatureOptions};
use clearance_core::models::{
    fit_gbm, fit_penalized_logistic, fit_xgboost, Hyperparameters, Penalty,
};
use clearance_core::shap::{tree_shap, TreeShapMode};

fn bench_encode(c: &mut Criterion) {
    let d = dataset(20_000, 1);
    let schema = fit_schema(&d, &FeatureOptions::default()).unwrap();
    c.bench_function("encode_20k", |b| {
        b.iter(|| encode(&d, &schema).unwrap());
    });
}

fn bench_boosting(c: &mut Criterion) {
    let m = encoded(10_000, 2);
    let mut group = c.benchmark_group("boosting_10k");
    group.sample_size(10);
    for trees in [20usize, 50] {
        group.bench_with_input(BenchmarkId::new("xgboost", trees), &trees, |b, &t| {
            b.iter(|| fit_xgboost(&m, &Hyperparameters::xgboost(t, 0.5, 0.0, 0)).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("gbm", trees), &trees, |b, &t| {
            b.iter(|| fit_gbm(&m, &Hyperparameters::gbm(t, 0.5, 0)).unwrap());
        });
    }
    group.finish();
}

fn bench_linear(c: &mut Criterion) {
    let m = encoded(5_000, 3);
    let mut group = c.benchmark_group("logistic_5k");
    group.sample_size(10);
    group.bench_function("elastic_net", |b| {
        b.iter(|| {
            fit_penalized_logistic(
                &m,
                &Hyperparameters::logistic(Penalty::ElasticNet, 1.0, 0.5),
            )
            .unwrap()
        });
    });
    group.finish();
}

fn bench_tree_shap(c: &mut Criterion) {
    let m = encoded(10_000, 4);
    let model = fit_xgboost(&m, &Hyperparameters::xgboost(50, 0.5, 0.0, 0)).unwrap();
    c.bench_function("tree_shap_cover_per_row", |b| {
        let mut i = 0usize;
        b.iter(|| {
            i = (i + 1) % m.n_rows();
            tree_shap(&model, m.row(i), TreeShapMode::Cover, "r").unwrap()
        });
    });
}

criterion_group!(
    benches,
    bench_encode,
    bench_boosting,
    bench_linear,
    bench_tree_shap
);
criterion_main!(benches);
