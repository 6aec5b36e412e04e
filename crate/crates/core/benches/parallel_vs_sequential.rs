use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use salbench_core::data::{MetricId, ModelOracle};
use salbench_core::exec::Executor;
use salbench_core::metrics::{evaluate_batch, MetricConfig, Observation};
use salbench_core::rng;
use salbench_core::tinynet::{Architecture, Recipe, SyntheticDataset};
use salbench_core::xai::{explain, Method, XaiConfig};
use salbench_core::Tensor;

fn executors() -> Vec<(&'static str, Executor)> {
    vec![
        ("sequential", Executor::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Executor::Parallel),
    ]
}

fn bench(c: &mut Criterion) {
    let recipe = Recipe::BrightQuadrant;
    let m = recipe.modality();
    let net = Architecture::default_for(recipe).build(7).unwrap();
    let data = SyntheticDataset::generate(recipe, 32, 11).unwrap();
    let targets: Vec<usize> = data.samples.iter().map(|s| net.predicted_class(&s.data).unwrap()).collect();
    let cfg = XaiConfig::new(Method::InputXGradient);
    let maps: Vec<Tensor> = data
        .samples
        .iter()
        .zip(&targets)
        .map(|(s, &t)| explain(&net, &s.data, m, t, &cfg, &[]).unwrap().values)
        .collect();
    let batch: Vec<Observation> = data
        .samples
        .iter()
        .zip(&maps)
        .zip(&targets)
        .map(|((s, map), &t)| Observation {
            model: &net,
            x: &s.data,
            modality: m,
            map,
            target: t,
            label: s.label,
            explainer: None,
        })
        .collect();
    let metric_cfg = MetricConfig {
        seed: rng::derive(7, 1),
        ..MetricConfig::default()
    };

    let mut group = c.benchmark_group("evaluate_batch");
    group.sample_size(10);
    for metric in [MetricId::Pf, MetricId::Fc] {
        for (name, exec) in executors() {
            group.bench_with_input(BenchmarkId::new(metric.as_str(), name), &exec, |b, &exec| {
                b.iter(|| evaluate_batch(metric, black_box(&batch), &metric_cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
