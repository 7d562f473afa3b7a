use bcpnn::config_xai::rho_sweep;
use bcpnn::learning::{train, TrainOptions};
use bcpnn::oracle::GenerativeTable;
use bcpnn::par::Execution;
use bcpnn::Model;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn batch_forward(c: &mut Criterion) {
    let table = GenerativeTable::prototype(16, 6, 8, 0.2, 1);
    let mut model = Model::new(table.config()).unwrap();
    train(&mut model, &table.sample(2000, 1), &TrainOptions::default()).unwrap();
    let li = model.input_layout().clone();
    let queries: Vec<Vec<f64>> = table
        .sample(4096, 2)
        .inputs
        .iter()
        .map(|s| li.one_hot(s).unwrap())
        .collect();
    let mut g = c.benchmark_group("batch_forward");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(queries.len(), |i| model.forward(black_box(&queries[i])).unwrap().posterior))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let table = GenerativeTable::graded_default();
    let data = table.sample(1000, 3);
    let opts = TrainOptions {
        epochs: 2,
        ..TrainOptions::default()
    };
    let mut g = c.benchmark_group("rho_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rho_sweep(&table.config(), &data, &[1.5, 2.0, 4.0, f64::INFINITY], &[0, 1, 2, 3], &opts, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch_forward, sweep);
criterion_main!(benches);
