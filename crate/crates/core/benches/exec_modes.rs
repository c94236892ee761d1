use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tracesvm::prelude::*;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn corpus_config() -> GeneratorConfig {
    GeneratorConfig { n_traces: 300, ..GeneratorConfig::default() }
}

fn bench_generate(c: &mut Criterion) {
    let cfg = corpus_config();
    let mut g = c.benchmark_group("generate");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| generate(black_box(&cfg), exec).unwrap())
        });
    }
    g.finish();
}

fn bench_vectorize(c: &mut Criterion) {
    let traces = generate(&corpus_config(), Exec::default()).unwrap().traces;
    let mut g = c.benchmark_group("vectorizer_fit");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                Vectorizer::fit(black_box(&traces), NgramRange::default(), IdfOptions::default(), exec).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_grid(c: &mut Criterion) {
    let traces = generate(&corpus_config(), Exec::default()).unwrap().traces;
    let (fit, val) = train_test_split(&traces, &SplitSpec::default()).unwrap();
    let (v, x_fit) = Vectorizer::fit(&fit, NgramRange::default(), IdfOptions::default(), Exec::default()).unwrap();
    let x_val = v.transform(&val, Exec::default());
    let alphas = [1.0, 1e-2, 1e-4, 1e-6];
    let tols = [1e-1, 1e-3];
    let mut g = c.benchmark_group("grid_search");
    g.sample_size(10);
    for base in [TrainerConfig::Sgd(SgdConfig::default()), TrainerConfig::DualCd(DualConfig::default())] {
        for (name, exec) in MODES {
            let id = BenchmarkId::new(base.kind().as_str(), name);
            g.bench_with_input(id, &exec, |b, &exec| {
                b.iter(|| grid_search(&x_fit, &x_val, &base, &alphas, &tols, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_generate, bench_vectorize, bench_grid);
criterion_main!(benches);
