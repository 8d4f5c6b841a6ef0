//! Benchmarks for the data-parallel inner loops. Bench ids carry the active
//! execution mode, so running
//!
//!     cargo bench -p delome-core
//!     cargo bench -p delome-core --no-default-features
//!
//! produces directly comparable `parallel` vs `sequential` entries.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use delome_core::*;

fn fixture_graph(nodes_per_block: usize, blocks: usize, feature_dim: usize) -> SparseGraph {
    generate_sbm(&SbmParams {
        block_sizes: vec![nodes_per_block; blocks],
        intra_prob: 0.1,
        inter_prob: 0.01,
        feature_dim,
        feature_center_scale: 1.0,
        seed: 42,
    })
    .unwrap()
}

fn bench_propagate(c: &mut Criterion) {
    let graph = fixture_graph(500, 4, 32);
    let s = normalize_adjacency(&graph);
    c.bench_function(&format!("propagate_k2_2000x32/{}", exec::mode()), |b| {
        b.iter(|| black_box(propagate(&s, graph.features(), 2).unwrap()))
    });
}

fn bench_condense(c: &mut Criterion) {
    let graph = fixture_graph(100, 4, 16);
    let stream = build_stream(&graph, 4, 1).unwrap();
    let task = stream.tasks()[0].clone();
    let cfg = CondenseConfig {
        budget_per_class: 8,
        epochs: 20,
        learning_rate: 0.01,
        init_seed: 1,
        optimizer: OptimizerKind::Adam,
        ..Default::default()
    };
    c.bench_function(
        &format!("condense_20_epochs_4_classes/{}", exec::mode()),
        |b| b.iter(|| black_box(condense(&task, &cfg).unwrap())),
    );
}

fn bench_run_stream(c: &mut Criterion) {
    let graph = fixture_graph(40, 8, 8);
    let stream = build_stream(&graph, 2, 3).unwrap();
    let mut cfg = ReplayConfig::new(Strategy::Delome, 4);
    cfg.optimizer.epochs = 50;
    cfg.condense.epochs = 20;
    cfg.condense.learning_rate = 0.01;
    cfg.condense.optimizer = OptimizerKind::Adam;
    c.bench_function(
        &format!("run_stream_delome_4_tasks/{}", exec::mode()),
        |b| b.iter(|| black_box(run_stream(&stream, &cfg.clone().with_run_seed(0)).unwrap())),
    );
}

fn bench_multi_seed(c: &mut Criterion) {
    let graph = fixture_graph(40, 4, 8);
    let stream = build_stream(&graph, 2, 5).unwrap();
    let mut cfg = ReplayConfig::new(Strategy::SampledMemoryReplay, 4);
    cfg.optimizer.epochs = 50;
    let seeds: Vec<u64> = (0..4).collect();
    c.bench_with_input(
        BenchmarkId::new("run_seeds_x4", exec::mode()),
        &seeds,
        |b, seeds| b.iter(|| black_box(run_seeds(&stream, &cfg, seeds).unwrap())),
    );
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_propagate, bench_condense, bench_run_stream, bench_multi_seed
}
criterion_main!(benches);
