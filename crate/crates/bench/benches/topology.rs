use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use optopnet_core::dataset::generate_dataset;
use optopnet_core::generator::{record_rng, sample_configuration, sort_robots, GeneratorConfig};
use optopnet_core::netmodel::build_graph;
use optopnet_core::topology::{largest_cycle, optimal_topology};
use optopnet_core::NetworkParams;
use std::hint::black_box;

fn bench_largest_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("largest_cycle");
    for n in [6usize, 10, 14] {
        let cfg = GeneratorConfig::new(NetworkParams::reference(), n, 11);
        let graphs: Vec<_> = (0..32)
            .map(|i| {
                let mut rng = record_rng(cfg.seed, i);
                let g = build_graph(&sample_configuration(&cfg, &mut rng).unwrap());
                let order = sort_robots(&g, &mut rng);
                (g, order)
            })
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &graphs, |b, graphs| {
            b.iter(|| {
                for (g, order) in graphs {
                    black_box(largest_cycle(g, order).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn bench_optimal_topology(c: &mut Criterion) {
    let cfg = GeneratorConfig::new(NetworkParams::reference(), 10, 5);
    let nets: Vec<_> = (0..32)
        .map(|i| sample_configuration(&cfg, &mut record_rng(cfg.seed, i)).unwrap())
        .collect();
    c.bench_function("optimal_topology_n10", |b| {
        b.iter(|| {
            for net in &nets {
                black_box(optimal_topology(net).unwrap());
            }
        })
    });
}

fn bench_generation(c: &mut Criterion) {
    let cfg = GeneratorConfig::new(NetworkParams::reference(), 10, 7);
    let mut group = c.benchmark_group("generate_dataset");
    group.sample_size(10);
    group.bench_function("200_records_n10", |b| b.iter(|| black_box(generate_dataset(&cfg, 200).unwrap())));
    group.finish();
}

criterion_group!(benches, bench_largest_cycle, bench_optimal_topology, bench_generation);
criterion_main!(benches);
