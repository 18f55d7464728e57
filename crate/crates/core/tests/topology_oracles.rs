mod common;

use optopnet_core::dataset::embed;
use optopnet_core::generator::{record_rng, sample_configuration, sort_robots, GeneratorConfig};
use optopnet_core::netmodel::build_graph;
use optopnet_core::topology::{
    enumerate_cycles_oracle, largest_cycle, optimal_topology, optimal_topology_for_graph, validate_topology,
};
use optopnet_core::NetworkParams;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn config(n: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig::new(NetworkParams::reference(), n, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn largest_cycle_matches_enumeration(n in 4usize..=9, seed in any::<u64>()) {
        let cfg = config(n, seed);
        let mut rng = record_rng(seed, 0);
        let g = build_graph(&sample_configuration(&cfg, &mut rng).unwrap());
        let order = sort_robots(&g, &mut rng);
        let found = largest_cycle(&g, &order).unwrap();
        let cycles = enumerate_cycles_oracle(&g).unwrap();
        let longest = cycles.iter().map(Vec::len).max().unwrap();
        prop_assert_eq!(found.len(), longest);
        // the result is a real cycle of reliable links
        let v = found.vertices();
        for i in 0..v.len() {
            prop_assert!(g.is_reliable(v[i], v[(i + 1) % v.len()]));
        }
    }

    #[test]
    fn exploration_order_does_not_matter(n in 4usize..=9, seed in any::<u64>()) {
        let cfg = config(n, seed);
        let mut rng = record_rng(seed, 1);
        let g = build_graph(&sample_configuration(&cfg, &mut rng).unwrap());
        let ascending: Vec<usize> = (0..n).collect();
        let mut shuffled = ascending.clone();
        shuffled.shuffle(&mut rng);
        let (a, ca) = optimal_topology_for_graph(&g, &ascending).unwrap();
        let (b, cb) = optimal_topology_for_graph(&g, &shuffled).unwrap();
        prop_assert_eq!(a.cycle, b.cycle);
        prop_assert_eq!(ca, cb);
    }

    #[test]
    fn branches_are_minimum_spanning_trees(n in 4usize..=10, seed in any::<u64>()) {
        let net = sample_configuration(&config(n, seed), &mut record_rng(seed, 2)).unwrap();
        let g = build_graph(&net);
        let (topo, clusters) = optimal_topology(&net).unwrap();
        prop_assert!(validate_topology(&g, &topo).is_valid());
        for anchor in clusters.anchors() {
            let mut vertices = vec![anchor];
            vertices.extend(clusters.members(anchor));
            if vertices.len() > 7 {
                continue;
            }
            let tree: f64 = topo
                .branches
                .iter()
                .filter(|b| vertices.contains(&b.edge.0) && vertices.contains(&b.edge.1))
                .map(|b| g.distance(b.edge.0, b.edge.1))
                .sum();
            let best = common::brute_force_mst(&g, &vertices).unwrap();
            prop_assert!((tree - best).abs() <= 1e-9, "cluster {anchor}: {tree} vs {best}");
        }
    }

    #[test]
    fn labels_are_fixed_point_closed(n in 3usize..=10, seed in any::<u64>()) {
        let net = sample_configuration(&config(n, seed), &mut record_rng(seed, 3)).unwrap();
        let (topo, clusters) = optimal_topology(&net).unwrap();
        let rec = embed(&net, &clusters);
        prop_assert!(rec.labels.iter().all(|&l| rec.labels[l] == l));
        prop_assert_eq!(rec.decode(), clusters);
        for &v in topo.cycle.vertices() {
            prop_assert_eq!(rec.labels[v], v);
        }
    }
}
