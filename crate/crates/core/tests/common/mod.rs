//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use optopnet_core::learners::mlp::Network;
use optopnet_core::NetworkGraph;

/// Minimum total length over all spanning trees of the subgraph induced by
/// `vertices`, by enumerating every (k-1)-subset of its links. `None` when
/// the subgraph is disconnected.
pub fn brute_force_mst(g: &NetworkGraph, vertices: &[usize]) -> Option<f64> {
    let k = vertices.len();
    if k <= 1 {
        return Some(0.0);
    }
    let mut edges = Vec::new();
    for (i, &a) in vertices.iter().enumerate() {
        for (j, &b) in vertices.iter().enumerate().skip(i + 1) {
            if g.has_edge(a, b) {
                edges.push((i, j, g.distance(a, b)));
            }
        }
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(k - 1);
    fn rec(
        edges: &[(usize, usize, f64)],
        start: usize,
        need: usize,
        k: usize,
        pick: &mut Vec<usize>,
        best: &mut Option<f64>,
    ) {
        if pick.len() == need {
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(p: &mut [usize], mut v: usize) -> usize {
                while p[v] != v {
                    v = p[v];
                }
                v
            }
            let mut total = 0.0;
            for &e in pick.iter() {
                let (a, b, d) = edges[e];
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    return;
                }
                parent[ra] = rb;
                total += d;
            }
            if best.is_none_or(|b| total < b) {
                *best = Some(total);
            }
            return;
        }
        for e in start..edges.len() {
            if edges.len() - e < need - pick.len() {
                break;
            }
            pick.push(e);
            rec(edges, e + 1, need, k, pick, best);
            pick.pop();
        }
    }
    rec(&edges, 0, k - 1, k, &mut pick, &mut best);
    best
}

/// Largest relative error between analytic and central-difference gradients
/// of the regularised loss, over every weight and bias.
pub fn gradient_check(net: &Network, x: &Array2<f64>, y: &[usize], l2: f64, h: f64) -> f64 {
    let (_, _, grads) = net.loss_and_gradient(x, y, l2);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (l, g) in grads.iter().enumerate() {
        for ((i, j), &analytic) in g.weights.indexed_iter() {
            let orig = probe.layers[l].weights[[i, j]];
            probe.layers[l].weights[[i, j]] = orig + h;
            let up = probe.loss(x, y, l2);
            probe.layers[l].weights[[i, j]] = orig - h;
            let down = probe.loss(x, y, l2);
            probe.layers[l].weights[[i, j]] = orig;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        }
        for (i, &analytic) in g.bias.indexed_iter() {
            let orig = probe.layers[l].bias[i];
            probe.layers[l].bias[i] = orig + h;
            let up = probe.loss(x, y, l2);
            probe.layers[l].bias[i] = orig - h;
            let down = probe.loss(x, y, l2);
            probe.layers[l].bias[i] = orig;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// Relative error with an absolute floor so near-zero gradients compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
