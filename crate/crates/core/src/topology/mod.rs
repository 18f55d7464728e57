//! Optimal cycle-plus-branch topologies.
//!
//! A topology is a backbone cycle of reliable links plus a forest of branch
//! links hanging every remaining robot off the cycle. The optimal one uses a
//! longest backbone, attaches each robot to its nearest backbone vertex and
//! spans each resulting cluster with a minimum-distance tree.

mod branches;
mod clusters;
mod cycle;
mod text;
mod validate;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generator::sort_robots;
use crate::netmodel::{build_graph, LinkClass, NetworkGraph, RobotNetwork};

pub use branches::{branch_forest, build_branches, spanning_tree, CandidateEdge};
pub use clusters::{assign_clusters, ClusterAssignment};
pub use cycle::{canonicalize, enumerate_cycles_oracle, largest_cycle, MAX_ORACLE_VERTICES, MAX_SEARCH_VERTICES};
pub use text::{parse_topology, TopologyListing};
pub use validate::{validate_topology, CheckResult, ValidityReport};

/// Cyclic vertex sequence kept in canonical rotation and direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackboneCycle {
    vertices: Vec<usize>,
}

impl BackboneCycle {
    pub fn new(vertices: Vec<usize>) -> Self {
        BackboneCycle {
            vertices: canonicalize(&vertices),
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    /// Consecutive pairs including the closing edge.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.vertices.len();
        if k < 2 {
            return Vec::new();
        }
        (0..k)
            .map(|i| (self.vertices[i], self.vertices[(i + 1) % k]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub edge: (usize, usize),
    pub link_class: LinkClass,
}

impl Branch {
    /// Stores the endpoints in ascending order.
    pub fn new(a: usize, b: usize, link_class: LinkClass) -> Self {
        Branch {
            edge: (a.min(b), a.max(b)),
            link_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub cycle: BackboneCycle,
    pub branches: Vec<Branch>,
}

impl Topology {
    /// Attaches link classes from `g` to a parsed listing.
    pub fn from_listing(g: &NetworkGraph, listing: &TopologyListing) -> Self {
        let class = |a: usize, b: usize| {
            if a < g.n() && b < g.n() && a != b {
                g.link(a, b)
            } else {
                LinkClass::Disconnected
            }
        };
        Topology {
            cycle: BackboneCycle {
                vertices: listing.cycle.clone(),
            },
            branches: listing
                .branches
                .iter()
                .map(|&(a, b)| Branch::new(a, b, class(a, b)))
                .collect(),
        }
    }

    /// Cycle edges followed by branch edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = self.cycle.edges();
        e.extend(self.branches.iter().map(|b| b.edge));
        e
    }

    pub fn to_text(&self) -> String {
        text::render(self)
    }
}

/// Topology degrees: edges of the cycle and branches incident to each vertex.
pub fn topology_degrees(g: &NetworkGraph, t: &Topology) -> Vec<usize> {
    let edges = t.edges();
    (0..g.n()).map(|i| g.degree_within(i, &edges)).collect()
}

/// Largest minus smallest topology degree.
pub fn degree_spread(g: &NetworkGraph, t: &Topology) -> usize {
    let d = topology_degrees(g, t);
    match (d.iter().max(), d.iter().min()) {
        (Some(max), Some(min)) => max - min,
        _ => 0,
    }
}

/// Seed of the stream used to shuffle ties in the vertex exploration order.
const EXPLORATION_SEED: u64 = 0x5EED;

/// Full ground-truth pipeline for one configuration.
pub fn optimal_topology(net: &RobotNetwork) -> Result<(Topology, ClusterAssignment)> {
    let g = build_graph(net);
    let order = sort_robots(&g, &mut ChaCha8Rng::seed_from_u64(EXPLORATION_SEED));
    optimal_topology_for_graph(&g, &order)
}

pub fn optimal_topology_for_graph(g: &NetworkGraph, order: &[usize]) -> Result<(Topology, ClusterAssignment)> {
    let cycle = largest_cycle(g, order)?;
    let clusters = assign_clusters(g, &cycle)?;
    let branches = build_branches(g, &cycle, &clusters)?;
    Ok((Topology { cycle, branches }, clusters))
}

/// Rebuilds a topology from a (possibly predicted) cluster assignment.
///
/// Fixed points become the backbone, ordered as the smallest reliable cycle
/// through all of them when one exists and ascending otherwise; each cluster
/// is spanned as far as the graph allows. Inconsistent assignments yield a
/// topology that fails validation rather than an error.
pub fn reconstruct_topology(g: &NetworkGraph, clusters: &ClusterAssignment) -> Topology {
    let anchors = clusters.anchors();
    let order = hamiltonian_order(g, &anchors).unwrap_or_else(|| anchors.clone());
    let cycle = BackboneCycle::new(order);
    let (branches, _) = branch_forest(g, &cycle, clusters);
    Topology { cycle, branches }
}

fn hamiltonian_order(g: &NetworkGraph, vertices: &[usize]) -> Option<Vec<usize>> {
    if vertices.len() < 3 {
        return None;
    }
    // search on the subgraph induced by `vertices`, then map back
    let positions: Vec<usize> = vertices.to_vec();
    let k = positions.len();
    let mut path = vec![0usize];
    let mut used = vec![false; k];
    used[0] = true;
    fn dfs(g: &NetworkGraph, pos: &[usize], path: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let k = pos.len();
        let cur = *path.last().unwrap();
        if path.len() == k {
            return g.is_reliable(pos[cur], pos[0]);
        }
        for next in 1..k {
            if !used[next] && g.is_reliable(pos[cur], pos[next]) {
                used[next] = true;
                path.push(next);
                if dfs(g, pos, path, used) {
                    return true;
                }
                path.pop();
                used[next] = false;
            }
        }
        false
    }
    if dfs(g, &positions, &mut path, &mut used) {
        Some(path.into_iter().map(|i| positions[i]).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::NetworkParams;

    #[test]
    fn three_reliable_robots() {
        let net = RobotNetwork::from_coords(NetworkParams::reference(), &[0.1, 0.1, 0.4, 0.1, 0.2, 0.4]).unwrap();
        let (t, c) = optimal_topology(&net).unwrap();
        assert_eq!(t.cycle.vertices(), &[0, 1, 2]);
        assert!(t.branches.is_empty());
        assert_eq!(c.as_slice(), &[0, 1, 2]);
        let g = build_graph(&net);
        assert_eq!(degree_spread(&g, &t), 0);
    }

    #[test]
    fn cycle_plus_pendant_spread() {
        let p = NetworkParams::new(10.0, 1.0, 0.2).unwrap();
        let g = NetworkGraph::from_positions(&p, &[(0.0, 0.0), (0.8, 0.0), (0.4, 0.6), (1.7, 0.0)]);
        let (t, c) = optimal_topology_for_graph(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(c.as_slice(), &[0, 1, 2, 1]);
        assert_eq!(topology_degrees(&g, &t), vec![2, 3, 2, 1]);
        assert_eq!(degree_spread(&g, &t), 2);
    }

    #[test]
    fn reconstruct_matches_ground_truth() {
        let p = NetworkParams::new(10.0, 1.0, 0.2).unwrap();
        let pos = [(0.0, 0.0), (0.8, 0.0), (0.4, 0.6), (1.7, 0.0), (1.6, 2.2), (0.9, 1.4)];
        let g = NetworkGraph::from_positions(&p, &pos);
        let (t, c) = optimal_topology_for_graph(&g, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(reconstruct_topology(&g, &c), t);
    }
}
