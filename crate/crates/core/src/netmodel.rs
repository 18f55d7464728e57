//! Geometric network model: robots in a square zone, radial link classes and
//! the network graph derived from them.
//!
//! Two robots at distance `d` share a *reliable* link when `d <= delta`, a
//! *critical* (degraded) link when `delta < d <= delta + epsilon`, and no link
//! otherwise. Comparisons are exact; there is no tolerance band.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zone side length, connectivity threshold and tension bound factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub zone_range: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl NetworkParams {
    pub fn new(zone_range: f64, delta: f64, epsilon: f64) -> Result<Self> {
        let p = NetworkParams {
            zone_range,
            delta,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit zone, `delta = 0.5`, `epsilon = 0.1`.
    pub fn reference() -> Self {
        NetworkParams {
            zone_range: 1.0,
            delta: 0.5,
            epsilon: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.zone_range.is_finite() && self.delta.is_finite() && self.epsilon.is_finite();
        if !finite || self.zone_range <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "zone range must be positive, got {}",
                self.zone_range
            )));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.delta) {
            return Err(Error::InvalidParams(format!(
                "epsilon must satisfy 0 < epsilon < delta, got epsilon={} delta={}",
                self.epsilon, self.delta
            )));
        }
        Ok(())
    }

    /// Largest distance at which a link still exists.
    pub fn link_range(&self) -> f64 {
        self.delta + self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Robot {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        Robot { id, x, y }
    }

    pub fn distance(&self, other: &Robot) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A placed set of robots together with its connectivity parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotNetwork {
    params: NetworkParams,
    robots: Vec<Robot>,
}

impl RobotNetwork {
    /// Validates ids (exactly `0..n` in order), coordinates inside the zone and `n >= 3`.
    pub fn new(params: NetworkParams, robots: Vec<Robot>) -> Result<Self> {
        params.validate()?;
        if robots.len() < 3 {
            return Err(Error::InvalidParams(format!(
                "a robot network needs at least 3 robots, got {}",
                robots.len()
            )));
        }
        for (i, r) in robots.iter().enumerate() {
            if r.id != i {
                return Err(Error::InvalidParams(format!(
                    "robot at position {i} has id {}",
                    r.id
                )));
            }
            let inside = |v: f64| (0.0..=params.zone_range).contains(&v);
            if !inside(r.x) || !inside(r.y) {
                return Err(Error::InvalidParams(format!(
                    "robot {i} at ({}, {}) lies outside the zone [0, {}]^2",
                    r.x, r.y, params.zone_range
                )));
            }
        }
        Ok(RobotNetwork { params, robots })
    }

    /// Builds a network from a flat `x0, y0, x1, y1, ...` coordinate row.
    pub fn from_coords(params: NetworkParams, coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "coordinate row has odd length {}",
                coords.len()
            )));
        }
        let robots = coords
            .chunks_exact(2)
            .enumerate()
            .map(|(i, c)| Robot::new(i, c[0], c[1]))
            .collect();
        RobotNetwork::new(params, robots)
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    /// Flat coordinate row in robot-id order.
    pub fn coords(&self) -> Vec<f64> {
        self.robots.iter().flat_map(|r| [r.x, r.y]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkClass {
    Reliable,
    Critical,
    Disconnected,
}

impl LinkClass {
    pub fn is_link(self) -> bool {
        self != LinkClass::Disconnected
    }
}

pub fn classify_distance(d: f64, p: &NetworkParams) -> LinkClass {
    if d <= p.delta {
        LinkClass::Reliable
    } else if d <= p.delta + p.epsilon {
        LinkClass::Critical
    } else {
        LinkClass::Disconnected
    }
}

pub fn classify_link(a: &Robot, b: &Robot, p: &NetworkParams) -> LinkClass {
    debug_assert_ne!(a.id, b.id, "a robot has no link to itself");
    classify_distance(a.distance(b), p)
}

/// Undirected network graph with cached pairwise distances.
///
/// Link classes and distances are stored as dense `n x n` tables; only
/// reliable and critical pairs count as edges.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    class: Vec<LinkClass>,
    dist: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl NetworkGraph {
    /// Builds the graph over arbitrary positions; vertex `i` is `positions[i]`.
    pub fn from_positions(params: &NetworkParams, positions: &[(f64, f64)]) -> Self {
        let n = positions.len();
        let mut class = vec![LinkClass::Disconnected; n * n];
        let mut dist = vec![0.0; n * n];
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (xi, yi) = positions[i];
                let (xj, yj) = positions[j];
                let d = (xi - xj).hypot(yi - yj);
                let c = classify_distance(d, params);
                class[i * n + j] = c;
                class[j * n + i] = c;
                dist[i * n + j] = d;
                dist[j * n + i] = d;
                if c.is_link() {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        NetworkGraph {
            n,
            class,
            dist,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Link class of the pair; `Disconnected` for `i == j`.
    pub fn link(&self, i: usize, j: usize) -> LinkClass {
        self.class[i * self.n + j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.link(i, j).is_link()
    }

    pub fn is_reliable(&self, i: usize, j: usize) -> bool {
        i != j && self.link(i, j) == LinkClass::Reliable
    }

    /// Euclidean distance between two vertices (cached for every pair).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Linked neighbours of `i` in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// All edges `(i, j, class)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, LinkClass)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.adjacency[i]
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j, self.link(i, j)))
        })
    }

    /// Reliable set and critical set of `i`.
    pub fn neighbor_sets(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        self.adjacency[i]
            .iter()
            .partition(|&&j| self.link(i, j) == LinkClass::Reliable)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Degree of `i` counting only those edges of `edges` that exist in the graph.
    pub fn degree_within(&self, i: usize, edges: &[(usize, usize)]) -> usize {
        edges
            .iter()
            .filter(|&&(a, b)| (a == i || b == i) && self.has_edge(a, b))
            .count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

pub fn build_graph(net: &RobotNetwork) -> NetworkGraph {
    let positions: Vec<(f64, f64)> = net.robots().iter().map(|r| (r.x, r.y)).collect();
    NetworkGraph::from_positions(net.params(), &positions)
}
