//! Random connected robot configurations.
//!
//! Robots are placed one at a time with coordinates drawn uniformly from the
//! zone (x first, then y). Every robot after the first must land within link
//! range of a robot already placed, otherwise its position is redrawn.
//! Optionally the finished configuration must also contain a cycle of
//! reliable links, otherwise the whole configuration is drawn again.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{classify_distance, LinkClass, NetworkGraph, NetworkParams, Robot, RobotNetwork};

pub const DEFAULT_MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub params: NetworkParams,
    pub n: usize,
    pub seed: u64,
    pub max_resamples: usize,
    pub require_backbone: bool,
}

impl GeneratorConfig {
    pub fn new(params: NetworkParams, n: usize, seed: u64) -> Self {
        GeneratorConfig {
            params,
            n,
            seed,
            max_resamples: DEFAULT_MAX_RESAMPLES,
            require_backbone: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 3 {
            return Err(Error::InvalidParams(format!(
                "robot count must be at least 3, got {}",
                self.n
            )));
        }
        if self.max_resamples == 0 {
            return Err(Error::InvalidParams("max_resamples must be positive".into()));
        }
        Ok(())
    }
}

/// Independent random stream for record `index` of a run seeded with `seed`.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_configuration<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<RobotNetwork> {
    cfg.validate()?;
    let z = cfg.params.zone_range;
    for _ in 0..cfg.max_resamples {
        let mut placed: Vec<(f64, f64)> = Vec::with_capacity(cfg.n);
        for i in 0..cfg.n {
            let mut accepted = false;
            for _ in 0..cfg.max_resamples {
                let x = rng.random::<f64>() * z;
                let y = rng.random::<f64>() * z;
                let linked = i == 0
                    || placed.iter().any(|&(px, py)| {
                        classify_distance((x - px).hypot(y - py), &cfg.params).is_link()
                    });
                if linked {
                    placed.push((x, y));
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::ResampleLimitExceeded {
                    limit: cfg.max_resamples,
                    what: format!("robot {i}"),
                });
            }
        }
        if cfg.require_backbone && !has_reliable_cycle(&NetworkGraph::from_positions(&cfg.params, &placed)) {
            continue;
        }
        let robots = placed
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| Robot::new(i, x, y))
            .collect();
        return RobotNetwork::new(cfg.params, robots);
    }
    Err(Error::ResampleLimitExceeded {
        limit: cfg.max_resamples,
        what: "a configuration with a reliable cycle".into(),
    })
}

/// True when the reliable-edge subgraph is not a forest.
pub fn has_reliable_cycle(g: &NetworkGraph) -> bool {
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (i, j, class) in g.edges() {
        if class != LinkClass::Reliable {
            continue;
        }
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a == b {
            return true;
        }
        parent[a] = b;
    }
    false
}

/// Vertex order: descending reliable-set size, then descending critical-set
/// size, remaining ties in seeded random order.
pub fn sort_robots<R: Rng + ?Sized>(g: &NetworkGraph, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let key = |i: usize| {
        let (rel, crit) = g.neighbor_sets(i);
        (rel.len(), crit.len())
    };
    order.sort_by_key(|&i| std::cmp::Reverse(key(i)));
    order
}
