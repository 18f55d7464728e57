//! Random forest of CART trees: bootstrap rows, Gini splits over a random
//! `sqrt(F)` feature subset at every node, leaf class frequencies averaged
//! across trees.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{check_width, observed_classes, Classifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 {
            return Err(Error::InvalidParams(format!(
                "forest needs n_trees >= 1 and max_depth >= 1, got {} and {}",
                self.n_trees, self.max_depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class counts over the forest's observed classes.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, row: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Grower<'a> {
    x: &'a Array2<f64>,
    /// Local class index per training row.
    y: &'a [usize],
    n_local: usize,
    max_depth: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_local];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn grow<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let counts = self.counts(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || rows.len() < 2 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts, rng) else {
            return id;
        };
        let mut split_at = 0;
        for i in 0..rows.len() {
            if self.x[[rows[i], feature]] <= threshold {
                rows.swap(i, split_at);
                split_at += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split_at);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Maximises `sum(cL^2)/nL + sum(cR^2)/nR`, i.e. minimises the weighted
    /// Gini impurity of the children.
    fn best_split<R: Rng>(&self, rows: &[usize], counts: &[u32], rng: &mut R) -> Option<(usize, f64)> {
        let n_features = self.x.ncols();
        let features = sample(rng, n_features, self.max_features.min(n_features));
        let total = rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in features.iter() {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            let mut left = vec![0f64; self.n_local];
            let mut right: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let mut sq_left = 0.0;
            let mut sq_right: f64 = right.iter().map(|c| c * c).sum();
            for i in 0..pairs.len() - 1 {
                let c = pairs[i].1;
                sq_left += 2.0 * left[c] + 1.0;
                left[c] += 1.0;
                sq_right -= 2.0 * right[c] - 1.0;
                right[c] -= 1.0;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let n_left = (i + 1) as f64;
                let score = sq_left / n_left + sq_right / (total - n_left);
                if best.is_none_or(|b| score > b.0) {
                    let (a, b) = (pairs[i].0, pairs[i + 1].0);
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some((score, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_classes: usize,
    n_features: usize,
    /// Global class ids seen during training; leaf counts index into this.
    classes: Vec<usize>,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, config: ForestConfig) -> Result<Self> {
        config.validate()?;
        if y.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if x.nrows() != y.len() {
            return Err(Error::WidthMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let classes = observed_classes(y);
        let local: Vec<usize> = y.iter().map(|c| classes.binary_search(c).unwrap()).collect();
        let x = x.to_owned();
        let n = y.len();
        let max_features = ((x.ncols() as f64).sqrt().floor() as usize).max(1);
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let mut rows: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut grower = Grower {
                    x: &x,
                    y: &local,
                    n_local: classes.len(),
                    max_depth: config.max_depth,
                    max_features,
                    nodes: Vec::new(),
                };
                grower.grow(&mut rows, 0, &mut rng);
                Tree { nodes: grower.nodes }
            })
            .collect();
        Ok(ForestModel {
            config,
            n_classes,
            n_features: x.ncols(),
            classes,
            trees,
        })
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

impl Classifier for ForestModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_features, &x)?;
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (q, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            let mut acc = vec![0.0; self.classes.len()];
            for tree in &self.trees {
                let counts = tree.leaf(&row);
                let total: u32 = counts.iter().sum();
                for (a, &c) in acc.iter_mut().zip(counts) {
                    *a += c as f64 / total as f64;
                }
            }
            let sum: f64 = acc.iter().sum();
            for (local, &global) in self.classes.iter().enumerate() {
                out[[q, global]] = acc[local] / sum;
            }
        }
        Ok(out)
    }
}
