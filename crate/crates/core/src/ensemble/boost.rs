//! Gradient-boosted regression trees under the multiclass softmax objective.
//!
//! Every round fits one tree per class to the first and second derivatives
//! of the cross-entropy, using histogram splits over pre-binned features.
//! Leaf weights are `-G / (H + lambda)` shrunk by the learning rate. If a
//! round would raise the training loss its step is halved until it does
//! not, so the training loss trace never increases.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{accuracy, check_width, Classifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlenderConfig {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_rounds: usize,
    /// Stop after this many rounds without validation improvement.
    pub early_stopping_rounds: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl BlenderConfig {
    pub fn new(max_depth: usize, learning_rate: f64) -> Self {
        BlenderConfig {
            max_depth,
            learning_rate,
            n_rounds: 200,
            early_stopping_rounds: 20,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_bins: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.n_rounds == 0 || self.max_bins < 2 {
            return Err(Error::InvalidParams(format!("degenerate blender configuration {self:?}")));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::InvalidParams(format!("invalid blender rates {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    /// Fraction of the full step kept after backtracking.
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] < *threshold { *left } else { *right },
                RegNode::Leaf(v) => return *v,
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for node in &mut self.nodes {
            if let RegNode::Leaf(v) = node {
                *v *= s;
            }
        }
    }
}

/// Per-feature cut points; bin `b` holds values in `[cuts[b-1], cuts[b])`.
struct Binned {
    cuts: Vec<Vec<f64>>,
    bins: Vec<Vec<u16>>, // bins[feature][row]
}

impl Binned {
    fn new(x: &Array2<f64>, max_bins: usize) -> Self {
        let mut cuts = Vec::with_capacity(x.ncols());
        let mut bins = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut values: Vec<f64> = col.to_vec();
            values.sort_unstable_by(f64::total_cmp);
            values.dedup();
            let c: Vec<f64> = if values.len() <= max_bins {
                values.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
            } else {
                let mut c: Vec<f64> = (1..max_bins)
                    .map(|q| {
                        let pos = q * values.len() / max_bins;
                        values[pos - 1] + (values[pos] - values[pos - 1]) / 2.0
                    })
                    .collect();
                c.dedup();
                c
            };
            bins.push(col.iter().map(|&v| c.partition_point(|&cut| cut <= v) as u16).collect());
            cuts.push(c);
        }
        Binned { cuts, bins }
    }
}

struct TreeBuilder<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a BlenderConfig,
    nodes: Vec<RegNode>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(RegNode::Leaf(-g / (h + self.cfg.lambda)));
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return id;
        }
        let Some((feature, bin)) = self.best_split(rows, g, h) else {
            return id;
        };
        let column = &self.binned.bins[feature];
        let mut split_at = 0;
        for i in 0..rows.len() {
            if column[rows[i]] as usize <= bin {
                rows.swap(i, split_at);
                split_at += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split_at);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = RegNode::Split {
            feature,
            threshold: self.binned.cuts[feature][bin],
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<(usize, usize)> {
        let lambda = self.cfg.lambda;
        let mcw = self.cfg.min_child_weight;
        let parent = g * g / (h + lambda);
        let mut best: Option<(f64, usize, usize)> = None;
        let mut hist_g = Vec::new();
        let mut hist_h = Vec::new();
        for (f, cuts) in self.binned.cuts.iter().enumerate() {
            if cuts.is_empty() {
                continue;
            }
            let n_bins = cuts.len() + 1;
            hist_g.clear();
            hist_g.resize(n_bins, 0.0);
            hist_h.clear();
            hist_h.resize(n_bins, 0.0);
            let column = &self.binned.bins[f];
            for &r in rows {
                let b = column[r] as usize;
                hist_g[b] += self.grad[r];
                hist_h[b] += self.hess[r];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..n_bins - 1 {
                gl += hist_g[b];
                hl += hist_h[b];
                let (gr, hr) = (g - gl, h - hl);
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b));
                }
            }
        }
        best.map(|(_, f, b)| (f, b))
    }
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Mean cross-entropy and accuracy of raw scores against local class targets.
fn score_stats(scores: &Array2<f64>, targets: &[usize]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut hits = 0usize;
    let mut buf = vec![0.0; scores.ncols()];
    for (row, &t) in scores.rows().into_iter().zip(targets) {
        buf.copy_from_slice(row.as_slice().unwrap());
        softmax_in_place(&mut buf);
        loss -= buf[t].max(f64::MIN_POSITIVE).ln();
        let mut best = 0;
        for k in 1..buf.len() {
            if buf[k] > buf[best] {
                best = k;
            }
        }
        hits += usize::from(best == t);
    }
    let n = targets.len() as f64;
    (loss / n, hits as f64 / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub config: BlenderConfig,
    pub n_classes: usize,
    n_features: usize,
    /// Global ids of the classes seen in training.
    classes: Vec<usize>,
    /// `rounds[r][k]` is the tree for local class `k` in round `r`.
    rounds: Vec<Vec<RegTree>>,
    /// Every round that was run, including those dropped by early stopping.
    pub trace: Vec<RoundStats>,
}

impl BoostedTrees {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        val: Option<(ArrayView2<'_, f64>, &[usize])>,
        n_classes: usize,
        config: BlenderConfig,
    ) -> Result<Self> {
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
        let classes = crate::learners::observed_classes(y);
        let mut model = BoostedTrees {
            config,
            n_classes,
            n_features: x.ncols(),
            classes: classes.clone(),
            rounds: Vec::new(),
            trace: Vec::new(),
        };
        if classes.len() == 1 {
            return Ok(model);
        }
        let k = classes.len();
        let local = |t: &usize| classes.binary_search(t).ok();
        let y_local: Vec<usize> = y.iter().map(|t| local(t).unwrap()).collect();
        let x = x.as_standard_layout().into_owned();
        let binned = Binned::new(&x, config.max_bins);
        let rows_n = y.len();

        // validation rows whose class was never seen cannot be scored locally
        let val = match val {
            Some((vx, vy)) => {
                check_width(x.ncols(), &vx)?;
                let keep: Vec<usize> = (0..vy.len()).filter(|&r| local(&vy[r]).is_some()).collect();
                let vx = vx.select(ndarray::Axis(0), &keep);
                let vy: Vec<usize> = keep.iter().map(|&r| local(&vy[r]).unwrap()).collect();
                (!vy.is_empty()).then_some((vx, vy))
            }
            None => None,
        };

        let mut scores = Array2::<f64>::zeros((rows_n, k));
        let mut val_scores = val.as_ref().map(|(vx, _)| Array2::<f64>::zeros((vx.nrows(), k)));
        let (mut loss, _) = score_stats(&scores, &y_local);
        let mut grad = vec![vec![0.0; rows_n]; k];
        let mut hess = vec![vec![0.0; rows_n]; k];
        let mut probs = vec![0.0; k];
        let mut best_val = f64::INFINITY;
        let mut best_rounds = 0;
        let mut since_best = 0;

        for round in 0..config.n_rounds {
            for r in 0..rows_n {
                probs.copy_from_slice(scores.row(r).as_slice().unwrap());
                softmax_in_place(&mut probs);
                for c in 0..k {
                    let p = probs[c];
                    let target = if y_local[r] == c { 1.0 } else { 0.0 };
                    grad[c][r] = p - target;
                    hess[c][r] = (2.0 * p * (1.0 - p)).max(1e-16);
                }
            }
            let mut trees: Vec<RegTree> = (0..k)
                .map(|c| {
                    let mut builder = TreeBuilder {
                        binned: &binned,
                        grad: &grad[c],
                        hess: &hess[c],
                        cfg: &config,
                        nodes: Vec::new(),
                    };
                    let mut rows: Vec<usize> = (0..rows_n).collect();
                    builder.build(&mut rows, 0);
                    let mut tree = RegTree { nodes: builder.nodes };
                    tree.scale(config.learning_rate);
                    tree
                })
                .collect();
            let step = Array2::from_shape_fn((rows_n, k), |(r, c)| {
                trees[c].value(x.row(r).as_slice().unwrap())
            });

            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let candidate = &scores + &(&step * scale);
                let (l, acc) = score_stats(&candidate, &y_local);
                if l <= loss {
                    accepted = Some((candidate, l, acc));
                    break;
                }
                scale *= 0.5;
            }
            let Some((candidate, new_loss, train_acc)) = accepted else {
                // no descent direction left
                break;
            };
            if scale != 1.0 {
                for t in &mut trees {
                    t.scale(scale);
                }
            }
            scores = candidate;
            loss = new_loss;

            let (val_loss, val_acc) = match (&val, &mut val_scores) {
                (Some((vx, vy)), Some(vs)) => {
                    for (r, row) in vx.rows().into_iter().enumerate() {
                        let row = row.to_vec();
                        for c in 0..k {
                            vs[[r, c]] += trees[c].value(&row);
                        }
                    }
                    let (l, a) = score_stats(vs, vy);
                    (Some(l), Some(a))
                }
                _ => (None, None),
            };
            model.rounds.push(trees);
            model.trace.push(RoundStats {
                round,
                train_loss: loss,
                train_acc,
                val_loss,
                val_acc,
                step_scale: scale,
            });
            match val_loss {
                Some(vl) => {
                    if vl < best_val {
                        best_val = vl;
                        best_rounds = model.rounds.len();
                        since_best = 0;
                    } else {
                        since_best += 1;
                        if since_best >= config.early_stopping_rounds {
                            break;
                        }
                    }
                }
                None => best_rounds = model.rounds.len(),
            }
        }
        model.rounds.truncate(best_rounds);
        Ok(model)
    }

    /// Rounds kept in the model (after early stopping).
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn training_loss_non_increasing(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].train_loss <= w[0].train_loss)
    }

    /// Accuracy of the kept rounds on labelled rows.
    pub fn evaluate(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> Result<f64> {
        Ok(accuracy(&self.predict(x)?, y))
    }
}

impl Classifier for BoostedTrees {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_features, &x)?;
        let k = self.classes.len();
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        let mut scores = vec![0.0; k];
        for (q, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            scores.iter_mut().for_each(|s| *s = 0.0);
            for round in &self.rounds {
                for (c, tree) in round.iter().enumerate() {
                    scores[c] += tree.value(&row);
                }
            }
            softmax_in_place(&mut scores);
            for (c, &global) in self.classes.iter().enumerate() {
                out[[q, global]] = scores[c];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_class_is_constant() {
        let x = array![[0.1, 0.2], [0.3, 0.4]];
        let m = BoostedTrees::fit(x.view(), &[3, 3], None, 5, BlenderConfig::new(3, 0.3)).unwrap();
        let p = m.predict_proba(array![[9.0, -1.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.n_rounds(), 0);
    }

    #[test]
    fn one_round_descends_from_uniform() {
        let x = array![[0.0], [0.1], [0.2], [0.8], [0.9], [1.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let mut cfg = BlenderConfig::new(3, 0.3);
        cfg.n_rounds = 1;
        cfg.min_child_weight = 0.0;
        let m = BoostedTrees::fit(x.view(), &y, None, 2, cfg).unwrap();
        assert_eq!(m.trace.len(), 1);
        assert!(m.trace[0].train_loss < std::f64::consts::LN_2);
    }

    #[test]
    fn loss_trace_never_increases() {
        let x = Array2::from_shape_fn((120, 3), |(i, j)| ((i * (j + 3)) % 23) as f64 / 23.0);
        let y: Vec<usize> = (0..120).map(|i| (i * 7 / 11) % 4).collect();
        let m = BoostedTrees::fit(x.view(), &y, None, 4, BlenderConfig::new(6, 0.5)).unwrap();
        assert_eq!(m.trace.len(), 200);
        assert!(m.training_loss_non_increasing());
    }

    #[test]
    fn early_stopping_keeps_best_prefix() {
        let x = Array2::from_shape_fn((80, 2), |(i, j)| ((i * (j + 5)) % 13) as f64);
        let y: Vec<usize> = (0..80).map(|i| (i * 31 % 17) % 3).collect();
        let vx = Array2::from_shape_fn((30, 2), |(i, j)| ((i * (j + 2)) % 11) as f64);
        let vy: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let m = BoostedTrees::fit(x.view(), &y, Some((vx.view(), &vy)), 3, BlenderConfig::new(8, 0.5)).unwrap();
        assert!(m.trace.len() < 200);
        let best = m
            .trace
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.val_loss.unwrap().total_cmp(&b.1.val_loss.unwrap()))
            .unwrap()
            .0;
        assert_eq!(m.n_rounds(), best + 1);
    }
}
