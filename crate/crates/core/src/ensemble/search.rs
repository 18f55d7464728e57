//! Random hyperparameter search scored by k-fold cross-validated accuracy.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LocalDataset;
use crate::error::{Error, Result};
use crate::learners::{accuracy, argmax_rows, ForestConfig, KnnConfig, MlpConfig, Weighting};

use super::boost::BlenderConfig;
use super::stacking::{kfold, out_of_fold_proba, FoldRecord, LearnerConfig, LearnerKind};

/// Where candidate configurations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SearchSpace {
    Knn {
        k: (usize, usize),
        p: (f64, f64),
    },
    Forest {
        n_trees: (usize, usize),
        max_depth: (usize, usize),
    },
    Mlp {
        hidden_layers: (usize, usize),
        neurons: (usize, usize),
        eta0: (f64, f64),
    },
    Blender {
        max_depth: (usize, usize),
        learning_rate: (f64, f64),
    },
    /// An explicit candidate list, evaluated in order.
    Fixed(Vec<LearnerConfig>),
}

impl SearchSpace {
    pub fn reference(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Knn => SearchSpace::Knn { k: (1, 10), p: (1.0, 3.0) },
            LearnerKind::Forest => SearchSpace::Forest {
                n_trees: (100, 500),
                max_depth: (3, 10),
            },
            LearnerKind::Mlp => SearchSpace::Mlp {
                hidden_layers: (1, 4),
                neurons: (1, 300),
                eta0: (0.0001, 0.03),
            },
            LearnerKind::Blender => SearchSpace::Blender {
                max_depth: (3, 10),
                learning_rate: (0.0001, 0.5),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let int = |(lo, hi): (usize, usize), min: usize| lo >= min && lo <= hi;
        let real = |(lo, hi): (f64, f64), min: f64| lo >= min && lo <= hi && hi.is_finite();
        let ok = match self {
            SearchSpace::Knn { k, p } => int(*k, 1) && real(*p, 1.0),
            SearchSpace::Forest { n_trees, max_depth } => int(*n_trees, 1) && int(*max_depth, 1),
            SearchSpace::Mlp {
                hidden_layers,
                neurons,
                eta0,
            } => int(*hidden_layers, 1) && int(*neurons, 1) && real(*eta0, f64::MIN_POSITIVE),
            SearchSpace::Blender {
                max_depth,
                learning_rate,
            } => int(*max_depth, 1) && real(*learning_rate, f64::MIN_POSITIVE),
            SearchSpace::Fixed(list) => !list.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("empty or invalid search space {self:?}")))
        }
    }

    /// Draws one configuration uniformly from the declared ranges.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<LearnerConfig> {
        Some(match self {
            SearchSpace::Knn { k, p } => LearnerConfig::Knn(KnnConfig {
                k: rng.random_range(k.0..=k.1),
                p: uniform(rng, *p),
                weighting: if rng.random_bool(0.5) {
                    Weighting::Uniform
                } else {
                    Weighting::InverseDistance
                },
            }),
            SearchSpace::Forest { n_trees, max_depth } => LearnerConfig::Forest(ForestConfig {
                n_trees: rng.random_range(n_trees.0..=n_trees.1),
                max_depth: rng.random_range(max_depth.0..=max_depth.1),
                bootstrap: true,
                seed: rng.next_u64(),
            }),
            SearchSpace::Mlp {
                hidden_layers,
                neurons,
                eta0,
            } => {
                let layers = rng.random_range(hidden_layers.0..=hidden_layers.1);
                let width = rng.random_range(neurons.0..=neurons.1);
                let eta0 = uniform(rng, *eta0);
                LearnerConfig::Mlp(MlpConfig::new(layers, width, eta0, rng.next_u64()))
            }
            SearchSpace::Blender {
                max_depth,
                learning_rate,
            } => LearnerConfig::Blender(BlenderConfig::new(
                rng.random_range(max_depth.0..=max_depth.1),
                uniform(rng, *learning_rate),
            )),
            SearchSpace::Fixed(_) => return None,
        })
    }

    pub fn candidates(&self, iterations: usize, seed: u64) -> Vec<LearnerConfig> {
        match self {
            SearchSpace::Fixed(list) => list.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..iterations).map(|_| self.sample(&mut rng).unwrap()).collect()
            }
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: LearnerConfig,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub trials: Vec<Trial>,
    pub best: usize,
    /// Out-of-fold probabilities of the winning trial.
    #[serde(skip)]
    pub best_oof: Option<Array2<f64>>,
    #[serde(skip)]
    pub best_folds: Vec<FoldRecord>,
}

impl SearchOutcome {
    pub fn best_config(&self) -> LearnerConfig {
        self.trials[self.best].config
    }

    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Index of the highest score; the earliest one wins ties.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Samples `iterations` candidates (or takes a fixed list) and keeps the one
/// with the highest mean fold accuracy. `val` only feeds blender early
/// stopping; it never enters the scores.
pub fn random_search(
    space: &SearchSpace,
    local: &LocalDataset,
    val: Option<(ArrayView2<'_, f64>, &[usize])>,
    k_folds: usize,
    iterations: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate()?;
    if iterations == 0 && !matches!(space, SearchSpace::Fixed(_)) {
        return Err(Error::InvalidParams("random search needs at least one iteration".into()));
    }
    // folds depend on the seed alone so searches sharing it share folds
    let folds = kfold(local.len(), k_folds, seed)?;
    let candidates = space.candidates(iterations, seed ^ 0x5A3D_1E55);
    let mut trials = Vec::with_capacity(candidates.len());
    let mut best: Option<(Array2<f64>, Vec<FoldRecord>)> = None;
    let mut best_score = f64::NEG_INFINITY;
    for cfg in candidates {
        let (oof, records) = match cfg {
            LearnerConfig::Blender(_) => blender_oof(&cfg, local, val, &folds)?,
            _ => out_of_fold_proba(&cfg, local.inputs.view(), &local.targets, local.n_classes, &folds)?,
        };
        let predicted = argmax_rows(&oof);
        let fold_accuracy: Vec<f64> = folds
            .iter()
            .map(|fold| {
                let p: Vec<usize> = fold.iter().map(|&r| predicted[r]).collect();
                let t: Vec<usize> = fold.iter().map(|&r| local.targets[r]).collect();
                accuracy(&p, &t)
            })
            .collect();
        let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
        if mean_accuracy > best_score {
            best_score = mean_accuracy;
            best = Some((oof, records));
        }
        trials.push(Trial {
            config: cfg,
            fold_accuracy,
            mean_accuracy,
        });
    }
    let means: Vec<f64> = trials.iter().map(|t| t.mean_accuracy).collect();
    let (best_oof, best_folds) = best.unwrap();
    Ok(SearchOutcome {
        best: argmax_first(&means),
        trials,
        best_oof: Some(best_oof),
        best_folds,
    })
}

fn blender_oof(
    cfg: &LearnerConfig,
    local: &LocalDataset,
    val: Option<(ArrayView2<'_, f64>, &[usize])>,
    folds: &[Vec<usize>],
) -> Result<(Array2<f64>, Vec<FoldRecord>)> {
    let rows = local.len();
    let mut out = Array2::zeros((rows, local.n_classes));
    let mut records = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        let mut in_fold = vec![false; rows];
        for &r in fold {
            in_fold[r] = true;
        }
        let fit_rows: Vec<usize> = (0..rows).filter(|&r| !in_fold[r]).collect();
        let fy: Vec<usize> = fit_rows.iter().map(|&r| local.targets[r]).collect();
        let model = cfg.fit(local.inputs.select(Axis(0), &fit_rows).view(), &fy, val, local.n_classes)?;
        let p = crate::learners::Classifier::predict_proba(&model, local.inputs.select(Axis(0), fold).view())?;
        for (i, &r) in fold.iter().enumerate() {
            out.row_mut(r).assign(&p.row(i));
        }
        records.push(FoldRecord {
            learner: LearnerKind::Blender,
            fitted_on: fit_rows,
            predicted: folds[f].clone(),
        });
    }
    Ok((out, records))
}
