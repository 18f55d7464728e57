//! Out-of-fold stacking of the three base learners under a boosted blender.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LocalDataset;
use crate::error::{Error, Result};
use crate::learners::{
    accuracy, check_width, Classifier, ForestConfig, ForestModel, KnnConfig, KnnModel, MlpConfig, MlpModel,
};

use super::boost::{BlenderConfig, BoostedTrees};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Knn,
    Forest,
    Mlp,
    Blender,
}

impl LearnerKind {
    pub const BASE: [LearnerKind; 3] = [LearnerKind::Knn, LearnerKind::Forest, LearnerKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Knn => "knn",
            LearnerKind::Forest => "forest",
            LearnerKind::Mlp => "mlp",
            LearnerKind::Blender => "blender",
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters of any learner that takes part in the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerConfig {
    Knn(KnnConfig),
    Forest(ForestConfig),
    Mlp(MlpConfig),
    Blender(BlenderConfig),
}

impl LearnerConfig {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerConfig::Knn(_) => LearnerKind::Knn,
            LearnerConfig::Forest(_) => LearnerKind::Forest,
            LearnerConfig::Mlp(_) => LearnerKind::Mlp,
            LearnerConfig::Blender(_) => LearnerKind::Blender,
        }
    }

    pub fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        val: Option<(ArrayView2<'_, f64>, &[usize])>,
        n_classes: usize,
    ) -> Result<FittedModel> {
        Ok(match *self {
            LearnerConfig::Knn(c) => FittedModel::Knn(KnnModel::fit(x, y, n_classes, c)?),
            LearnerConfig::Forest(c) => FittedModel::Forest(ForestModel::fit(x, y, n_classes, c)?),
            LearnerConfig::Mlp(c) => FittedModel::Mlp(MlpModel::fit(x, y, val, n_classes, c)?),
            LearnerConfig::Blender(c) => FittedModel::Blender(BoostedTrees::fit(x, y, val, n_classes, c)?),
        })
    }
}

impl std::fmt::Display for LearnerConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LearnerConfig::Knn(c) => {
                let w = match c.weighting {
                    crate::learners::Weighting::Uniform => "uniform",
                    crate::learners::Weighting::InverseDistance => "distance",
                };
                write!(f, "k={} p={:.4} weighting={w}", c.k, c.p)
            }
            LearnerConfig::Forest(c) => write!(f, "n_trees={} max_depth={}", c.n_trees, c.max_depth),
            LearnerConfig::Mlp(c) => write!(
                f,
                "hidden_layers={} neurons={} eta0={:.6}",
                c.hidden_layers, c.neurons_per_layer, c.eta0
            ),
            LearnerConfig::Blender(c) => write!(f, "max_depth={} learning_rate={:.6}", c.max_depth, c.learning_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Knn(KnnModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    Blender(BoostedTrees),
}

impl Classifier for FittedModel {
    fn n_classes(&self) -> usize {
        match self {
            FittedModel::Knn(m) => m.n_classes(),
            FittedModel::Forest(m) => m.n_classes(),
            FittedModel::Mlp(m) => m.n_classes(),
            FittedModel::Blender(m) => m.n_classes(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            FittedModel::Knn(m) => m.n_features(),
            FittedModel::Forest(m) => m.n_features(),
            FittedModel::Mlp(m) => m.n_features(),
            FittedModel::Blender(m) => m.n_features(),
        }
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            FittedModel::Knn(m) => m.predict_proba(x),
            FittedModel::Forest(m) => m.predict_proba(x),
            FittedModel::Mlp(m) => m.predict_proba(x),
            FittedModel::Blender(m) => m.predict_proba(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseConfigs {
    pub knn: KnnConfig,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
}

impl BaseConfigs {
    /// In stacked-feature block order.
    pub fn as_array(&self) -> [LearnerConfig; 3] {
        [
            LearnerConfig::Knn(self.knn),
            LearnerConfig::Forest(self.forest),
            LearnerConfig::Mlp(self.mlp),
        ]
    }
}

/// Splits `rows` into `k` shuffled folds whose sizes differ by at most one.
pub fn kfold(rows: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || rows < k {
        return Err(Error::InvalidParams(format!("cannot cut {rows} rows into {k} folds")));
    }
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = rows / k + usize::from(f < rows % k);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Which rows one fold model was fitted on and which it produced features for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub learner: LearnerKind,
    pub fitted_on: Vec<usize>,
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StackingAudit {
    pub n_rows: usize,
    pub folds: Vec<FoldRecord>,
}

impl StackingAudit {
    /// Every row gets exactly one feature block per base learner, never from a
    /// model that saw it.
    pub fn is_leak_free(&self) -> bool {
        LearnerKind::BASE.iter().all(|&kind| {
            let mut produced = vec![0usize; self.n_rows];
            for rec in self.folds.iter().filter(|r| r.learner == kind) {
                let mut seen = vec![false; self.n_rows];
                for &r in &rec.fitted_on {
                    seen[r] = true;
                }
                for &r in &rec.predicted {
                    if seen[r] {
                        return false;
                    }
                    produced[r] += 1;
                }
            }
            produced.iter().all(|&c| c == 1)
        })
    }

    pub fn leaked_rows(&self) -> Vec<(LearnerKind, usize)> {
        let mut out = Vec::new();
        for rec in &self.folds {
            for &r in &rec.predicted {
                if rec.fitted_on.contains(&r) {
                    out.push((rec.learner, r));
                }
            }
        }
        out
    }
}

/// Out-of-fold probabilities: row `r` is predicted by the model fitted on
/// every fold except the one holding `r`.
pub fn out_of_fold_proba(
    cfg: &LearnerConfig,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    folds: &[Vec<usize>],
) -> Result<(Array2<f64>, Vec<FoldRecord>)> {
    let rows = y.len();
    let mut fold_of = vec![usize::MAX; rows];
    for (f, fold) in folds.iter().enumerate() {
        for &r in fold {
            fold_of[r] = f;
        }
    }
    let mut out = Array2::zeros((rows, n_classes));
    let mut records = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let fit_rows: Vec<usize> = (0..rows).filter(|&r| fold_of[r] != f).collect();
        let fx = x.select(Axis(0), &fit_rows);
        let fy: Vec<usize> = fit_rows.iter().map(|&r| y[r]).collect();
        let model = cfg.fit(fx.view(), &fy, None, n_classes)?;
        let p = model.predict_proba(x.select(Axis(0), fold).view())?;
        for (i, &r) in fold.iter().enumerate() {
            out.row_mut(r).assign(&p.row(i));
        }
        records.push(FoldRecord {
            learner: cfg.kind(),
            fitted_on: fit_rows,
            predicted: fold.clone(),
        });
    }
    Ok((out, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedEnsemble {
    pub robot_id: usize,
    pub n_classes: usize,
    pub knn: KnnModel,
    pub forest: ForestModel,
    pub mlp: MlpModel,
    pub blender: BoostedTrees,
}

impl StackedEnsemble {
    /// Base probabilities side by side: knn, forest, mlp.
    pub fn stacked_features(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(join_blocks(&[
            self.knn.predict_proba(x)?,
            self.forest.predict_proba(x)?,
            self.mlp.predict_proba(x)?,
        ]))
    }

    pub fn base_predictions(&self, x: ArrayView2<'_, f64>) -> Result<[Vec<usize>; 3]> {
        Ok([self.knn.predict(x)?, self.forest.predict(x)?, self.mlp.predict(x)?])
    }

    pub fn configs(&self) -> (BaseConfigs, BlenderConfig) {
        (
            BaseConfigs {
                knn: self.knn.config,
                forest: self.forest.config,
                mlp: self.mlp.config,
            },
            self.blender.config,
        )
    }
}

impl Classifier for StackedEnsemble {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.knn.n_features()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_features(), &x)?;
        self.blender.predict_proba(self.stacked_features(x)?.view())
    }
}

/// Out-of-fold stacked features for a whole training split.
pub fn stacked_oof(
    train: &LocalDataset,
    base: &BaseConfigs,
    folds: &[Vec<usize>],
) -> Result<(Array2<f64>, StackingAudit)> {
    let mut blocks = Vec::with_capacity(3);
    let mut audit = StackingAudit {
        n_rows: train.len(),
        folds: Vec::new(),
    };
    for cfg in base.as_array() {
        let (p, recs) = out_of_fold_proba(&cfg, train.inputs.view(), &train.targets, train.n_classes, folds)?;
        blocks.push(p);
        audit.folds.extend(recs);
    }
    Ok((join_blocks(&blocks), audit))
}

pub(crate) fn join_blocks(blocks: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).unwrap()
}

/// Base learners refitted on a whole training split.
#[derive(Debug, Clone)]
pub struct RefitBases {
    pub knn: KnnModel,
    pub forest: ForestModel,
    pub mlp: MlpModel,
}

impl RefitBases {
    /// The MLP records validation curves on `val` while training.
    pub fn fit(train: &LocalDataset, val: &LocalDataset, base: &BaseConfigs) -> Result<Self> {
        let (x, y, n) = (train.inputs.view(), train.targets.as_slice(), train.n_classes);
        Ok(RefitBases {
            knn: KnnModel::fit(x, y, n, base.knn)?,
            forest: ForestModel::fit(x, y, n, base.forest)?,
            mlp: MlpModel::fit(x, y, Some((val.inputs.view(), val.targets.as_slice())), n, base.mlp)?,
        })
    }

    pub fn features(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(join_blocks(&[
            self.knn.predict_proba(x)?,
            self.forest.predict_proba(x)?,
            self.mlp.predict_proba(x)?,
        ]))
    }

    pub fn finish(self, robot_id: usize, blender: BoostedTrees) -> StackedEnsemble {
        StackedEnsemble {
            robot_id,
            n_classes: self.knn.n_classes,
            knn: self.knn,
            forest: self.forest,
            mlp: self.mlp,
            blender,
        }
    }
}

/// Refits the base learners on the whole training split and fits the blender
/// on the supplied out-of-fold features, with early stopping on `val`.
pub fn fit_from_oof(
    train: &LocalDataset,
    val: &LocalDataset,
    base: &BaseConfigs,
    oof: &Array2<f64>,
    blender: BlenderConfig,
) -> Result<StackedEnsemble> {
    let n = train.n_classes;
    if oof.dim() != (train.len(), 3 * n) {
        return Err(Error::WidthMismatch {
            expected: 3 * n,
            got: oof.ncols(),
        });
    }
    let bases = RefitBases::fit(train, val, base)?;
    let val_features = bases.features(val.inputs.view())?;
    let blender = BoostedTrees::fit(oof.view(), &train.targets, Some((val_features.view(), &val.targets)), n, blender)?;
    Ok(bases.finish(train.robot_id, blender))
}

/// Stage 1 builds leakage-free stacked features over `k_folds` folds of the
/// training split, stage 2 fits the blender on them and stage 3 refits the
/// base learners on the whole split for inference.
pub fn train_stacked(
    train: &LocalDataset,
    val: &LocalDataset,
    base: &BaseConfigs,
    blender: BlenderConfig,
    k_folds: usize,
    seed: u64,
) -> Result<(StackedEnsemble, StackingAudit)> {
    let folds = kfold(train.len(), k_folds, seed)?;
    let (oof, audit) = stacked_oof(train, base, &folds)?;
    let ens = fit_from_oof(train, val, base, &oof, blender)?;
    Ok((ens, audit))
}

/// Accuracy of each base learner and of the blender on labelled rows.
pub fn score_ensemble(ens: &StackedEnsemble, data: &LocalDataset) -> Result<[f64; 4]> {
    let x = data.inputs.view();
    let [k, f, m] = ens.base_predictions(x)?;
    let e = ens.predict(x)?;
    let t = &data.targets;
    Ok([accuracy(&k, t), accuracy(&f, t), accuracy(&m, t), accuracy(&e, t)])
}
