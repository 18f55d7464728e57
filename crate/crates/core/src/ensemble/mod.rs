//! Per-robot stacked ensembles: three base learners whose out-of-fold
//! probabilities feed a boosted-tree blender, plus the search, evaluation and
//! persistence around them.

pub mod boost;
pub mod bundle;
pub mod optopnet;
pub mod search;
pub mod stacking;

pub use boost::{BlenderConfig, BoostedTrees, RoundStats};
pub use bundle::{load_bundle, load_manifest, load_report, save_bundle, Manifest, ManifestEntry};
pub use optopnet::{
    derive_seed, evaluate, train_optopnet, CvReport, Evaluation, LearnerScores, LearnerSearch, OpTopNet,
    RobotReport, SearchSpaces, TrainOutcome, TrainPlan,
};
pub use search::{argmax_first, random_search, SearchOutcome, SearchSpace, Trial};
pub use stacking::{
    fit_from_oof, kfold, out_of_fold_proba, score_ensemble, stacked_oof, train_stacked, BaseConfigs, FittedModel,
    FoldRecord, LearnerConfig, LearnerKind, RefitBases, StackedEnsemble, StackingAudit,
};
