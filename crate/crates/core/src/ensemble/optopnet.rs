//! The per-robot ensembles taken together, their training pipeline and
//! evaluation.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{localize, shuffle_split, Dataset, LocalDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::learners::{accuracy, check_width, Classifier};
use crate::netmodel::NetworkParams;
use crate::topology::ClusterAssignment;

use super::boost::BoostedTrees;
use super::search::{random_search, SearchOutcome, SearchSpace};
use super::stacking::{
    join_blocks, BaseConfigs, LearnerConfig, LearnerKind, RefitBases, StackedEnsemble, StackingAudit,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpTopNet {
    pub n_robots: usize,
    pub params: NetworkParams,
    pub ensembles: Vec<StackedEnsemble>,
}

impl OpTopNet {
    pub fn new(params: NetworkParams, ensembles: Vec<StackedEnsemble>) -> Result<Self> {
        let n = ensembles.len();
        for (i, e) in ensembles.iter().enumerate() {
            if e.robot_id != i || e.n_classes != n || e.n_features() != 2 * n {
                return Err(Error::InvalidParams(format!(
                    "ensemble {i} does not fit a {n}-robot network (robot {}, {} classes, {} inputs)",
                    e.robot_id,
                    e.n_classes,
                    e.n_features()
                )));
            }
        }
        Ok(OpTopNet {
            n_robots: n,
            params,
            ensembles,
        })
    }

    /// One cluster label per robot; labels are not reconciled across robots.
    pub fn predict_topology(&self, coords: &[f64]) -> Result<ClusterAssignment> {
        if coords.len() != 2 * self.n_robots {
            return Err(Error::WidthMismatch {
                expected: 2 * self.n_robots,
                got: coords.len(),
            });
        }
        let x = ArrayView2::from_shape((1, coords.len()), coords).unwrap();
        Ok(self.predict_batch(x)?.pop().unwrap())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<ClusterAssignment>> {
        check_width(2 * self.n_robots, &x)?;
        let columns = self.predict_columns(x)?;
        Ok((0..x.nrows())
            .map(|r| ClusterAssignment::new(columns.iter().map(|c| c[r]).collect()))
            .collect())
    }

    fn predict_columns(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<usize>>> {
        self.ensembles.par_iter().map(|e| e.predict(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnerScores {
    pub knn: f64,
    pub forest: f64,
    pub mlp: f64,
    pub ensemble: f64,
}

impl LearnerScores {
    pub fn get(&self, kind: LearnerKind) -> f64 {
        match kind {
            LearnerKind::Knn => self.knn,
            LearnerKind::Forest => self.forest,
            LearnerKind::Mlp => self.mlp,
            LearnerKind::Blender => self.ensemble,
        }
    }

    fn mean(rows: &[LearnerScores]) -> LearnerScores {
        let n = rows.len() as f64;
        LearnerScores {
            knn: rows.iter().map(|s| s.knn).sum::<f64>() / n,
            forest: rows.iter().map(|s| s.forest).sum::<f64>() / n,
            mlp: rows.iter().map(|s| s.mlp).sum::<f64>() / n,
            ensemble: rows.iter().map(|s| s.ensemble).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: usize,
    pub per_robot: Vec<LearnerScores>,
    /// Arithmetic mean of `per_robot`.
    pub overall: LearnerScores,
    /// Fraction of rows where every robot's ensemble label is right.
    pub exact_row_accuracy: f64,
}

pub fn evaluate(net: &OpTopNet, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptySplit { split: "test" });
    }
    if test.n_robots != net.n_robots {
        return Err(Error::WidthMismatch {
            expected: net.n_robots,
            got: test.n_robots,
        });
    }
    let x = test.inputs();
    let results: Vec<(LearnerScores, Vec<usize>)> = net
        .ensembles
        .par_iter()
        .map(|e| {
            let truth = test.label_column(e.robot_id);
            let [k, f, m] = e.base_predictions(x.view())?;
            let ens = e.predict(x.view())?;
            let scores = LearnerScores {
                knn: accuracy(&k, &truth),
                forest: accuracy(&f, &truth),
                mlp: accuracy(&m, &truth),
                ensemble: accuracy(&ens, &truth),
            };
            Ok((scores, ens))
        })
        .collect::<Result<_>>()?;
    let exact = test
        .records
        .iter()
        .enumerate()
        .filter(|(r, rec)| results.iter().zip(&rec.labels).all(|((_, pred), &l)| pred[*r] == l))
        .count();
    let per_robot: Vec<LearnerScores> = results.iter().map(|(s, _)| *s).collect();
    Ok(Evaluation {
        rows: test.len(),
        overall: LearnerScores::mean(&per_robot),
        per_robot,
        exact_row_accuracy: exact as f64 / test.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaces {
    pub knn: SearchSpace,
    pub forest: SearchSpace,
    pub mlp: SearchSpace,
    pub blender: SearchSpace,
}

impl SearchSpaces {
    pub fn reference() -> Self {
        SearchSpaces {
            knn: SearchSpace::reference(LearnerKind::Knn),
            forest: SearchSpace::reference(LearnerKind::Forest),
            mlp: SearchSpace::reference(LearnerKind::Mlp),
            blender: SearchSpace::reference(LearnerKind::Blender),
        }
    }

    fn get(&self, kind: LearnerKind) -> &SearchSpace {
        match kind {
            LearnerKind::Knn => &self.knn,
            LearnerKind::Forest => &self.forest,
            LearnerKind::Mlp => &self.mlp,
            LearnerKind::Blender => &self.blender,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub split: SplitSpec,
    pub k_folds: usize,
    pub search_iterations: usize,
    pub seed: u64,
    pub spaces: SearchSpaces,
}

impl TrainPlan {
    pub fn reference(seed: u64) -> Self {
        TrainPlan {
            split: SplitSpec::reference(),
            k_folds: 5,
            search_iterations: 10,
            seed,
            spaces: SearchSpaces::reference(),
        }
    }
}

/// Independent per-robot seed for one purpose.
pub fn derive_seed(seed: u64, robot: usize, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((robot as u64) << 8) | purpose);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSearch {
    pub learner: LearnerKind,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub robot_id: usize,
    pub searches: Vec<LearnerSearch>,
    pub leak_free: bool,
    pub blender_loss_non_increasing: bool,
    pub blender_rounds_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n_robots: usize,
    pub k_folds: usize,
    pub search_iterations: usize,
    pub seed: u64,
    pub split_sizes: (usize, usize, usize),
    pub robots: Vec<RobotReport>,
    pub test: Evaluation,
}

impl CvReport {
    /// One row per candidate configuration.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("robot,learner,trial,config");
        for f in 0..self.k_folds {
            write!(out, ",fold_{f}").unwrap();
        }
        out.push_str(",mean,selected\n");
        for robot in &self.robots {
            for search in &robot.searches {
                for (i, t) in search.outcome.trials.iter().enumerate() {
                    write!(out, "{},{},{},{}", robot.robot_id, search.learner, i, t.config).unwrap();
                    for a in &t.fold_accuracy {
                        write!(out, ",{a:.6}").unwrap();
                    }
                    writeln!(out, ",{:.6},{}", t.mean_accuracy, u8::from(i == search.outcome.best)).unwrap();
                }
            }
        }
        out
    }

    /// Test accuracy per robot and learner, then the mean row.
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("robot,knn,forest,mlp,ensemble\n");
        let row = |out: &mut String, id: &str, s: &LearnerScores| {
            writeln!(out, "{id},{:.6},{:.6},{:.6},{:.6}", s.knn, s.forest, s.mlp, s.ensemble).unwrap();
        };
        for (i, s) in self.test.per_robot.iter().enumerate() {
            row(&mut out, &i.to_string(), s);
        }
        row(&mut out, "mean", &self.test.overall);
        out
    }

    pub fn summary(&self) -> String {
        let (tr, va, te) = self.split_sizes;
        let mut out = String::new();
        writeln!(out, "robots {}  train/val/test {tr}/{va}/{te}", self.n_robots).unwrap();
        writeln!(
            out,
            "search {} samples x {} folds per learner, seed {}",
            self.search_iterations, self.k_folds, self.seed
        )
        .unwrap();
        writeln!(out).unwrap();
        writeln!(out, "robot    knn  forest     mlp  ensemble").unwrap();
        let line = |out: &mut String, id: &str, s: &LearnerScores| {
            writeln!(
                out,
                "{id:>5} {:>6.2} {:>7.2} {:>7.2} {:>9.2}",
                100.0 * s.knn,
                100.0 * s.forest,
                100.0 * s.mlp,
                100.0 * s.ensemble
            )
            .unwrap();
        };
        for (i, s) in self.test.per_robot.iter().enumerate() {
            line(&mut out, &i.to_string(), s);
        }
        line(&mut out, "mean", &self.test.overall);
        writeln!(out).unwrap();
        writeln!(
            out,
            "exact-row accuracy {:.2}%",
            100.0 * self.test.exact_row_accuracy
        )
        .unwrap();
        for robot in &self.robots {
            let picks: Vec<String> = robot
                .searches
                .iter()
                .map(|s| format!("{} [{}]", s.learner, s.outcome.best_config()))
                .collect();
            writeln!(out, "robot {}: {}", robot.robot_id, picks.join("; ")).unwrap();
        }
        out
    }
}

pub struct TrainOutcome {
    pub model: OpTopNet,
    pub report: CvReport,
    pub audits: Vec<StackingAudit>,
}

struct RobotRun {
    ensemble: StackedEnsemble,
    report: RobotReport,
    audit: StackingAudit,
}

/// Splits the dataset, searches every learner per robot, stacks the winners
/// and scores the result on the test split. Robots train in parallel.
pub fn train_optopnet(data: &Dataset, plan: &TrainPlan) -> Result<TrainOutcome> {
    let split = shuffle_split(data.len(), &plan.split, plan.seed)?;
    let runs: Vec<RobotRun> = (0..data.n_robots)
        .into_par_iter()
        .map(|robot| {
            let local = localize(data, robot)?;
            train_robot(&local.select(&split.train), &local.select(&split.val), plan)
        })
        .collect::<Result<_>>()?;
    let mut ensembles = Vec::with_capacity(runs.len());
    let mut robots = Vec::with_capacity(runs.len());
    let mut audits = Vec::with_capacity(runs.len());
    for run in runs {
        ensembles.push(run.ensemble);
        robots.push(run.report);
        audits.push(run.audit);
    }
    let model = OpTopNet::new(data.params, ensembles)?;
    let test = evaluate(&model, &data.subset(&split.test))?;
    let report = CvReport {
        n_robots: data.n_robots,
        k_folds: plan.k_folds,
        search_iterations: plan.search_iterations,
        seed: plan.seed,
        split_sizes: (split.train.len(), split.val.len(), split.test.len()),
        robots,
        test,
    };
    Ok(TrainOutcome { model, report, audits })
}

fn train_robot(train: &LocalDataset, val: &LocalDataset, plan: &TrainPlan) -> Result<RobotRun> {
    let robot = train.robot_id;
    let seed = derive_seed(plan.seed, robot, 1);
    let search = |kind: LearnerKind, data: &LocalDataset, v: Option<(ArrayView2<'_, f64>, &[usize])>| {
        random_search(plan.spaces.get(kind), data, v, plan.k_folds, plan.search_iterations, seed)
    };

    let mut searches = Vec::with_capacity(4);
    let mut blocks: Vec<Array2<f64>> = Vec::with_capacity(3);
    let mut audit = StackingAudit {
        n_rows: train.len(),
        folds: Vec::new(),
    };
    for kind in LearnerKind::BASE {
        let mut outcome = search(kind, train, None)?;
        if outcome.best_config().kind() != kind {
            return Err(Error::InvalidParams(format!("the {kind} search space yields another learner")));
        }
        // the winner's cross-validation predictions are its stacked features
        blocks.push(outcome.best_oof.take().unwrap());
        audit.folds.append(&mut outcome.best_folds);
        searches.push(LearnerSearch { learner: kind, outcome });
    }
    let pick = |i: usize| searches[i].outcome.best_config();
    let base = match (pick(0), pick(1), pick(2)) {
        (LearnerConfig::Knn(knn), LearnerConfig::Forest(forest), LearnerConfig::Mlp(mlp)) => {
            BaseConfigs { knn, forest, mlp }
        }
        _ => unreachable!("kinds checked above"),
    };
    let oof = join_blocks(&blocks);
    let bases = RefitBases::fit(train, val, &base)?;
    let val_features = bases.features(val.inputs.view())?;
    let stacked = LocalDataset {
        robot_id: robot,
        n_classes: train.n_classes,
        inputs: oof,
        targets: train.targets.clone(),
    };
    let vdata = Some((val_features.view(), val.targets.as_slice()));
    let blender_search = search(LearnerKind::Blender, &stacked, vdata)?;
    let LearnerConfig::Blender(blender_cfg) = blender_search.best_config() else {
        return Err(Error::InvalidParams("the blender search space yields another learner".into()));
    };
    searches.push(LearnerSearch {
        learner: LearnerKind::Blender,
        outcome: blender_search,
    });
    let blender = BoostedTrees::fit(stacked.inputs.view(), &stacked.targets, vdata, train.n_classes, blender_cfg)?;
    let report = RobotReport {
        robot_id: robot,
        searches,
        leak_free: audit.is_leak_free(),
        blender_loss_non_increasing: blender.training_loss_non_increasing(),
        blender_rounds_run: blender.trace.len(),
    };
    Ok(RobotRun {
        ensemble: bases.finish(robot, blender),
        report,
        audit,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use crate::ensemble::stacking::train_stacked;
    use crate::ensemble::BlenderConfig;
    use crate::generator::GeneratorConfig;
    use crate::learners::{ForestConfig, KnnConfig, MlpConfig, Weighting};

    fn small_base() -> BaseConfigs {
        BaseConfigs {
            knn: KnnConfig {
                k: 1,
                p: 2.0,
                weighting: Weighting::Uniform,
            },
            forest: ForestConfig {
                n_trees: 5,
                max_depth: 3,
                bootstrap: true,
                seed: 1,
            },
            mlp: MlpConfig::new(1, 4, 0.01, 1),
        }
    }

    /// Every robot sees one record repeated, so every ensemble memorises it.
    pub(crate) fn memorised() -> (OpTopNet, Dataset) {
        let one = generate_dataset(&GeneratorConfig::new(NetworkParams::reference(), 4, 3), 1).unwrap();
        let data = one.subset(&[0; 12]);
        let ensembles = (0..4)
            .map(|r| {
                let local = localize(&data, r).unwrap();
                let (e, _) = train_stacked(&local, &local, &small_base(), BlenderConfig::new(3, 0.3), 3, 5).unwrap();
                e
            })
            .collect();
        (OpTopNet::new(data.params, ensembles).unwrap(), data)
    }

    #[test]
    fn memorised_record_is_reproduced() {
        let (net, data) = memorised();
        let rec = &data.records[0];
        let got = net.predict_topology(&rec.coords).unwrap();
        assert_eq!(got.as_slice(), rec.labels.as_slice());
        assert!(matches!(
            net.predict_topology(&rec.coords[..6]),
            Err(Error::WidthMismatch { expected: 8, got: 6 })
        ));
    }

    #[test]
    fn constant_truth_scores_one() {
        let (net, data) = memorised();
        let ev = evaluate(&net, &data).unwrap();
        assert_eq!(ev.per_robot.len(), 4);
        assert_eq!(ev.overall.ensemble, 1.0);
        assert_eq!(ev.exact_row_accuracy, 1.0);
        assert!(evaluate(&net, &data.subset(&[])).is_err());
    }

    #[test]
    fn overall_is_the_mean() {
        let rows = [0.5, 0.25, 1.0, 0.75].map(|a| LearnerScores {
            knn: a,
            forest: a / 2.0,
            mlp: 1.0 - a,
            ensemble: a,
        });
        let m = LearnerScores::mean(&rows);
        assert_eq!(m.ensemble, 0.625);
        assert_eq!(m.forest, 0.3125);
        assert_eq!(m.mlp, 0.375);
    }

    #[test]
    fn mismatched_ensembles_are_rejected() {
        let (net, _) = memorised();
        let mut ens = net.ensembles.clone();
        ens.swap(0, 1);
        assert!(OpTopNet::new(net.params, ens).is_err());
        assert!(OpTopNet::new(net.params, net.ensembles[..3].to_vec()).is_err());
    }

    #[test]
    fn seeds_differ_by_robot_and_purpose() {
        assert_eq!(derive_seed(7, 1, 1), derive_seed(7, 1, 1));
        assert_ne!(derive_seed(7, 1, 1), derive_seed(7, 2, 1));
        assert_ne!(derive_seed(7, 1, 1), derive_seed(7, 1, 2));
    }
}
