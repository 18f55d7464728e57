use optopnet_core::dataset::{generate_dataset, localize, shuffle_split, SplitSpec};
use optopnet_core::ensemble::{
    evaluate, load_bundle, load_report, save_bundle, train_optopnet, LearnerKind, SearchSpace, TrainPlan,
};
use optopnet_core::generator::GeneratorConfig;
use optopnet_core::learners::Classifier;
use optopnet_core::NetworkParams;

fn small_plan(seed: u64) -> TrainPlan {
    let mut plan = TrainPlan::reference(seed);
    plan.k_folds = 3;
    plan.search_iterations = 2;
    plan.spaces.forest = SearchSpace::Forest {
        n_trees: (100, 120),
        max_depth: (3, 5),
    };
    plan.spaces.mlp = SearchSpace::Mlp {
        hidden_layers: (1, 2),
        neurons: (4, 16),
        eta0: (0.001, 0.03),
    };
    plan
}

#[test]
fn end_to_end_small_run() {
    let data = generate_dataset(&GeneratorConfig::new(NetworkParams::reference(), 5, 31), 120).unwrap();
    let out = train_optopnet(&data, &small_plan(3)).unwrap();
    let report = &out.report;

    assert_eq!(out.model.n_robots, 5);
    assert_eq!(report.split_sizes, SplitSpec::reference().sizes(120));
    assert!(out.audits.iter().all(|a| a.is_leak_free()));
    for robot in &report.robots {
        assert!(robot.blender_loss_non_increasing);
        let kinds: Vec<LearnerKind> = robot.searches.iter().map(|s| s.learner).collect();
        assert_eq!(kinds, [LearnerKind::Knn, LearnerKind::Forest, LearnerKind::Mlp, LearnerKind::Blender]);
        for s in &robot.searches {
            assert_eq!(s.outcome.trials.len(), 2);
            for t in &s.outcome.trials {
                assert_eq!(t.fold_accuracy.len(), 3);
                let mean = t.fold_accuracy.iter().sum::<f64>() / 3.0;
                assert!((mean - t.mean_accuracy).abs() < 1e-12);
            }
        }
    }

    // overall is the plain mean of the per-robot accuracies
    let ens: Vec<f64> = report.test.per_robot.iter().map(|s| s.ensemble).collect();
    assert_eq!(report.test.overall.ensemble, ens.iter().sum::<f64>() / ens.len() as f64);

    // re-evaluating the trained model on the test split reproduces the report
    let split = shuffle_split(data.len(), &SplitSpec::reference(), 3).unwrap();
    let again = evaluate(&out.model, &data.subset(&split.test)).unwrap();
    assert_eq!(again, report.test);

    // every ensemble's blender reads three probability blocks
    for e in &out.model.ensembles {
        assert_eq!(e.blender.n_features(), 3 * 5);
        assert_eq!(e.mlp.history.len(), 90);
    }

    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &out.model, Some(report), &data.fingerprint()).unwrap();
    let (back, manifest) = load_bundle(dir.path()).unwrap();
    assert_eq!(manifest.dataset_fingerprint, data.fingerprint());
    // the out-of-fold cache is not persisted, so compare the serialized form
    assert_eq!(
        serde_json::to_value(load_report(dir.path()).unwrap()).unwrap(),
        serde_json::to_value(report).unwrap()
    );
    let x = localize(&data, 0).unwrap().inputs;
    assert_eq!(back.predict_batch(x.view()).unwrap(), out.model.predict_batch(x.view()).unwrap());
}

#[test]
fn same_seed_same_report() {
    let data = generate_dataset(&GeneratorConfig::new(NetworkParams::reference(), 4, 8), 80).unwrap();
    let a = train_optopnet(&data, &small_plan(5)).unwrap().report;
    let b = train_optopnet(&data, &small_plan(5)).unwrap().report;
    assert_eq!(a, b);
}
