use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use optopnet_core::dataset::{generate_samples, Dataset, SplitSpec};
use optopnet_core::ensemble::{
    load_bundle, save_bundle, train_optopnet, LearnerKind, SearchSpace, SearchSpaces, TrainPlan,
};
use optopnet_core::generator::{GeneratorConfig, DEFAULT_MAX_RESAMPLES};
use optopnet_core::topology::{parse_topology, reconstruct_topology, validate_topology, ValidityReport};
use optopnet_core::{NetworkGraph, NetworkParams, Topology};

use crate::config::{Range, RunConfig};
use crate::{Cli, Command, CurvesArgs, GenArgs, NetArgs, PredictArgs, TrainArgs, UsageError, ValidateArgs, SEED_ENV};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(jobs) = cfg.pick(cli.jobs, "jobs")? {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    match &cli.command {
        Command::Gen(a) => gen(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::Predict(a) => predict(&cfg, a),
        Command::Validate(a) => validate(&cfg, a),
        Command::Curves(a) => curves(&cfg, a),
    }
}

/// Invalid parameters are the caller's fault, everything else is a failure.
fn classify(e: optopnet_core::Error) -> anyhow::Error {
    match e {
        optopnet_core::Error::InvalidParams(msg) => UsageError(msg).into(),
        other => other.into(),
    }
}

fn seed(cfg: &RunConfig, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = cfg.pick(flag, "seed")? {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
        Err(_) => Ok(0),
    }
}

fn net_params(cfg: &RunConfig, a: &NetArgs, base: NetworkParams) -> Result<NetworkParams> {
    NetworkParams::new(
        cfg.or(a.zone, "zone", base.zone_range)?,
        cfg.or(a.delta, "delta", base.delta)?,
        cfg.or(a.epsilon, "epsilon", base.epsilon)?,
    )
    .map_err(classify)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn topology_file(dir: &Path, record: usize) -> PathBuf {
    dir.join(format!("record_{record:05}.topo"))
}

fn gen(cfg: &RunConfig, a: &GenArgs) -> Result<ExitCode> {
    let params = net_params(cfg, &a.net, NetworkParams::reference())?;
    let mut gcfg = GeneratorConfig::new(params, cfg.or(a.n, "n", 10)?, seed(cfg, a.seed)?);
    gcfg.max_resamples = cfg.or(a.max_resamples, "max_resamples", DEFAULT_MAX_RESAMPLES)?;
    gcfg.validate().map_err(classify)?;
    let records: usize = cfg.or(a.records, "records", 2000)?;
    if records == 0 {
        return Err(UsageError("--records must be at least 1".into()).into());
    }
    let out: PathBuf = cfg.require(a.out.clone(), "out")?;
    let emit: Option<PathBuf> = cfg.pick(a.emit_topology.clone(), "emit_topology")?;

    let samples = generate_samples(&gcfg, records).context("generation failed")?;
    let data = Dataset::from_samples(&gcfg, &samples);
    data.save(&out).with_context(|| format!("cannot write {}", out.display()))?;
    if let Some(dir) = emit {
        fs::create_dir_all(&dir)?;
        for (i, s) in samples.iter().enumerate() {
            fs::write(topology_file(&dir, i), s.topology.to_text())?;
        }
    }
    eprintln!(
        "wrote {} records of {} robots to {} (sha256 {})",
        data.len(),
        data.n_robots,
        out.display(),
        data.fingerprint()
    );
    Ok(ExitCode::SUCCESS)
}

fn int_space(r: Option<Range<usize>>, default: (usize, usize)) -> (usize, usize) {
    r.map_or(default, |Range(a, b)| (a, b))
}

fn real_space(r: Option<Range<f64>>, default: (f64, f64)) -> (f64, f64) {
    r.map_or(default, |Range(a, b)| (a, b))
}

fn spaces(cfg: &RunConfig, a: &TrainArgs) -> Result<SearchSpaces> {
    let mut s = SearchSpaces::reference();
    if let SearchSpace::Knn { k, p } = &mut s.knn {
        *k = int_space(cfg.pick(a.knn_k, "knn_k")?, *k);
        *p = real_space(cfg.pick(a.knn_p, "knn_p")?, *p);
    }
    if let SearchSpace::Forest { n_trees, max_depth } = &mut s.forest {
        *n_trees = int_space(cfg.pick(a.forest_trees, "forest_trees")?, *n_trees);
        *max_depth = int_space(cfg.pick(a.forest_depth, "forest_depth")?, *max_depth);
    }
    if let SearchSpace::Mlp {
        hidden_layers,
        neurons,
        eta0,
    } = &mut s.mlp
    {
        *hidden_layers = int_space(cfg.pick(a.mlp_layers, "mlp_layers")?, *hidden_layers);
        *neurons = int_space(cfg.pick(a.mlp_neurons, "mlp_neurons")?, *neurons);
        *eta0 = real_space(cfg.pick(a.mlp_eta0, "mlp_eta0")?, *eta0);
    }
    if let SearchSpace::Blender {
        max_depth,
        learning_rate,
    } = &mut s.blender
    {
        *max_depth = int_space(cfg.pick(a.blender_depth, "blender_depth")?, *max_depth);
        *learning_rate = real_space(cfg.pick(a.blender_lr, "blender_lr")?, *learning_rate);
    }
    for space in [&s.knn, &s.forest, &s.mlp, &s.blender] {
        space.validate().map_err(classify)?;
    }
    Ok(s)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(UsageError(format!("dataset {} does not exist", path.display())).into());
    }
    Dataset::load(path).with_context(|| format!("cannot load {}", path.display()))
}

fn train(cfg: &RunConfig, a: &TrainArgs) -> Result<ExitCode> {
    let data_path: PathBuf = cfg.require(a.data.clone(), "data")?;
    let out: PathBuf = cfg.require(a.out.clone(), "out")?;
    let split = match cfg.pick(a.split, "split")? {
        Some(f) => SplitSpec::new(f.0, f.1, f.2).map_err(classify)?,
        None => SplitSpec::reference(),
    };
    let plan = TrainPlan {
        split,
        k_folds: cfg.or(a.folds, "folds", 5)?,
        search_iterations: cfg.or(a.search_iters, "search_iters", 10)?,
        seed: seed(cfg, a.seed)?,
        spaces: spaces(cfg, a)?,
    };
    if plan.k_folds < 2 || plan.search_iterations == 0 {
        return Err(UsageError("--folds must be at least 2 and --search-iters at least 1".into()).into());
    }
    let data = load_dataset(&data_path)?;
    let outcome = train_optopnet(&data, &plan).map_err(classify).context("training failed")?;
    save_bundle(&out, &outcome.model, Some(&outcome.report), &data.fingerprint())
        .with_context(|| format!("cannot write bundle {}", out.display()))?;
    print!("{}", outcome.report.summary());
    if outcome.report.robots.iter().any(|r| !r.leak_free) {
        bail!("stacking audit found leaked rows");
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_coords(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("invalid number {:?}", t.trim())))
        .collect()
}

/// Coordinate rows from an inline value or a file; dataset rows carrying
/// labels after the coordinates are cut down to the coordinates.
fn coordinate_rows(inline: Option<&str>, file: Option<&Path>, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let width = 2 * n;
    let mut push = |row: Vec<f64>| -> Result<()> {
        match row.len() {
            w if w == width => rows.push(row),
            w if w == 3 * n => rows.push(row[..width].to_vec()),
            w => bail!(optopnet_core::Error::WidthMismatch { expected: width, got: w }),
        }
        Ok(())
    };
    match (inline, file) {
        (Some(text), None) => push(parse_coords(text).map_err(UsageError)?)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                match parse_coords(line) {
                    Ok(row) => push(row).with_context(|| format!("line {}", idx + 1))?,
                    // a header line
                    Err(_) if idx == 0 => continue,
                    Err(e) => return Err(UsageError(format!("line {}: {e}", idx + 1)).into()),
                }
            }
        }
        _ => return Err(UsageError("give exactly one of --coords and --input".into()).into()),
    }
    Ok(rows)
}

fn graph_from_coords(params: &NetworkParams, coords: &[f64]) -> NetworkGraph {
    let positions: Vec<(f64, f64)> = coords.chunks(2).map(|c| (c[0], c[1])).collect();
    NetworkGraph::from_positions(params, &positions)
}

fn predict(cfg: &RunConfig, a: &PredictArgs) -> Result<ExitCode> {
    let dir: PathBuf = cfg.require(a.model.clone(), "model")?;
    if !dir.is_dir() {
        return Err(UsageError(format!("model bundle {} does not exist", dir.display())).into());
    }
    let (net, _) = load_bundle(&dir).with_context(|| format!("cannot load bundle {}", dir.display()))?;
    let rows = coordinate_rows(a.coords.as_deref(), a.input.as_deref(), net.n_robots)?;
    let n = net.n_robots;
    let x = ndarray::Array2::from_shape_fn((rows.len(), 2 * n), |(r, c)| rows[r][c]);
    let predictions = net.predict_batch(x.view())?;
    let mut out = String::new();
    for (i, (coords, clusters)) in rows.iter().zip(&predictions).enumerate() {
        if a.as_topology {
            if rows.len() > 1 {
                writeln!(out, "# row {i}")?;
            }
            out.push_str(&reconstruct_topology(&graph_from_coords(&net.params, coords), clusters).to_text());
        } else {
            let labels: Vec<String> = clusters.as_slice().iter().map(|c| c.to_string()).collect();
            writeln!(out, "{}", labels.join(","))?;
        }
    }
    write_output(cfg.pick(a.out.clone(), "out")?.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn check(params: &NetworkParams, coords: &[f64], listing_text: &str, origin: &Path) -> Result<ValidityReport> {
    let listing = parse_topology(listing_text)
        .map_err(|e| UsageError(format!("{}: {e}", origin.display())))?;
    let g = graph_from_coords(params, coords);
    Ok(validate_topology(&g, &Topology::from_listing(&g, &listing)))
}

fn read_listing(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())).into())
}

fn validate(cfg: &RunConfig, a: &ValidateArgs) -> Result<ExitCode> {
    let data_path: Option<PathBuf> = cfg.pick(a.data.clone(), "data")?;
    let data = data_path.as_deref().map(load_dataset).transpose()?;
    let base = data.as_ref().map_or(NetworkParams::reference(), |d| d.params);
    let params = net_params(cfg, &a.net, base)?;

    if let Some(dir) = &a.topology_dir {
        let Some(data) = &data else {
            return Err(UsageError("--topology-dir needs --data".into()).into());
        };
        let mut failed = 0;
        for (i, rec) in data.records.iter().enumerate() {
            let path = topology_file(dir, i);
            let report = check(&params, &rec.coords, &read_listing(&path)?, &path)?;
            if !report.is_valid() {
                failed += 1;
                println!("record {i}:");
                print!("{report}");
            }
        }
        println!("{} of {} records valid", data.len() - failed, data.len());
        return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }

    let coords = match (&a.coords, &data) {
        (Some(text), None) => parse_coords(text).map_err(UsageError)?,
        (None, Some(d)) => {
            let r = a.record.unwrap_or(0);
            d.records
                .get(r)
                .ok_or_else(|| UsageError(format!("record {r} out of range ({} records)", d.len())))?
                .coords
                .clone()
        }
        _ => return Err(UsageError("give exactly one of --coords and --data".into()).into()),
    };
    if coords.len() % 2 != 0 || coords.len() < 6 {
        return Err(UsageError(format!("expected an even number of at least 6 coordinates, got {}", coords.len())).into());
    }
    let path = a
        .topology
        .clone()
        .ok_or_else(|| UsageError("missing --topology".into()))?;
    let report = check(&params, &coords, &read_listing(&path)?, &path)?;
    print!("{report}");
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.8}"))
}

fn curves(cfg: &RunConfig, a: &CurvesArgs) -> Result<ExitCode> {
    let dir: PathBuf = cfg.require(a.model.clone(), "model")?;
    if !dir.is_dir() {
        return Err(UsageError(format!("model bundle {} does not exist", dir.display())).into());
    }
    let (net, _) = load_bundle(&dir).with_context(|| format!("cannot load bundle {}", dir.display()))?;
    let mut out = String::from("robot,model,epoch,train_loss,val_loss,train_acc,val_acc\n");
    for e in &net.ensembles {
        for s in &e.mlp.history {
            writeln!(
                out,
                "{},{},{},{:.8},{},{:.8},{}",
                e.robot_id,
                LearnerKind::Mlp,
                s.epoch,
                s.train_loss,
                opt(s.val_loss),
                s.train_acc,
                opt(s.val_acc)
            )?;
        }
        for s in &e.blender.trace {
            writeln!(
                out,
                "{},{},{},{:.8},{},{:.8},{}",
                e.robot_id,
                LearnerKind::Blender,
                s.round,
                s.train_loss,
                opt(s.val_loss),
                s.train_acc,
                opt(s.val_acc)
            )?;
        }
    }
    write_output(cfg.pick(a.out.clone(), "out")?.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}
