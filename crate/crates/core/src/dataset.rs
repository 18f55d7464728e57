//! Labeled datasets: one row per configuration holding `2n` coordinates
//! followed by `n` cluster labels.
//!
//! On disk a dataset is a CSV file with header
//! `x0,y0,...,x{n-1},y{n-1},c0,...,c{n-1}` plus a `.meta` sidecar of
//! `key=value` lines describing how it was generated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generator::{record_rng, sample_configuration, GeneratorConfig};
use crate::netmodel::{build_graph, NetworkParams, RobotNetwork};
use crate::topology::{optimal_topology, validate_topology, ClusterAssignment, Topology};

pub const GENERATOR_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub coords: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Record {
    pub fn n_robots(&self) -> usize {
        self.labels.len()
    }

    /// The label block as a cluster assignment.
    pub fn decode(&self) -> ClusterAssignment {
        ClusterAssignment::new(self.labels.clone())
    }

    /// `coords.len() == 2n`, labels in range and anchored on fixed points.
    pub fn is_consistent(&self) -> bool {
        let n = self.labels.len();
        self.coords.len() == 2 * n && self.decode().anchors_are_fixed_points()
    }
}

/// Flattens a configuration and its cluster assignment into one row.
pub fn embed(net: &RobotNetwork, clusters: &ClusterAssignment) -> Record {
    Record {
        coords: net.coords(),
        labels: clusters.as_slice().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_robots: usize,
    pub params: NetworkParams,
    pub seed: u64,
    pub records: Vec<Record>,
}

/// One generated configuration with its ground truth.
#[derive(Debug, Clone)]
pub struct Sample {
    pub network: RobotNetwork,
    pub topology: Topology,
    pub clusters: ClusterAssignment,
}

/// Generates `n_records` configurations with their optimal topologies.
///
/// Record `k` draws from its own stream derived from `(seed, k)`, so the
/// output does not depend on how many worker threads run.
pub fn generate_samples(cfg: &GeneratorConfig, n_records: usize) -> Result<Vec<Sample>> {
    cfg.validate()?;
    if n_records == 0 {
        return Err(Error::InvalidParams("record count must be at least 1".into()));
    }
    (0..n_records)
        .into_par_iter()
        .map(|k| {
            let mut rng = record_rng(cfg.seed, k as u64);
            let network = sample_configuration(cfg, &mut rng)?;
            let (topology, clusters) = optimal_topology(&network)?;
            let report = validate_topology(&build_graph(&network), &topology);
            if !report.is_valid() {
                return Err(Error::InvalidTopology {
                    record: k,
                    detail: report.to_string(),
                });
            }
            Ok(Sample {
                network,
                topology,
                clusters,
            })
        })
        .collect()
}

pub fn generate_dataset(cfg: &GeneratorConfig, n_records: usize) -> Result<Dataset> {
    let samples = generate_samples(cfg, n_records)?;
    Ok(Dataset::from_samples(cfg, &samples))
}

impl Dataset {
    pub fn from_samples(cfg: &GeneratorConfig, samples: &[Sample]) -> Self {
        Dataset {
            n_robots: cfg.n,
            params: cfg.params,
            seed: cfg.seed,
            records: samples.iter().map(|s| embed(&s.network, &s.clusters)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            n_robots: self.n_robots,
            params: self.params,
            seed: self.seed,
            records: rows.iter().map(|&r| self.records[r].clone()).collect(),
        }
    }

    /// All coordinate rows as a `rows x 2n` matrix.
    pub fn inputs(&self) -> Array2<f64> {
        let w = 2 * self.n_robots;
        let mut out = Array2::zeros((self.records.len(), w));
        for (mut row, rec) in out.rows_mut().into_iter().zip(&self.records) {
            row.assign(&ndarray::ArrayView1::from(&rec.coords[..]));
        }
        out
    }

    pub fn label_column(&self, robot: usize) -> Vec<usize> {
        self.records.iter().map(|r| r.labels[robot]).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.n_robots;
        let mut out = String::new();
        let header: Vec<String> = (0..n)
            .flat_map(|i| [format!("x{i}"), format!("y{i}")])
            .chain((0..n).map(|i| format!("c{i}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for rec in &self.records {
            let mut first = true;
            for &v in &rec.coords {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format_sig17(v));
            }
            for &c in &rec.labels {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, params: NetworkParams, seed: u64) -> Result<Dataset> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.is_empty() || !cols.len().is_multiple_of(3) {
            return Err(Error::parse(1, format!("header has {} columns, expected a multiple of 3", cols.len())));
        }
        let n = cols.len() / 3;
        for i in 0..n {
            if cols[2 * i] != format!("x{i}") || cols[2 * i + 1] != format!("y{i}") || cols[2 * n + i] != format!("c{i}") {
                return Err(Error::parse(1, format!("unexpected header near robot {i}")));
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 * n {
                return Err(Error::parse(line_no, format!("expected {} fields, found {}", 3 * n, fields.len())));
            }
            let coords = fields[..2 * n]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(line_no, format!("invalid coordinate {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let labels = fields[2 * n..]
                .iter()
                .map(|f| match f.parse::<usize>() {
                    Ok(c) if c < n => Ok(c),
                    _ => Err(Error::parse(line_no, format!("invalid cluster label {f:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(Record { coords, labels });
        }
        Ok(Dataset {
            n_robots: n,
            params,
            seed,
            records,
        })
    }

    pub fn meta_text(&self) -> String {
        format!(
            "n={}\nrecords={}\nzone={}\ndelta={}\nepsilon={}\nseed={}\ngenerator_version={}\n",
            self.n_robots,
            self.records.len(),
            self.params.zone_range,
            self.params.delta,
            self.params.epsilon,
            self.seed,
            GENERATOR_VERSION
        )
    }

    /// SHA-256 of the CSV serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_csv().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `path` and the sidecar `path.with_extension("meta")`.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        fs::write(meta_path(path), self.meta_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let meta = Meta::parse(&fs::read_to_string(meta_path(path))?)?;
        let data = Dataset::from_csv(&fs::read_to_string(path)?, meta.params, meta.seed)?;
        if data.n_robots != meta.n {
            return Err(Error::Format(format!(
                "metadata says n={} but the CSV holds {} robots",
                meta.n, data.n_robots
            )));
        }
        Ok(data)
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

/// Parsed `.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub n: usize,
    pub params: NetworkParams,
    pub seed: u64,
}

impl Meta {
    pub fn parse(text: &str) -> Result<Meta> {
        let mut n = None;
        let mut zone = None;
        let mut delta = None;
        let mut epsilon = None;
        let mut seed = None;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, "expected key=value"))?;
            let bad = || Error::parse(idx + 1, format!("invalid value for {k}"));
            match k.trim() {
                "n" => n = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                "zone" => zone = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "delta" => delta = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "epsilon" => epsilon = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "seed" => seed = Some(v.trim().parse::<u64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::Format(format!("metadata lacks `{k}`"));
        Ok(Meta {
            n: n.ok_or_else(|| missing("n"))?,
            params: NetworkParams::new(
                zone.ok_or_else(|| missing("zone"))?,
                delta.ok_or_else(|| missing("delta"))?,
                epsilon.ok_or_else(|| missing("epsilon"))?,
            )?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        })
    }
}

/// Positional decimal with 17 significant digits; parses back bit-exactly.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if exp >= 16 {
        return format!("{v:.0}");
    }
    let decimals = (16 - exp) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let s = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
        };
        s.validate()?;
        Ok(s)
    }

    /// 72 / 18 / 10.
    pub fn reference() -> Self {
        SplitSpec {
            train_frac: 0.72,
            val_frac: 0.18,
            test_frac: 0.10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train_frac, self.val_frac, self.test_frac];
        if parts.iter().any(|&f| f.is_nan() || f <= 0.0) {
            return Err(Error::InvalidParams(format!("split fractions must be positive: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("split fractions must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// `(train, val, test)` row counts for `rows` records.
    pub fn sizes(&self, rows: usize) -> (usize, usize, usize) {
        // the small slack absorbs representation error such as 0.29 * 100
        let part = |f: f64| (rows as f64 * f + 1e-9).floor() as usize;
        let val = part(self.val_frac);
        let test = part(self.test_frac);
        (rows.saturating_sub(val + test), val, test)
    }
}

/// Row indices of a three-way split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn shuffle_split(rows: usize, spec: &SplitSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    let (n_train, n_val, n_test) = spec.sizes(rows);
    for (size, name) in [(n_train, "train"), (n_val, "validation"), (n_test, "test")] {
        if size == 0 {
            return Err(Error::EmptySplit { split: name });
        }
    }
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok(Split { train: perm, val, test })
}

/// One robot's view of a dataset: every coordinate, one label column.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub robot_id: usize,
    pub n_classes: usize,
    pub inputs: Array2<f64>,
    pub targets: Vec<usize>,
}

impl LocalDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> LocalDataset {
        LocalDataset {
            robot_id: self.robot_id,
            n_classes: self.n_classes,
            inputs: self.inputs.select(ndarray::Axis(0), rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
        }
    }

    /// Targets as one-hot rows.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.targets.len(), self.n_classes));
        for (r, &t) in self.targets.iter().enumerate() {
            out[[r, t]] = 1.0;
        }
        out
    }
}

pub fn localize(d: &Dataset, robot_id: usize) -> Result<LocalDataset> {
    if robot_id >= d.n_robots {
        return Err(Error::InvalidParams(format!(
            "robot {robot_id} out of range for a {}-robot dataset",
            d.n_robots
        )));
    }
    Ok(LocalDataset {
        robot_id,
        n_classes: d.n_robots,
        inputs: d.inputs(),
        targets: d.label_column(robot_id),
    })
}
