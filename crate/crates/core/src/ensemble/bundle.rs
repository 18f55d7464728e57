//! On-disk model bundles: a directory with one JSON file per robot, a
//! manifest, and the training report as JSON, CSV and text.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkParams;

use super::boost::BlenderConfig;
use super::optopnet::{CvReport, LearnerScores, OpTopNet};
use super::stacking::{BaseConfigs, StackedEnsemble};

pub const BUNDLE_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub robot_id: usize,
    pub file: String,
    pub base: BaseConfigs,
    pub blender: BlenderConfig,
    pub test_accuracy: Option<LearnerScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub n_robots: usize,
    pub params: NetworkParams,
    pub dataset_fingerprint: String,
    pub robots: Vec<ManifestEntry>,
    pub overall: Option<LearnerScores>,
    pub exact_row_accuracy: Option<f64>,
}

fn robot_file(robot: usize) -> String {
    format!("robot_{robot:03}.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Writes the model, and the report when given, into `dir`.
pub fn save_bundle(dir: &Path, model: &OpTopNet, report: Option<&CvReport>, fingerprint: &str) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut robots = Vec::with_capacity(model.n_robots);
    for e in &model.ensembles {
        let file = robot_file(e.robot_id);
        write_json(&dir.join(&file), e)?;
        let (base, blender) = e.configs();
        robots.push(ManifestEntry {
            robot_id: e.robot_id,
            file,
            base,
            blender,
            test_accuracy: report.map(|r| r.test.per_robot[e.robot_id]),
        });
    }
    let manifest = Manifest {
        format: BUNDLE_FORMAT,
        n_robots: model.n_robots,
        params: model.params,
        dataset_fingerprint: fingerprint.to_string(),
        robots,
        overall: report.map(|r| r.test.overall),
        exact_row_accuracy: report.map(|r| r.test.exact_row_accuracy),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    if let Some(r) = report {
        write_json(&dir.join(REPORT_FILE), r)?;
        fs::write(dir.join("cv_trials.csv"), r.trials_csv())?;
        fs::write(dir.join("test_accuracy.csv"), r.accuracy_csv())?;
        fs::write(dir.join("summary.txt"), r.summary())?;
    }
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Format(format!("unsupported bundle format {}", manifest.format)));
    }
    Ok(manifest)
}

pub fn load_bundle(dir: &Path) -> Result<(OpTopNet, Manifest)> {
    let manifest = load_manifest(dir)?;
    let ensembles = manifest
        .robots
        .iter()
        .map(|entry| read_json::<StackedEnsemble>(&dir.join(&entry.file)))
        .collect::<Result<Vec<_>>>()?;
    if ensembles.len() != manifest.n_robots {
        return Err(Error::Format(format!(
            "manifest lists {} ensembles for {} robots",
            ensembles.len(),
            manifest.n_robots
        )));
    }
    Ok((OpTopNet::new(manifest.params, ensembles)?, manifest))
}

pub fn load_report(dir: &Path) -> Result<CvReport> {
    read_json(&dir.join(REPORT_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Classifier;

    #[test]
    fn bundle_round_trips_exactly() {
        let (net, data) = crate::ensemble::optopnet::tests::memorised();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_bundle(dir.path(), &net, None, &data.fingerprint()).unwrap();
        assert_eq!(manifest.robots.len(), 4);
        let (back, m2) = load_bundle(dir.path()).unwrap();
        assert_eq!(back, net);
        assert_eq!(m2, manifest);
        let x = data.inputs();
        for (a, b) in net.ensembles.iter().zip(&back.ensembles) {
            assert_eq!(a.predict_proba(x.view()).unwrap(), b.predict_proba(x.view()).unwrap());
        }
        assert!(load_report(dir.path()).is_err());
    }

    #[test]
    fn missing_bundle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_bundle(&dir.path().join("absent")).is_err());
    }
}
