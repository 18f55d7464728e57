//! Base classifiers sharing one contract: fit on coordinate rows with class
//! index targets, then emit one probability row per query.

pub mod forest;
pub mod knn;
pub mod mlp;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{ForestConfig, ForestModel};
pub use knn::{KnnConfig, KnnModel, Weighting};
pub use mlp::{EpochStats, LrSchedule, MlpConfig, MlpModel};

pub trait Classifier {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    /// Rows are non-negative and sum to one.
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }
}

pub(crate) fn check_width(expected: usize, x: &ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::WidthMismatch {
            expected,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Index of the largest entry per row; the first index wins ties.
pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Per-feature affine map to zero mean and unit variance, fitted on
/// training rows only. Constant features keep a unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mean: Array1<f64> = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
        Standardizer {
            mean: mean.to_vec(),
            scale: scale.to_vec(),
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// Sorted distinct targets.
pub(crate) fn observed_classes(targets: &[usize]) -> Vec<usize> {
    let mut c = targets.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardizer_centers_and_scales() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let s = Standardizer::fit(x.view());
        let t = s.transform(x.view());
        assert!((t.column(0).sum()).abs() < 1e-12);
        assert!((t.column(0).mapv(|v| v * v).mean().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(t.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn argmax_first_wins_ties() {
        let p = array![[0.2, 0.4, 0.4], [0.5, 0.1, 0.4]];
        assert_eq!(argmax_rows(&p), vec![1, 0]);
        assert_eq!(accuracy(&[1, 0], &[1, 2]), 0.5);
    }
}
