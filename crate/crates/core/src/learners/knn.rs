//! k-nearest-neighbour classification under a Minkowski distance.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{check_width, Classifier, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Minkowski power.
    pub p: f64,
    pub weighting: Weighting,
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p.is_nan() || self.p < 1.0 {
            return Err(Error::InvalidParams(format!(
                "knn needs k >= 1 and p >= 1, got k={} p={}",
                self.k, self.p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    /// `config.k` clamped to the number of training rows.
    pub effective_k: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    rows: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, config: KnnConfig) -> Result<Self> {
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
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        Ok(KnnModel {
            config,
            effective_k: config.k.min(y.len()),
            n_classes,
            standardizer,
            rows: z.rows().into_iter().map(|r| r.to_vec()).collect(),
            targets: y.to_vec(),
        })
    }

    /// True when `k` exceeded the training rows and was clamped.
    pub fn k_was_reduced(&self) -> bool {
        self.effective_k < self.config.k
    }

    /// Sum of `|a_i - b_i|^p`, monotone in the Minkowski distance.
    fn power_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let p = self.config.p;
        if p == 1.0 {
            a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
        } else if p == 2.0 {
            a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
        } else {
            a.iter().zip(b).map(|(u, v)| (u - v).abs().powf(p)).sum()
        }
    }
}

impl Classifier for KnnModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_features(), &x)?;
        let z = self.standardizer.transform(x);
        let k = self.effective_k;
        let mut out = Array2::zeros((z.nrows(), self.n_classes));
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.rows.len());
        for (q, query) in z.rows().into_iter().enumerate() {
            let query = query.to_vec();
            dist.clear();
            dist.extend(self.rows.iter().enumerate().map(|(i, r)| (self.power_distance(&query, r), i)));
            // ties resolve toward the earlier training row
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < dist.len() {
                dist.select_nth_unstable_by(k - 1, by_dist);
            }
            let neighbours = &mut dist[..k];
            neighbours.sort_unstable_by(by_dist);
            let mut row = out.row_mut(q);
            match self.config.weighting {
                Weighting::Uniform => {
                    for &(_, i) in neighbours.iter() {
                        row[self.targets[i]] += 1.0;
                    }
                }
                Weighting::InverseDistance => {
                    if neighbours[0].0 == 0.0 {
                        // exact matches take all the weight
                        for &(_, i) in neighbours.iter().filter(|(d, _)| *d == 0.0) {
                            row[self.targets[i]] += 1.0;
                        }
                    } else {
                        let root = 1.0 / self.config.p;
                        for &(d, i) in neighbours.iter() {
                            row[self.targets[i]] += 1.0 / d.powf(root);
                        }
                    }
                }
            }
            let total: f64 = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::argmax_rows;
    use ndarray::array;

    fn cfg(k: usize, weighting: Weighting) -> KnnConfig {
        KnnConfig { k, p: 2.0, weighting }
    }

    #[test]
    fn one_neighbour_memorises_training_rows() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]];
        let y = [0, 1, 2, 1];
        let m = KnnModel::fit(x.view(), &y, 3, cfg(1, Weighting::Uniform)).unwrap();
        let p = m.predict_proba(x.view()).unwrap();
        assert_eq!(argmax_rows(&p), y.to_vec());
        assert_eq!(p[[0, 0]], 1.0);
    }

    #[test]
    fn uniform_vote_shares() {
        let x = array![[0.0], [0.1], [0.2], [5.0], [6.0]];
        let y = [0, 0, 1, 1, 1];
        let m = KnnModel::fit(x.view(), &y, 2, cfg(3, Weighting::Uniform)).unwrap();
        let p = m.predict_proba(array![[0.05]].view()).unwrap();
        assert!((p[[0, 0]] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[[0, 1]] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_dominates_distance_weighting() {
        let x = array![[0.0], [1.0], [1.1]];
        let y = [0, 1, 1];
        let m = KnnModel::fit(x.view(), &y, 2, cfg(3, Weighting::InverseDistance)).unwrap();
        let p = m.predict_proba(array![[0.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn k_is_clamped() {
        let x = array![[0.0], [1.0]];
        let m = KnnModel::fit(x.view(), &[0, 1], 2, cfg(5, Weighting::Uniform)).unwrap();
        assert!(m.k_was_reduced());
        assert_eq!(m.effective_k, 2);
        let p = m.predict_proba(array![[0.2]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn manhattan_and_cubic_distances() {
        let x = array![[0.0, 0.0], [2.0, 2.0], [3.0, 0.0]];
        let y = [0, 1, 2];
        // after standardisation the geometry changes uniformly per axis; check raw distance helper instead
        let m = KnnModel::fit(x.view(), &y, 3, KnnConfig { k: 1, p: 1.0, weighting: Weighting::Uniform }).unwrap();
        assert_eq!(m.power_distance(&[0.0, 0.0], &[1.0, 2.0]), 3.0);
        let m3 = KnnModel { config: KnnConfig { p: 3.0, ..m.config }, ..m };
        assert!((m3.power_distance(&[0.0, 0.0], &[1.0, 2.0]) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch() {
        let x = array![[0.0, 1.0]];
        let m = KnnModel::fit(x.view(), &[0], 1, cfg(1, Weighting::Uniform)).unwrap();
        assert!(matches!(m.predict_proba(array![[0.0]].view()), Err(Error::WidthMismatch { expected: 2, got: 1 })));
    }
}
