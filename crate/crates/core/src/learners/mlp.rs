//! Fully connected classifier: SELU hidden layers, softmax output,
//! cross-entropy on class indices with an L2 penalty on every weight matrix,
//! trained by mini-batch Adam under an exponentially decaying learning rate.
//!
//! No batch normalisation is applied between layers; the self-normalising
//! activation with `1 / fan_in` initialisation stands in for it.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{accuracy, argmax_rows, check_width, Classifier, Standardizer};

const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
/// Standard deviation of a unit normal truncated to `[-2, 2]`.
const TRUNCATED_STD: f64 = 0.879_625_661_034_239_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub l2_coeff: f64,
    pub eta0: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Always false: normalisation layers are not implemented.
    pub batch_norm: bool,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(hidden_layers: usize, neurons_per_layer: usize, eta0: f64, seed: u64) -> Self {
        MlpConfig {
            hidden_layers,
            neurons_per_layer,
            l2_coeff: 0.01,
            eta0,
            batch_size: 32,
            epochs: 90,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_norm: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.neurons_per_layer == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParams(format!("degenerate MLP configuration {self:?}")));
        }
        if self.eta0.is_nan() || self.eta0 <= 0.0 || self.l2_coeff < 0.0 {
            return Err(Error::InvalidParams(format!(
                "MLP needs eta0 > 0 and l2 >= 0, got {} and {}",
                self.eta0, self.l2_coeff
            )));
        }
        if self.batch_norm {
            return Err(Error::InvalidParams("batch normalisation is not supported".into()));
        }
        Ok(())
    }
}

/// `eta(t) = eta0 * 10^(-t / steps_per_epoch)` for global step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub eta0: f64,
    pub steps_per_epoch: usize,
}

impl LrSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        self.eta0 * 10f64.powf(-(step as f64) / self.steps_per_epoch as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients for one dense layer, same shapes as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

fn selu(z: f64) -> f64 {
    if z > 0.0 {
        SELU_SCALE * z
    } else {
        SELU_SCALE * SELU_ALPHA * z.exp_m1()
    }
}

fn selu_grad(z: f64) -> f64 {
    if z > 0.0 {
        SELU_SCALE
    } else {
        SELU_SCALE * SELU_ALPHA * z.exp()
    }
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// The bare network: SELU on hidden layers, softmax on the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Dense>,
}

impl Network {
    /// LeCun-normal initialisation (truncated at two standard deviations),
    /// zero biases. `sizes` lists every layer width including input and output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (1.0 / fan_in as f64).sqrt() / TRUNCATED_STD;
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= 2.0 {
                        break z * std;
                    }
                });
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Network { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    /// Pre-activations of every layer and the softmax output.
    fn forward_cached(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Array2<f64>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            inputs.push(a);
            if l == last {
                let mut p = z.clone();
                softmax_rows(&mut p);
                pre.push(z);
                return (inputs, pre, p);
            }
            a = z.mapv(selu);
            pre.push(z);
        }
        unreachable!("network has at least one layer")
    }

    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            a = if l == last { z } else { z.mapv(selu) };
        }
        softmax_rows(&mut a);
        a
    }

    pub fn l2_penalty(&self, l2: f64) -> f64 {
        l2 * self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
    }

    /// Mean cross-entropy over `x` plus the L2 penalty.
    pub fn loss(&self, x: &Array2<f64>, y: &[usize], l2: f64) -> f64 {
        cross_entropy(&self.probabilities(x), y) + self.l2_penalty(l2)
    }

    /// Loss, probabilities and analytic gradients by backpropagation.
    pub fn loss_and_gradient(&self, x: &Array2<f64>, y: &[usize], l2: f64) -> (f64, Array2<f64>, Vec<DenseGrad>) {
        let (inputs, pre, p) = self.forward_cached(x);
        let loss = cross_entropy(&p, y) + self.l2_penalty(l2);
        let batch = x.nrows() as f64;
        let mut delta = p.clone();
        for (r, &t) in y.iter().enumerate() {
            delta[[r, t]] -= 1.0;
        }
        delta /= batch;
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let gw = inputs[l].t().dot(&delta) + &(&layer.weights * (2.0 * l2));
            let gb = delta.sum_axis(Axis(0));
            grads.push(DenseGrad {
                weights: gw,
                bias: gb,
            });
            if l > 0 {
                let mut back = delta.dot(&layer.weights.t());
                back.zip_mut_with(&pre[l - 1], |d, &z| *d *= selu_grad(z));
                delta = back;
            }
        }
        grads.reverse();
        (loss, p, grads)
    }
}

/// Mean negative log-likelihood of the target classes.
pub fn cross_entropy(p: &Array2<f64>, y: &[usize]) -> f64 {
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(r, &t)| -p[[r, t]].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

struct Adam {
    m: Vec<DenseGrad>,
    v: Vec<DenseGrad>,
    t: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| DenseGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &[DenseGrad], lr: f64, cfg: &MlpConfig) {
        self.t += 1;
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.adam_epsilon);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|w, m, v, &g| update(w, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|b, m, v, &g| update(b, m, v, g));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub network: Network,
    pub history: Vec<EpochStats>,
}

impl MlpModel {
    /// Trains for `config.epochs` epochs. When `val` is given its loss and
    /// accuracy are recorded after every epoch.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        val: Option<(ArrayView2<'_, f64>, &[usize])>,
        n_classes: usize,
        config: MlpConfig,
    ) -> Result<Self> {
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
        let val = val.map(|(vx, vy)| (standardizer.transform(vx), vy));

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut sizes = vec![z.ncols()];
        sizes.extend(std::iter::repeat_n(config.neurons_per_layer, config.hidden_layers));
        sizes.push(n_classes);
        let mut network = Network::new(&sizes, &mut rng);
        let mut adam = Adam::new(&network);

        let rows = y.len();
        let schedule = LrSchedule {
            eta0: config.eta0,
            steps_per_epoch: rows.div_ceil(config.batch_size),
        };
        let mut order: Vec<usize> = (0..rows).collect();
        let mut history = Vec::with_capacity(config.epochs);
        let mut step = 0usize;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut hits = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let bx = z.select(Axis(0), chunk);
                let by: Vec<usize> = chunk.iter().map(|&r| y[r]).collect();
                let (loss, p, grads) = network.loss_and_gradient(&bx, &by, config.l2_coeff);
                let lr = schedule.rate(step);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        step,
                        learning_rate: lr,
                    });
                }
                loss_sum += loss * chunk.len() as f64;
                hits += accuracy(&argmax_rows(&p), &by) * chunk.len() as f64;
                adam.step(&mut network, &grads, lr, &config);
                step += 1;
            }
            let (val_loss, val_acc) = match &val {
                Some((vx, vy)) => {
                    let p = network.probabilities(vx);
                    (
                        Some(cross_entropy(&p, vy) + network.l2_penalty(config.l2_coeff)),
                        Some(accuracy(&argmax_rows(&p), vy)),
                    )
                }
                None => (None, None),
            };
            history.push(EpochStats {
                epoch,
                train_loss: loss_sum / rows as f64,
                train_acc: hits / rows as f64,
                val_loss,
                val_acc,
            });
        }
        Ok(MlpModel {
            config,
            n_classes,
            standardizer,
            network,
            history,
        })
    }
}

impl Classifier for MlpModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_features(), &x)?;
        Ok(self.network.probabilities(&self.standardizer.transform(x)))
    }
}
