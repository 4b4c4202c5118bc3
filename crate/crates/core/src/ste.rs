//! Straight-through-estimator baselines.
//!
//! Training keeps the exact threshold in the forward pass and substitutes a
//! surrogate derivative for `1{x >= 0}` in the backward pass. Plain SGD on
//! the weight-decay objective, with a plateau learning-rate schedule.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fires, objective, preactivation, Dataset, HiddenLayer, LossKind, Neuron, RegularizedObjective, RegularizerForm, Subnetwork, ThresholdNetwork};
use crate::solver::negative_loss_gradient;

/// Objective values above this abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surrogate {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    ClippedRelu { cap: f64 },
}

impl Surrogate {
    pub const ALL: [Surrogate; 4] = [
        Surrogate::Identity,
        Surrogate::Relu,
        Surrogate::LeakyRelu { slope: 0.01 },
        Surrogate::ClippedRelu { cap: 1.0 },
    ];

    pub fn name(self) -> &'static str {
        match self {
            Surrogate::Identity => "identity",
            Surrogate::Relu => "relu",
            Surrogate::LeakyRelu { .. } => "leaky_relu",
            Surrogate::ClippedRelu { .. } => "clipped_relu",
        }
    }
}

impl std::str::FromStr for Surrogate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "identity" => Ok(Surrogate::Identity),
            "relu" => Ok(Surrogate::Relu),
            "leaky_relu" | "lrelu" => Ok(Surrogate::LeakyRelu { slope: 0.01 }),
            "clipped_relu" | "crelu" => Ok(Surrogate::ClippedRelu { cap: 1.0 }),
            other => Err(Error::InvalidArgument(format!("unknown surrogate `{other}`"))),
        }
    }
}

/// Derivative used in place of the threshold's.
pub fn surrogate_backward(surrogate: Surrogate, x: f64) -> f64 {
    match surrogate {
        Surrogate::Identity => 1.0,
        Surrogate::Relu => f64::from(u8::from(x > 0.0)),
        Surrogate::LeakyRelu { slope } => {
            if x > 0.0 {
                1.0
            } else {
                slope
            }
        }
        Surrogate::ClippedRelu { cap } => f64::from(u8::from(x > 0.0 && x < cap)),
    }
}

/// Multiply the learning rate by `factor` once the objective has failed to
/// improve by a relative `threshold` for `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        Self {
            factor: 0.5,
            patience: 10,
            threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteConfig {
    pub surrogate: Surrogate,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta: f64,
    pub seed: u64,
    #[serde(default)]
    pub schedule: PlateauSchedule,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_loss() -> LossKind {
    LossKind::Squared
}

impl Default for SteConfig {
    fn default() -> Self {
        Self {
            surrogate: Surrogate::Identity,
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 32,
            beta: 1e-3,
            seed: 0,
            schedule: PlateauSchedule::default(),
            loss: LossKind::Squared,
        }
    }
}

impl SteConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("{what} must be positive")));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.batch_size == 0 {
            return bad("batch size");
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument("beta must be >= 0".into()));
        }
        let s = self.schedule;
        if !(s.factor > 0.0 && s.factor <= 1.0) || s.patience == 0 || !(s.threshold >= 0.0) {
            return Err(Error::InvalidArgument("invalid plateau schedule".into()));
        }
        match self.surrogate {
            Surrogate::LeakyRelu { slope } if !(slope > 0.0) => bad("leaky slope"),
            Surrogate::ClippedRelu { cap } if !(cap > 0.0) => bad("clip cap"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Weight-decay objective on the full training set after each epoch.
    pub objectives: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub network: ThresholdNetwork,
    pub wall_seconds: f64,
    pub seed: u64,
    pub diverged: bool,
    pub config: SteConfig,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Threshold,
    /// Identity activation, for checking the backward pass.
    #[cfg_attr(not(test), allow(dead_code))]
    Linear,
}

/// Trainable parameters. The last layer holds the last-hidden-layer neurons.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    layers: Vec<HiddenLayer>,
    output: DVector<f64>,
}

impl Params {
    fn init(d: usize, widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = d;
        let mut layers = Vec::with_capacity(widths.len());
        for &m in widths {
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid scale");
            let w = DMatrix::from_fn(fan_in, m, |_, _| normal.sample(rng));
            layers.push(HiddenLayer::new(w));
            fan_in = m;
        }
        let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid scale");
        let output = DVector::from_fn(fan_in, |_, _| normal.sample(rng));
        Self { layers, output }
    }

    fn to_network(&self, d: usize) -> ThresholdNetwork {
        let (last, trunk) = self.layers.split_last().expect("at least one hidden layer");
        let neurons = (0..last.output_dim())
            .map(|k| {
                Neuron::new(last.weights.column(k).into_owned(), last.amplitudes[k], self.output[k])
                    .with_shift(last.shifts[k])
            })
            .collect();
        ThresholdNetwork::new(
            d,
            vec![Subnetwork {
                layers: trunk.to_vec(),
                neurons,
            }],
        )
        .expect("widths chain by construction")
    }

    #[cfg(test)]
    fn norm_squared(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.norm_squared() + l.amplitudes.norm_squared())
            .sum::<f64>()
            + self.output.norm_squared()
    }

    fn forward(&self, x: &DMatrix<f64>, mode: Mode) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DVector<f64>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let b = h.nrows();
            let mut z = DMatrix::zeros(b, layer.output_dim());
            let mut a = DMatrix::zeros(b, layer.output_dim());
            for k in 0..layer.output_dim() {
                let w = layer.weights.column(k);
                let w = w.as_slice();
                for i in 0..b {
                    let v = preactivation(&h, i, w, layer.shifts[k]);
                    z[(i, k)] = v;
                    a[(i, k)] = match mode {
                        Mode::Threshold => {
                            if fires(v) {
                                layer.amplitudes[k]
                            } else {
                                0.0
                            }
                        }
                        Mode::Linear => layer.amplitudes[k] * v,
                    };
                }
            }
            inputs.push(std::mem::replace(&mut h, a));
            pre.push(z);
        }
        let f = &h * &self.output;
        inputs.push(h);
        (inputs, pre, f)
    }

    /// Gradient of `L_B + (|B|/n)(β/2)||θ||²`.
    fn gradient(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        loss: LossKind,
        decay: f64,
        surrogate: Surrogate,
        mode: Mode,
    ) -> Params {
        let (inputs, pre, f) = self.forward(x, mode);
        let g_f = -negative_loss_gradient(loss, &f, y);
        let last = inputs.last().expect("output input cached");
        let output = last.tr_mul(&g_f) + &self.output * decay;
        let mut d_a = &g_f * self.output.transpose();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &pre[l];
            let (b, m) = z.shape();
            let mut d_s = DVector::zeros(m);
            let mut d_z = DMatrix::zeros(b, m);
            for k in 0..m {
                let s = layer.amplitudes[k];
                for i in 0..b {
                    let v = z[(i, k)];
                    let (act, slope) = match mode {
                        Mode::Threshold => (f64::from(u8::from(fires(v))), surrogate_backward(surrogate, v)),
                        Mode::Linear => (v, 1.0),
                    };
                    d_s[k] += d_a[(i, k)] * act;
                    d_z[(i, k)] = d_a[(i, k)] * s * slope;
                }
            }
            let d_w = inputs[l].tr_mul(&d_z);
            if l > 0 {
                d_a = &d_z * layer.weights.transpose();
            }
            layers.push(HiddenLayer {
                weights: d_w + &layer.weights * decay,
                amplitudes: d_s + &layer.amplitudes * decay,
                shifts: DVector::zeros(m),
            });
        }
        layers.reverse();
        Params { layers, output }
    }

    fn step(&mut self, grad: &Params, lr: f64) {
        for (p, g) in self.layers.iter_mut().zip(&grad.layers) {
            p.weights -= &g.weights * lr;
            p.amplitudes.axpy(-lr, &g.amplitudes, 1.0);
        }
        self.output.axpy(-lr, &grad.output, 1.0);
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::InvalidArgument(format!("hidden widths must be nonempty and positive, got {widths:?}")));
    }
    Ok(())
}

/// The network `ste_train` starts from for this seed.
pub fn initial_network(d: usize, widths: &[usize], seed: u64) -> Result<ThresholdNetwork> {
    check_widths(widths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Params::init(d, widths, &mut rng).to_network(d))
}

/// SGD with straight-through gradients. `widths` lists the hidden layer
/// sizes `m_1, …, m_{L−1}`.
pub fn ste_train(data: &Dataset, widths: &[usize], cfg: &SteConfig) -> Result<TrainTrace> {
    check_widths(widths)?;
    cfg.validate()?;
    let start = Instant::now();
    let d = data.d();
    let n = data.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::init(d, widths, &mut rng);
    let obj = RegularizedObjective::new(cfg.beta, cfg.loss, RegularizerForm::WeightDecay)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = cfg.learning_rate;
    let mut best = f64::INFINITY;
    let mut bad_epochs = 0;
    let mut objectives = Vec::with_capacity(cfg.epochs);
    let mut learning_rates = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = data.features().select_rows(batch);
            let y = data.labels().select_rows(batch);
            let decay = cfg.beta * batch.len() as f64 / n as f64;
            let grad = params.gradient(&x, &y, cfg.loss, decay, cfg.surrogate, Mode::Threshold);
            params.step(&grad, lr);
        }
        learning_rates.push(lr);
        let value = objective(&params.to_network(d), data, &obj)?;
        objectives.push(value);
        if !value.is_finite() || value > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
        if value < best * (1.0 - cfg.schedule.threshold) {
            best = value;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.schedule.patience {
                lr *= cfg.schedule.factor;
                bad_epochs = 0;
            }
        }
    }
    Ok(TrainTrace {
        objectives,
        learning_rates,
        network: params.to_network(d),
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        diverged,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTrial {
    pub traces: Vec<TrainTrace>,
    /// Index of the lowest final objective.
    pub best: usize,
}

/// `trials` independent runs with seeds `cfg.seed + i`, in parallel.
pub fn multi_trial(data: &Dataset, widths: &[usize], cfg: &SteConfig, trials: usize) -> Result<MultiTrial> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let traces: Vec<TrainTrace> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let cfg = SteConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            ste_train(data, widths, &cfg)
        })
        .collect::<Result<_>>()?;
    let best = (0..traces.len())
        .min_by(|&a, &b| traces[a].final_objective().total_cmp(&traces[b].final_objective()))
        .expect("trials >= 1");
    Ok(MultiTrial { traces, best })
}
