//! Datasets, threshold networks and their regularized training objectives.
//!
//! A [`ThresholdNetwork`] is a sum of parallel [`Subnetwork`]s. Each
//! subnetwork is a (possibly empty) trunk of threshold [`HiddenLayer`]s
//! followed by a set of last-hidden-layer [`Neuron`]s that feed the scalar
//! output. A two-layer network is a single subnetwork with an empty trunk; the
//! parallel deep architecture uses one neuron per subnetwork; a plain deep
//! network shares one trunk among all of its last-layer neurons.
//!
//! Every module evaluates the activation through [`fires`] and
//! [`preactivation`] so training-time patterns and forward passes agree bit
//! for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The threshold predicate `1{x >= 0}`. Exactly zero fires.
#[inline]
pub fn fires(preactivation: f64) -> bool {
    preactivation >= 0.0
}

/// `x_i^T w - shift`, accumulated left to right.
#[inline]
pub fn preactivation(x: &DMatrix<f64>, row: usize, weights: &[f64], shift: f64) -> f64 {
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += x[(row, j)] * w;
    }
    acc - shift
}

/// Activation pattern `1{X w - shift >= 0}` over all rows of `x`.
pub fn activation_pattern(x: &DMatrix<f64>, weights: &[f64], shift: f64) -> Vec<bool> {
    (0..x.nrows())
        .map(|i| fires(preactivation(x, i, weights, shift)))
        .collect()
}

/// Design matrix with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    has_bias: bool,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidDataset(format!(
                "need n >= 1 and d >= 1, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if labels.len() != features.nrows() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} samples",
                labels.len(),
                features.nrows()
            )));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self {
            features,
            labels,
            has_bias: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(features, DVector::from_column_slice(labels))
    }

    /// Appends a trailing all-ones column. No-op when already present.
    pub fn with_bias(self) -> Self {
        if self.has_bias {
            return self;
        }
        let n = self.features.nrows();
        let d = self.features.ncols();
        let features = self.features.insert_column(d, 1.0);
        debug_assert_eq!(features.nrows(), n);
        Self {
            features,
            labels: self.labels,
            has_bias: true,
        }
    }

    /// Marks an existing trailing column as the bias column after checking it.
    pub fn assume_bias(mut self) -> Result<Self> {
        let last = self.features.ncols() - 1;
        if self.features.column(last).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDataset(
                "last column is not all ones".into(),
            ));
        }
        self.has_bias = true;
        Ok(self)
    }

    pub fn with_labels(&self, labels: DVector<f64>) -> Result<Self> {
        let mut out = Self::new(self.features.clone(), labels)?;
        out.has_bias = self.has_bias;
        Ok(out)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: self.labels.select_rows(rows),
            has_bias: self.has_bias,
        }
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }
}

/// A hidden layer of threshold units: `out = s ⊙ 1{input · W - t >= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// `in × out` weight matrix.
    pub weights: DMatrix<f64>,
    pub amplitudes: DVector<f64>,
    pub shifts: DVector<f64>,
}

impl HiddenLayer {
    /// Unit amplitudes and zero shifts.
    pub fn new(weights: DMatrix<f64>) -> Self {
        let m = weights.ncols();
        Self {
            weights,
            amplitudes: DVector::from_element(m, 1.0),
            shifts: DVector::zeros(m),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn forward(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let n = input.nrows();
        let mut out = DMatrix::zeros(n, self.output_dim());
        for k in 0..self.output_dim() {
            let w = self.weights.column(k);
            let w = w.as_slice();
            for i in 0..n {
                if fires(preactivation(input, i, w, self.shifts[k])) {
                    out[(i, k)] = self.amplitudes[k];
                }
            }
        }
        out
    }

    fn squared_norm(&self) -> f64 {
        self.weights.norm_squared() + self.amplitudes.norm_squared()
    }
}

/// Last-hidden-layer neuron and its output weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub weights: DVector<f64>,
    pub amplitude: f64,
    pub shift: f64,
    pub output: f64,
}

impl Neuron {
    pub fn new(weights: DVector<f64>, amplitude: f64, output: f64) -> Self {
        Self {
            weights,
            amplitude,
            shift: 0.0,
            output,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Contribution of this neuron when it fires.
    #[inline]
    fn gain(&self) -> f64 {
        self.amplitude * self.output
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subnetwork {
    pub layers: Vec<HiddenLayer>,
    pub neurons: Vec<Neuron>,
}

impl Subnetwork {
    pub fn representation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h);
        }
        h
    }
}

/// Parallel threshold network.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdNetwork {
    input_dim: usize,
    subnetworks: Vec<Subnetwork>,
}

impl ThresholdNetwork {
    /// Validates the dimension chain of every subnetwork.
    pub fn new(input_dim: usize, subnetworks: Vec<Subnetwork>) -> Result<Self> {
        let net = Self {
            input_dim,
            subnetworks,
        };
        net.check_chain()?;
        let depths: Vec<usize> = net.subnetworks.iter().map(|s| s.layers.len()).collect();
        if depths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidArgument(format!(
                "subnetworks have different depths: {depths:?}"
            )));
        }
        Ok(net)
    }

    /// Two-layer network `Σ_j s_j 1{X w_j - t_j >= 0} w2_j`.
    pub fn two_layer(input_dim: usize, neurons: Vec<Neuron>) -> Result<Self> {
        Self::new(
            input_dim,
            vec![Subnetwork {
                layers: Vec::new(),
                neurons,
            }],
        )
    }

    /// Network predicting zero everywhere.
    pub fn empty(input_dim: usize) -> Self {
        Self {
            input_dim,
            subnetworks: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn subnetworks(&self) -> &[Subnetwork] {
        &self.subnetworks
    }

    /// Number of weight layers L (2 for a shallow network).
    pub fn depth(&self) -> usize {
        self.subnetworks.first().map_or(2, |s| s.layers.len() + 2)
    }

    pub fn neuron_count(&self) -> usize {
        self.subnetworks.iter().map(|s| s.neurons.len()).sum()
    }

    pub fn neurons(&self) -> impl Iterator<Item = &Neuron> {
        self.subnetworks.iter().flat_map(|s| s.neurons.iter())
    }

    /// Every last-hidden-layer amplitude has magnitude one.
    pub fn is_canonical(&self) -> bool {
        self.neurons().all(|n| n.amplitude.abs() == 1.0)
    }

    fn check_chain(&self) -> Result<()> {
        for (k, sub) in self.subnetworks.iter().enumerate() {
            let mut width = self.input_dim;
            for (l, layer) in sub.layers.iter().enumerate() {
                if layer.input_dim() != width {
                    return Err(Error::DimensionMismatch {
                        subnetwork: k,
                        layer: l + 1,
                        expected: width,
                        found: layer.input_dim(),
                    });
                }
                if layer.amplitudes.len() != layer.output_dim()
                    || layer.shifts.len() != layer.output_dim()
                {
                    return Err(Error::DimensionMismatch {
                        subnetwork: k,
                        layer: l + 1,
                        expected: layer.output_dim(),
                        found: layer.amplitudes.len().min(layer.shifts.len()),
                    });
                }
                width = layer.output_dim();
            }
            for neuron in &sub.neurons {
                if neuron.weights.len() != width {
                    return Err(Error::DimensionMismatch {
                        subnetwork: k,
                        layer: sub.layers.len() + 1,
                        expected: width,
                        found: neuron.weights.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Predictions on a raw feature matrix.
    pub fn forward_matrix(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                subnetwork: 0,
                layer: 1,
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        let n = x.nrows();
        let mut out = DVector::zeros(n);
        for sub in &self.subnetworks {
            let h = sub.representation(x);
            for neuron in &sub.neurons {
                let w = neuron.weights.as_slice();
                let gain = neuron.gain();
                for i in 0..n {
                    if fires(preactivation(&h, i, w, neuron.shift)) {
                        out[i] += gain;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Squared-norm penalty of every parameter (shifts are not penalized).
    pub fn weight_decay_norm(&self) -> f64 {
        self.subnetworks
            .iter()
            .map(|sub| {
                sub.layers.iter().map(HiddenLayer::squared_norm).sum::<f64>()
                    + sub
                        .neurons
                        .iter()
                        .map(|n| {
                            n.weights.norm_squared()
                                + n.amplitude * n.amplitude
                                + n.output * n.output
                        })
                        .sum::<f64>()
            })
            .sum()
    }

    /// `Σ |w^(L)_k|` over the output weights.
    pub fn output_l1_norm(&self) -> f64 {
        self.neurons().map(|n| n.output.abs()).sum()
    }
}

/// Evaluate a network on a dataset.
pub fn forward(net: &ThresholdNetwork, data: &Dataset) -> Result<DVector<f64>> {
    net.forward_matrix(data.features())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
    Hinge,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        }
    }

    /// Loss value. Logistic and hinge expect labels in {-1, +1}.
    pub fn value(self, predictions: &DVector<f64>, labels: &DVector<f64>) -> f64 {
        let pairs = predictions.iter().zip(labels.iter());
        match self {
            LossKind::Squared => 0.5 * pairs.map(|(p, y)| (p - y) * (p - y)).sum::<f64>(),
            LossKind::Logistic => pairs.map(|(p, y)| softplus(-y * p)).sum(),
            LossKind::Hinge => pairs.map(|(p, y)| (1.0 - y * p).max(0.0)).sum(),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerForm {
    /// `β/2 · Σ ||θ||²` over all parameters.
    WeightDecay,
    /// `β · ||w^(L)||_1`, valid only for canonical networks.
    L1Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedObjective {
    pub beta: f64,
    pub loss: LossKind,
    pub form: RegularizerForm,
}

impl RegularizedObjective {
    pub fn new(beta: f64, loss: LossKind, form: RegularizerForm) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { beta, loss, form })
    }

    pub fn squared_l1(beta: f64) -> Result<Self> {
        Self::new(beta, LossKind::Squared, RegularizerForm::L1Canonical)
    }

    pub fn squared_weight_decay(beta: f64) -> Result<Self> {
        Self::new(beta, LossKind::Squared, RegularizerForm::WeightDecay)
    }
}

/// Training loss plus the selected regularizer.
pub fn objective(net: &ThresholdNetwork, data: &Dataset, obj: &RegularizedObjective) -> Result<f64> {
    let regularizer = match obj.form {
        RegularizerForm::WeightDecay => 0.5 * obj.beta * net.weight_decay_norm(),
        RegularizerForm::L1Canonical => {
            for (k, sub) in net.subnetworks.iter().enumerate() {
                if let Some((j, n)) = sub
                    .neurons
                    .iter()
                    .enumerate()
                    .find(|(_, n)| n.amplitude.abs() != 1.0)
                {
                    return Err(Error::NotCanonical {
                        subnetwork: k,
                        neuron: j,
                        amplitude: n.amplitude,
                    });
                }
            }
            obj.beta * net.output_l1_norm()
        }
    };
    let predictions = forward(net, data)?;
    Ok(obj.loss.value(&predictions, data.labels()) + regularizer)
}

/// Neurons removed by [`canonicalize`] as `(subnetwork, neuron)` indices of the input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalizationReport {
    pub pruned: Vec<(usize, usize)>,
}

/// Rescale every last-layer amplitude to unit magnitude, moving the scale
/// into the output weight, and drop zero-amplitude neurons.
pub fn canonicalize(net: &ThresholdNetwork) -> (ThresholdNetwork, CanonicalizationReport) {
    let mut report = CanonicalizationReport::default();
    let mut subnetworks = Vec::with_capacity(net.subnetworks.len());
    for (k, sub) in net.subnetworks.iter().enumerate() {
        let mut neurons = Vec::with_capacity(sub.neurons.len());
        for (j, neuron) in sub.neurons.iter().enumerate() {
            let s = neuron.amplitude;
            if s == 0.0 {
                report.pruned.push((k, j));
                continue;
            }
            neurons.push(Neuron {
                weights: neuron.weights.clone(),
                amplitude: s.signum(),
                shift: neuron.shift,
                output: neuron.output * s.abs(),
            });
        }
        if !neurons.is_empty() {
            subnetworks.push(Subnetwork {
                layers: sub.layers.clone(),
                neurons,
            });
        }
    }
    let out = ThresholdNetwork {
        input_dim: net.input_dim,
        subnetworks,
    };
    (out, report)
}

// --- JSON form -------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    /// Row-major `in × out` weights.
    weights: Vec<Vec<f64>>,
    amplitudes: Vec<f64>,
    shifts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NeuronDoc {
    weights: Vec<f64>,
    amplitude: f64,
    shift: f64,
    output: f64,
}

#[derive(Serialize, Deserialize)]
struct SubnetworkDoc {
    layers: Vec<LayerDoc>,
    neurons: Vec<NeuronDoc>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    depth: usize,
    subnetworks: Vec<SubnetworkDoc>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format {
            what: "network JSON",
            message: "ragged weight matrix".into(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl Serialize for ThresholdNetwork {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let doc = NetworkDoc {
            input_dim: self.input_dim,
            depth: self.depth(),
            subnetworks: self
                .subnetworks
                .iter()
                .map(|s| SubnetworkDoc {
                    layers: s
                        .layers
                        .iter()
                        .map(|l| LayerDoc {
                            weights: matrix_rows(&l.weights),
                            amplitudes: l.amplitudes.iter().copied().collect(),
                            shifts: l.shifts.iter().copied().collect(),
                        })
                        .collect(),
                    neurons: s
                        .neurons
                        .iter()
                        .map(|n| NeuronDoc {
                            weights: n.weights.iter().copied().collect(),
                            amplitude: n.amplitude,
                            shift: n.shift,
                            output: n.output,
                        })
                        .collect(),
                })
                .collect(),
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ThresholdNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = NetworkDoc::deserialize(deserializer)?;
        let mut subnetworks = Vec::with_capacity(doc.subnetworks.len());
        for s in doc.subnetworks {
            let mut layers = Vec::with_capacity(s.layers.len());
            for l in s.layers {
                let weights = matrix_from_rows(&l.weights, l.amplitudes.len())
                    .map_err(D::Error::custom)?;
                layers.push(HiddenLayer {
                    weights,
                    amplitudes: DVector::from_vec(l.amplitudes),
                    shifts: DVector::from_vec(l.shifts),
                });
            }
            let neurons = s
                .neurons
                .into_iter()
                .map(|n| Neuron {
                    weights: DVector::from_vec(n.weights),
                    amplitude: n.amplitude,
                    shift: n.shift,
                    output: n.output,
                })
                .collect();
            subnetworks.push(Subnetwork { layers, neurons });
        }
        let net = ThresholdNetwork::new(doc.input_dim, subnetworks).map_err(D::Error::custom)?;
        if !net.subnetworks.is_empty() && net.depth() != doc.depth {
            return Err(D::Error::custom(format!(
                "declared depth {} but layers give {}",
                doc.depth,
                net.depth()
            )));
        }
        Ok(net)
    }
}
