use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, HiddenLayer, Neuron, ThresholdNetwork};

/// Hidden width of the ground-truth teacher networks.
pub const TEACHER_WIDTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `y = sgn(tanh(X W1) w2)`.
    TwoLayerGt,
    /// `y = sgn(tanh(tanh(X W1) W2) w3)`.
    ThreeLayerGt,
    /// Five points `−2..2` with a bias column, labelled by a random
    /// two-neuron threshold network.
    OneD,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "two_layer_gt" => Ok(Self::TwoLayerGt),
            "three_layer_gt" => Ok(Self::ThreeLayerGt),
            "one_d" => Ok(Self::OneD),
            other => Err(Error::InvalidArgument(format!("unknown generator `{other}`"))),
        }
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Samples a dataset. `one_d` ignores `n` and `d`.
pub fn gen_synthetic(kind: SyntheticKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    gen_synthetic_split(kind, n, 0, d, seed).map(|(train, _)| train)
}

/// Train and test sets labelled by the same teacher. For `one_d` both are
/// the five fixed points.
pub fn gen_synthetic_split(
    kind: SyntheticKind,
    n_train: usize,
    n_test: usize,
    d: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if kind == SyntheticKind::OneD {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { i as f64 - 2.0 } else { 1.0 });
        let w = gaussian(2, 2, &mut rng);
        let out: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let teacher = ThresholdNetwork::two_layer(
            2,
            (0..2)
                .map(|k| Neuron::new(w.column(k).into_owned(), 1.0, out[k]))
                .collect(),
        )?;
        let y = teacher.forward_matrix(&x)?;
        let data = Dataset::new(x, y)?.assume_bias()?;
        return Ok((data.clone(), data));
    }
    if n_train == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 1 and d >= 1, got n = {n_train}, d = {d}")));
    }
    let n = n_train + n_test;
    let x = gaussian(n, d, &mut rng);
    let hidden = match kind {
        SyntheticKind::TwoLayerGt => (&x * gaussian(d, TEACHER_WIDTH, &mut rng)).map(f64::tanh),
        SyntheticKind::ThreeLayerGt => {
            let h = (&x * gaussian(d, TEACHER_WIDTH, &mut rng)).map(f64::tanh);
            (h * gaussian(TEACHER_WIDTH, TEACHER_WIDTH, &mut rng)).map(f64::tanh)
        }
        SyntheticKind::OneD => unreachable!(),
    };
    let out = DVector::from_fn(TEACHER_WIDTH, |_, _| StandardNormal.sample(&mut rng));
    let y = (hidden * out).map(sgn);
    let all = Dataset::new(x, y)?;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..n).collect();
    let test_set = if n_test == 0 { all.select_rows(&train) } else { all.select_rows(&test) };
    Ok((all.select_rows(&train), test_set))
}

/// Fixed random threshold features `1{XH >= 0}` plus a bias unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationTransform {
    /// `d × (M + 1)`; the last unit has zero weights and always fires.
    pub layer: HiddenLayer,
}

impl RepresentationTransform {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.d() != self.layer.input_dim() {
            return Err(Error::DimensionMismatch {
                subnetwork: 0,
                layer: 1,
                expected: self.layer.input_dim(),
                found: data.d(),
            });
        }
        Dataset::new(self.layer.forward(data.features()), data.labels().clone())?.assume_bias()
    }
}

/// Draws `H ∈ R^{d×M}` and returns the transformed dataset with the
/// transform for reuse on test data.
pub fn representation_transform(data: &Dataset, m: usize, seed: u64) -> Result<(Dataset, RepresentationTransform)> {
    if m == 0 {
        return Err(Error::InvalidArgument("representation size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = gaussian(data.d(), m, &mut rng).insert_column(m, 0.0);
    let transform = RepresentationTransform {
        layer: HiddenLayer::new(h),
    };
    Ok((transform.apply(data)?, transform))
}
