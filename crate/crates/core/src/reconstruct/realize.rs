use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrangements::{ArrangementPattern, PatternBits};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::model::{activation_pattern, Dataset};

/// How a pattern was turned into a hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealizationMethod {
    /// The stored enumeration or sampling witness.
    Witness,
    /// Least squares on the 0/1 pattern, evaluated with threshold 0.5.
    Pinv,
    /// Maximum-margin linear classifier on the `±1` pattern.
    Svm,
}

impl std::str::FromStr for RealizationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "witness" => Ok(Self::Witness),
            "pinv" => Ok(Self::Pinv),
            "svm" => Ok(Self::Svm),
            other => Err(Error::InvalidArgument(format!("unknown realization method `{other}`"))),
        }
    }
}

/// Hidden weight and shift with `1{Xw − shift >= 0}` equal to the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRealization {
    pub bits: PatternBits,
    pub weight: DVector<f64>,
    pub shift: f64,
    pub method: RealizationMethod,
}

/// Penalty constant of the soft-margin problem.
pub const SVM_C: f64 = 1e4;
pub const DEFAULT_SVM_ITERATIONS: usize = 50_000;

fn verify(
    x: &DMatrix<f64>,
    bits: &PatternBits,
    weight: DVector<f64>,
    shift: f64,
    method: RealizationMethod,
) -> Result<PatternRealization> {
    let got = activation_pattern(x, weight.as_slice(), shift);
    let mismatched: Vec<usize> = (0..bits.len()).filter(|&i| got[i] != bits.get(i)).collect();
    if !mismatched.is_empty() {
        return Err(Error::RealizationFailed {
            method: match method {
                RealizationMethod::Witness => "witness",
                RealizationMethod::Pinv => "pinv",
                RealizationMethod::Svm => "svm",
            },
            mismatched,
        });
    }
    Ok(PatternRealization {
        bits: bits.clone(),
        weight,
        shift,
        method,
    })
}

fn check_len(x: &DMatrix<f64>, bits: &PatternBits) -> Result<()> {
    if bits.len() != x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "pattern has {} entries for {} samples",
            bits.len(),
            x.nrows()
        )));
    }
    Ok(())
}

/// Uses the pattern's own witness; it must read the data columns directly.
pub fn realize_witness(data: &Dataset, pattern: &ArrangementPattern) -> Result<PatternRealization> {
    let x = data.features();
    check_len(x, &pattern.bits)?;
    let witness = pattern
        .witness
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("pattern has no witness".into()))?;
    if witness.columns.is_some() || witness.weights.len() != x.ncols() {
        return Err(Error::InvalidArgument(
            "witness does not act on the data features".into(),
        ));
    }
    verify(
        x,
        &pattern.bits,
        DVector::from_column_slice(&witness.weights),
        witness.shift,
        RealizationMethod::Witness,
    )
}

pub fn realize_pinv(data: &Dataset, pattern: &ArrangementPattern) -> Result<PatternRealization> {
    realize_pinv_bits(data.features(), &pattern.bits)
}

pub(crate) fn realize_pinv_bits(x: &DMatrix<f64>, bits: &PatternBits) -> Result<PatternRealization> {
    check_len(x, bits)?;
    let w = lstsq(x, &bits.to_vector());
    verify(x, bits, w, 0.5, RealizationMethod::Pinv)
}

pub fn realize_svm(
    data: &Dataset,
    pattern: &ArrangementPattern,
    iterations: usize,
    seed: u64,
) -> Result<PatternRealization> {
    realize_svm_bits(data.features(), &pattern.bits, iterations, seed)
}

/// Pegasos on `½λ||w||² + (1/n)Σ hinge(y_i x_iᵀw)` with `λ = 1/(C n)`.
/// The averaged iterate is tried first, then the last one.
pub(crate) fn realize_svm_bits(
    x: &DMatrix<f64>,
    bits: &PatternBits,
    iterations: usize,
    seed: u64,
) -> Result<PatternRealization> {
    check_len(x, bits)?;
    let n = x.nrows();
    let labels: Vec<f64> = (0..n).map(|i| if bits.get(i) { 1.0 } else { -1.0 }).collect();
    let lambda = 1.0 / (SVM_C * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DVector::zeros(x.ncols());
    let mut avg = DVector::zeros(x.ncols());
    for t in 1..=iterations.max(1) {
        let i = rng.random_range(0..n);
        let xi = x.row(i).transpose();
        let margin = labels[i] * xi.dot(&w);
        let eta = 1.0 / (lambda * t as f64);
        w *= 1.0 - 1.0 / t as f64;
        if margin < 1.0 {
            w.axpy(eta * labels[i], &xi, 1.0);
        }
        let norm = w.norm();
        if norm > radius {
            w *= radius / norm;
        }
        avg += (&w - &avg) / t as f64;
    }
    verify(x, bits, avg, 0.0, RealizationMethod::Svm).or_else(|_| verify(x, bits, w, 0.0, RealizationMethod::Svm))
}
