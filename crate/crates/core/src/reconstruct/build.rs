use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::caratheodory::caratheodory_decompose;
use super::realize::{
    realize_pinv, realize_pinv_bits, realize_svm, realize_svm_bits, realize_witness, PatternRealization,
    RealizationMethod, DEFAULT_SVM_ITERATIONS,
};
use crate::arrangements::{ArrangementMatrix, PatternBits};
use crate::error::{Error, Result};
use crate::model::{activation_pattern, Dataset, HiddenLayer, Neuron, Subnetwork, ThresholdNetwork};
use crate::solver::ConvexSolution;

fn coefficients(sol: &ConvexSolution, p: usize) -> Result<&[f64]> {
    let w = sol
        .coefficients
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("solution has no Lasso coefficients".into()))?;
    if w.len() != p {
        return Err(Error::InvalidArgument(format!(
            "solution has {} coefficients but the arrangement has {p} patterns",
            w.len()
        )));
    }
    Ok(w)
}

/// Two-layer network with one unit-amplitude neuron per support pattern and
/// the Lasso coefficient as its output weight.
pub fn build_two_layer(
    data: &Dataset,
    sol: &ConvexSolution,
    arr: &ArrangementMatrix,
    method: RealizationMethod,
) -> Result<ThresholdNetwork> {
    let w = coefficients(sol, arr.p())?;
    let realizations: Vec<(PatternRealization, f64)> = sol
        .support
        .par_iter()
        .map(|&j| {
            let pattern = &arr.patterns()[j];
            let r = match method {
                RealizationMethod::Witness => realize_witness(data, pattern),
                RealizationMethod::Pinv => realize_pinv(data, pattern),
                RealizationMethod::Svm => realize_svm(data, pattern, DEFAULT_SVM_ITERATIONS, j as u64),
            }?;
            Ok((r, w[j]))
        })
        .collect::<Result<_>>()?;
    let neurons = realizations
        .into_iter()
        .map(|(r, out)| Neuron::new(r.weight, 1.0, out).with_shift(r.shift))
        .collect();
    ThresholdNetwork::two_layer(data.d(), neurons)
}

/// Deep network from a Lasso over `layers.last()`, where each arrangement in
/// `layers` was grown from the previous one (the first acts on the data).
///
/// Every support pattern becomes a subnetwork whose trunk recomputes exactly
/// the previous-layer columns its witness reads.
pub fn build_deep(data: &Dataset, sol: &ConvexSolution, layers: &[ArrangementMatrix]) -> Result<ThresholdNetwork> {
    let Some(top) = layers.last() else {
        return Err(Error::InvalidArgument("no arrangement layers".into()));
    };
    let w = coefficients(sol, top.p())?;
    let witness_of = |level: usize, j: usize| {
        layers[level].patterns()[j]
            .witness
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("pattern {j} of layer {} has no witness", level + 1)))
    };
    let mut subnetworks = Vec::with_capacity(sol.support.len());
    for &j in &sol.support {
        // columns needed at each level, top-down
        let mut needed: Vec<Vec<usize>> = vec![Vec::new(); layers.len()];
        needed[layers.len() - 1] = vec![j];
        for level in (1..layers.len()).rev() {
            let mut cols = BTreeSet::new();
            for &k in &needed[level] {
                let wit = witness_of(level, k)?;
                let reads = wit
                    .columns
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("layer {} witness lacks columns", level + 1)))?;
                cols.extend(reads.iter().copied());
            }
            needed[level - 1] = cols.into_iter().collect();
        }

        let mut trunk = Vec::with_capacity(layers.len() - 1);
        for level in 0..layers.len() - 1 {
            let inputs = if level == 0 { data.d() } else { needed[level - 1].len() };
            let outputs = &needed[level];
            let mut weights = DMatrix::zeros(inputs, outputs.len());
            let mut shifts = DVector::zeros(outputs.len());
            for (c, &k) in outputs.iter().enumerate() {
                let wit = witness_of(level, k)?;
                place(&mut weights, c, wit, level, &needed)?;
                shifts[c] = wit.shift;
            }
            trunk.push(HiddenLayer {
                weights,
                amplitudes: DVector::from_element(outputs.len(), 1.0),
                shifts,
            });
        }

        let level = layers.len() - 1;
        let wit = witness_of(level, j)?;
        let inputs = if level == 0 { data.d() } else { needed[level - 1].len() };
        let mut weights = DMatrix::zeros(inputs, 1);
        place(&mut weights, 0, wit, level, &needed)?;
        subnetworks.push(Subnetwork {
            layers: trunk,
            neurons: vec![Neuron::new(weights.column(0).into_owned(), 1.0, w[j]).with_shift(wit.shift)],
        });
    }
    ThresholdNetwork::new(data.d(), subnetworks)
}

/// Writes a witness into column `c`, mapping the previous-layer columns it
/// reads to their positions among `needed[level − 1]`.
fn place(
    weights: &mut DMatrix<f64>,
    c: usize,
    wit: &crate::arrangements::Witness,
    level: usize,
    needed: &[Vec<usize>],
) -> Result<()> {
    match (&wit.columns, level) {
        (None, 0) => {
            if wit.weights.len() != weights.nrows() {
                return Err(Error::InvalidArgument("first-layer witness does not match the data".into()));
            }
            for (r, &v) in wit.weights.iter().enumerate() {
                weights[(r, c)] = v;
            }
        }
        (Some(cols), l) if l > 0 => {
            for (&col, &v) in cols.iter().zip(&wit.weights) {
                let r = needed[level - 1]
                    .binary_search(&col)
                    .expect("needed columns include every witness input");
                weights[(r, c)] = v;
            }
        }
        _ => return Err(Error::InvalidArgument("witness does not match its layer".into())),
    }
    Ok(())
}

/// Lasso coefficients of a two-layer network over `arr`: each neuron adds
/// `amplitude · output` to the column of the pattern it produces on `data`.
pub fn lasso_coefficients(net: &ThresholdNetwork, data: &Dataset, arr: &ArrangementMatrix) -> Result<DVector<f64>> {
    if net.depth() > 2 {
        return Err(Error::InvalidArgument(format!("expected a two-layer network, got depth {}", net.depth())));
    }
    if net.input_dim() != data.d() {
        return Err(Error::DimensionMismatch {
            subnetwork: 0,
            layer: 1,
            expected: net.input_dim(),
            found: data.d(),
        });
    }
    let mut w = DVector::zeros(arr.p());
    for neuron in net.neurons() {
        let bits = PatternBits::from_bools(&activation_pattern(data.features(), neuron.weights.as_slice(), neuron.shift));
        let j = arr
            .index_of(&bits)
            .ok_or_else(|| Error::InvalidArgument(format!("neuron pattern {bits} is not in the arrangement")))?;
        w[j] += neuron.amplitude * neuron.output;
    }
    Ok(w)
}

/// Network whose training predictions equal the closed-form `δ`.
///
/// `δ_+` and `(−δ)_+` are split into superlevel-set atoms; each atom becomes
/// a neuron with output weight `scale·γ` and amplitude `+1` (for `δ_+`) or
/// `−1` (for `(−δ)_+`). Atoms are realized on the representation produced by
/// `trunk` (the raw features when `None`), by least squares first and the
/// SVM route second.
pub fn build_from_delta(data: &Dataset, sol: &ConvexSolution, trunk: Option<&[HiddenLayer]>) -> Result<ThresholdNetwork> {
    let delta = sol
        .delta_vector()
        .ok_or_else(|| Error::InvalidArgument("solution has no delta".into()))?;
    let n = data.n();
    if delta.len() != n {
        return Err(Error::InvalidArgument(format!("delta has {} entries for {n} samples", delta.len())));
    }
    let layers: Vec<HiddenLayer> = trunk.map(<[HiddenLayer]>::to_vec).unwrap_or_default();
    let mut h = data.features().clone();
    for layer in &layers {
        if layer.input_dim() != h.ncols() {
            return Err(Error::DimensionMismatch {
                subnetwork: 0,
                layer: 1,
                expected: h.ncols(),
                found: layer.input_dim(),
            });
        }
        h = layer.forward(&h);
    }

    let pos = caratheodory_decompose(&delta.map(|v| v.max(0.0)))?;
    let neg = caratheodory_decompose(&delta.map(|v| (-v).max(0.0)))?;
    let atoms: Vec<(&crate::arrangements::PatternBits, f64, f64)> = pos
        .atoms
        .iter()
        .zip(&pos.steps)
        .map(|(a, &s)| (a, 1.0, s))
        .chain(neg.atoms.iter().zip(&neg.steps).map(|(a, &s)| (a, -1.0, s)))
        .collect();

    let realized: Vec<Option<PatternRealization>> = atoms
        .par_iter()
        .enumerate()
        .map(|(k, (bits, _, _))| {
            realize_pinv_bits(&h, bits)
                .or_else(|_| realize_svm_bits(&h, bits, DEFAULT_SVM_ITERATIONS, k as u64))
                .ok()
        })
        .collect();
    let failed: Vec<usize> = (0..atoms.len()).filter(|&k| realized[k].is_none()).collect();
    if !failed.is_empty() {
        return Err(Error::UnrealizableAtoms(failed));
    }
    let neurons: Vec<Neuron> = realized
        .into_iter()
        .zip(&atoms)
        .map(|(r, &(_, sign, step))| {
            let r = r.expect("failures returned above");
            Neuron::new(r.weight, sign, step).with_shift(r.shift)
        })
        .collect();
    let net = if neurons.is_empty() {
        ThresholdNetwork::empty(data.d())
    } else {
        ThresholdNetwork::new(data.d(), vec![Subnetwork { layers, neurons }])?
    };

    let out = net.forward_matrix(data.features())?;
    let mismatched: Vec<usize> = (0..n).filter(|&i| (out[i] - delta[i]).abs() > 1e-9).collect();
    if !mismatched.is_empty() {
        return Err(Error::RealizationFailed {
            method: "delta assembly",
            mismatched,
        });
    }
    Ok(net)
}
