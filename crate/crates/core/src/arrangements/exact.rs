//! Exact pattern enumeration by subset normals.
//!
//! Every face of the central arrangement `{u : z_i^T u = 0}` has an extreme
//! ray in its closure (or is the origin). A ray is the normal of some
//! `(r−1)`-subset of rows, and near it the pattern is fixed off the active
//! rows `A` and ranges over `H(Z_A)` on them. So we visit every subset
//! normal `±u`, enumerate `H(Z_A)` (all sign vectors when the active rows are
//! independent, recursion otherwise) and emit `±u + ε v`.

use std::collections::HashMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{ArrangementMatrix, ArrangementPattern, PatternBits, Witness};
use crate::error::{Error, Result};
use crate::linalg::{cofactor_normal, lstsq, row_space_basis};
use crate::model::{activation_pattern, Dataset};

/// Default cap on the number of `(r−1)`-subsets visited.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

const ACTIVE_TOL: f64 = 1e-9;
const EPS_SCALE: f64 = 1e-6;
const EPS_FLOOR: f64 = 1e-12;
const SNAP_TOL: f64 = 1e-12;

/// All patterns of the dataset's feature matrix.
pub fn enumerate_exact(data: &Dataset) -> Result<ArrangementMatrix> {
    enumerate_matrix(data.features(), DEFAULT_BUDGET)
}

/// All patterns `1{Xw >= 0}` of `x`, each with a verified witness.
pub fn enumerate_matrix(x: &DMatrix<f64>, budget: u128) -> Result<ArrangementMatrix> {
    let unique = unique_rows(x);
    let directions = directions(&unique, budget)?;
    let patterns = directions.into_iter().map(|w| {
        let w = snap(w);
        let bits = PatternBits::from_bools(&activation_pattern(x, w.as_slice(), 0.0));
        ArrangementPattern {
            bits,
            witness: Some(Witness::new(w.as_slice().to_vec())),
        }
    });
    ArrangementMatrix::from_patterns(x.nrows(), 1, patterns)
}

fn unique_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut keep = Vec::new();
    for i in 0..x.nrows() {
        let key: Vec<u64> = x.row(i).iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key, ()).is_none() {
            keep.push(i);
        }
    }
    x.select_rows(&keep)
}

fn snap(mut w: DVector<f64>) -> DVector<f64> {
    let scale = w.amax();
    for v in w.iter_mut() {
        if v.abs() <= SNAP_TOL * scale {
            *v = 0.0;
        }
    }
    w
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Candidate directions in the column space of `m`, covering `H(m)`.
fn directions(m: &DMatrix<f64>, budget: u128) -> Result<Vec<DVector<f64>>> {
    let Some(basis) = row_space_basis(m) else {
        return Ok(vec![DVector::zeros(m.ncols())]);
    };
    let z = m * &basis;
    let local = full_rank_directions(&z, budget)?;
    Ok(local.into_iter().map(|u| &basis * u).collect())
}

fn full_rank_directions(z: &DMatrix<f64>, budget: u128) -> Result<Vec<DVector<f64>>> {
    let r = z.ncols();
    let mut out = vec![DVector::zeros(r)];
    if r == 1 {
        out.push(DVector::from_element(1, 1.0));
        out.push(DVector::from_element(1, -1.0));
        return Ok(out);
    }
    let m = z.nrows();
    let subsets = binomial(m, r - 1);
    if subsets > budget {
        return Err(Error::BudgetExceeded {
            subsets,
            budget,
            advice: "use sample_arrangements for high-rank data",
        });
    }
    let norms: Vec<f64> = (0..m).map(|i| z.row(i).norm()).collect();
    let combos: Vec<Vec<usize>> = (0..m).combinations(r - 1).collect();
    let per_subset: Vec<Vec<DVector<f64>>> = combos
        .par_iter()
        .map(|s| ray_directions(z, s, &norms, budget))
        .collect::<Result<_>>()?;
    out.extend(per_subset.into_iter().flatten());
    Ok(out)
}

fn ray_directions(
    z: &DMatrix<f64>,
    subset: &[usize],
    norms: &[f64],
    budget: u128,
) -> Result<Vec<DVector<f64>>> {
    let r = z.ncols();
    let mut u = cofactor_normal(&z.select_rows(subset));
    let volume: f64 = subset.iter().map(|&i| norms[i]).product();
    let length = u.norm();
    if !(length > 1e-10 * volume) {
        return Ok(Vec::new());
    }
    u /= length;

    let vals = z * &u;
    let (active, inactive): (Vec<usize>, Vec<usize>) =
        (0..z.nrows()).partition(|&i| vals[i].abs() <= ACTIVE_TOL * norms[i]);
    let za = z.select_rows(&active);
    let local: Vec<DVector<f64>> = if active.len() == r - 1 {
        (0..1u32 << active.len())
            .map(|code| {
                let signs = DVector::from_fn(active.len(), |k, _| {
                    if code >> k & 1 == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                });
                lstsq(&za, &signs)
            })
            .collect()
    } else {
        directions(&za, budget)?
    };
    let off_min = inactive
        .iter()
        .map(|&i| vals[i].abs())
        .fold(f64::INFINITY, f64::min);

    let mut out = Vec::with_capacity(2 * (local.len() + 1));
    for sign in [1.0, -1.0] {
        let us = &u * sign;
        out.push(us.clone());
        for v in &local {
            let on = (&za * v).amax();
            if on == 0.0 {
                continue;
            }
            let v = v / on;
            let off = inactive
                .iter()
                .map(|&i| z.row(i).dot(&v.transpose()).abs())
                .fold(0.0, f64::max);
            let eps = (EPS_SCALE * off_min / off.max(1.0)).max(EPS_FLOOR);
            out.push(&us + v * eps);
        }
    }
    Ok(out)
}
