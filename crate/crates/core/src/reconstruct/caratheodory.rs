use nalgebra::DVector;

use crate::arrangements::PatternBits;
use crate::error::{Error, Result};

/// `v = scale · Σ_k γ_k · atom_k` with binary atoms and `Σ γ_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaratheodoryDecomposition {
    pub scale: f64,
    pub atoms: Vec<PatternBits>,
    pub gammas: Vec<f64>,
    /// `scale · γ_k`, kept unrounded for exact recombination.
    pub steps: Vec<f64>,
}

impl CaratheodoryDecomposition {
    pub fn recombine(&self, n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        for (atom, &step) in self.atoms.iter().zip(&self.steps) {
            for i in atom.ones() {
                v[i] += step;
            }
        }
        v
    }
}

/// Superlevel-set decomposition of a nonnegative vector: with the distinct
/// positive values `a_1 < … < a_K`, atom `k` is `1{v >= a_k}` and
/// `γ_k = (a_k − a_{k−1}) / a_K`.
pub fn caratheodory_decompose(v: &DVector<f64>) -> Result<CaratheodoryDecomposition> {
    if let Some(index) = v.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::NegativeEntry { index, value: v[index] });
    }
    let mut levels: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let Some(&scale) = levels.last() else {
        return Ok(CaratheodoryDecomposition {
            scale: 0.0,
            atoms: Vec::new(),
            gammas: Vec::new(),
            steps: Vec::new(),
        });
    };
    let mut atoms = Vec::with_capacity(levels.len());
    let mut steps = Vec::with_capacity(levels.len());
    let mut prev = 0.0;
    for &a in &levels {
        atoms.push(PatternBits::from_bools(&v.iter().map(|&x| x >= a).collect::<Vec<_>>()));
        steps.push(a - prev);
        prev = a;
    }
    let gammas = steps.iter().map(|s| s / scale).collect();
    Ok(CaratheodoryDecomposition {
        scale,
        atoms,
        gammas,
        steps,
    })
}
