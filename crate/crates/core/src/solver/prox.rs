use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{support_of, ConvexSolution};
use crate::model::LossKind;

/// Euclidean projection onto `{x : ||x||_1 <= radius}` by randomized pivoting
/// (expected linear time). The pivot stream is seeded so results are
/// reproducible.
pub fn project_l1_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    assert!(radius >= 0.0, "radius must be nonnegative");
    if v.lp_norm(1) <= radius {
        return v.clone();
    }
    if radius == 0.0 {
        return DVector::zeros(v.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut candidates: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    while !candidates.is_empty() {
        let pivot = candidates[rng.random_range(0..candidates.len())];
        let (greater, less): (Vec<f64>, Vec<f64>) = candidates.iter().partition(|&&u| u >= pivot);
        let dsum: f64 = greater.iter().sum();
        if sum + dsum - (count + greater.len()) as f64 * pivot < radius {
            sum += dsum;
            count += greater.len();
            candidates = less;
        } else {
            // drop one copy of the pivot itself
            let mut rest = greater;
            let at = rest.iter().position(|&u| u == pivot).expect("pivot is in its own partition");
            rest.swap_remove(at);
            candidates = rest;
        }
    }
    let theta = (sum - radius) / count as f64;
    v.map(|x| x.signum() * (x.abs() - theta).max(0.0))
}

/// `prox_{β||·||_∞}(v) = v − P_{β·B_1}(v)` (Moreau decomposition).
pub fn prox_linf(v: &DVector<f64>, beta: f64) -> DVector<f64> {
    v - project_l1_ball(v, beta)
}

/// `½||δ − y||² + β(||δ_+||_∞ + ||(−δ)_+||_∞)`.
pub fn closed_form_objective(delta: &DVector<f64>, y: &DVector<f64>, beta: f64) -> f64 {
    let pos = delta.iter().fold(0.0f64, |m, &v| m.max(v));
    let neg = delta.iter().fold(0.0f64, |m, &v| m.max(-v));
    0.5 * (delta - y).norm_squared() + beta * (pos + neg)
}

/// Minimizer of the complete-arrangement problem: one `∞`-norm prox step on
/// each of `y_+` and `(−y)_+`.
pub fn closed_form_solve(y: &DVector<f64>, beta: f64) -> ConvexSolution {
    let y_pos = y.map(|v| v.max(0.0));
    let y_neg = y.map(|v| (-v).max(0.0));
    let pos = prox_linf(&y_pos, beta).map(|v| v.max(0.0));
    let neg = prox_linf(&y_neg, beta).map(|v| v.max(0.0));
    let delta = pos - neg;
    ConvexSolution {
        objective: closed_form_objective(&delta, y, beta),
        beta,
        loss: LossKind::Squared,
        coefficients: None,
        support: support_of(delta.as_slice()),
        delta: Some(delta.as_slice().to_vec()),
        kkt_residual: 0.0,
        iterations: 1,
        converged: true,
    }
}
