//! Convex programs equivalent to threshold-network training.
//!
//! * [`lasso_solve`]: `min_w L(Dw, y) + β||w||_1` over an arrangement design.
//! * [`closed_form_solve`]: the complete-arrangement problem
//!   `min_δ ½||δ − y||² + β(||δ_+||_∞ + ||(−δ)_+||_∞)` via two prox steps.
//! * [`min_norm_interpolate`]: `min ||w||_1 s.t. Dw = y` along a Lasso path.
//! * [`kkt_check`]: dual feasibility certificate for a Lasso solution.

mod interpolate;
mod kkt;
mod lasso;
mod prox;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arrangements::ArrangementMatrix;
use crate::error::{Error, Result};
use crate::model::LossKind;

pub use interpolate::{default_path, min_norm_interpolate};
pub use kkt::{kkt_check, KktReport};
pub use lasso::{lasso_solve, lasso_solve_with, SolveOptions};
pub use prox::{closed_form_solve, closed_form_objective, project_l1_ball, prox_linf};

/// Coefficients with magnitude above this are in the support.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    design: DMatrix<f64>,
    targets: DVector<f64>,
    beta: f64,
    loss: LossKind,
}

impl LassoProblem {
    pub fn new(design: &ArrangementMatrix, targets: DVector<f64>, beta: f64, loss: LossKind) -> Result<Self> {
        Self::from_dense(design.to_dense(), targets, beta, loss)
    }

    /// Problem over an arbitrary real design matrix.
    pub fn from_dense(design: DMatrix<f64>, targets: DVector<f64>, beta: f64, loss: LossKind) -> Result<Self> {
        if design.nrows() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "design has {} rows but {} targets",
                design.nrows(),
                targets.len()
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self {
            design,
            targets,
            beta,
            loss,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::from_dense(self.design.clone(), self.targets.clone(), beta, self.loss)
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        let fit = &self.design * w;
        self.loss.value(&fit, &self.targets) + self.beta * w.lp_norm(1)
    }

    /// `−∇_f L(f, y)` at `f = Dw`; the dual variable `z` of the certificate.
    pub(crate) fn dual_point(&self, w: &DVector<f64>) -> DVector<f64> {
        let fit = &self.design * w;
        negative_loss_gradient(self.loss, &fit, &self.targets)
    }
}

pub(crate) fn negative_loss_gradient(loss: LossKind, fit: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    match loss {
        LossKind::Squared => y - fit,
        LossKind::Logistic => DVector::from_fn(fit.len(), |i, _| {
            // y σ(−y f)
            let m = y[i] * fit[i];
            y[i] * sigmoid(-m)
        }),
        LossKind::Hinge => DVector::from_fn(fit.len(), |i, _| {
            if y[i] * fit[i] < 1.0 {
                y[i]
            } else {
                0.0
            }
        }),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of a convex solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub objective: f64,
    pub beta: f64,
    pub loss: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    pub support: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ConvexSolution {
    pub(crate) fn from_coefficients(
        prob: &LassoProblem,
        w: DVector<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let mut sol = Self {
            objective: prob.objective(&w),
            beta: prob.beta,
            loss: prob.loss,
            support: support_of(w.as_slice()),
            coefficients: Some(w.as_slice().to_vec()),
            delta: None,
            kkt_residual: 0.0,
            iterations,
            converged,
        };
        sol.kkt_residual = kkt_check(prob, &sol, 0.0).residual();
        sol
    }

    pub fn coefficient_vector(&self) -> Option<DVector<f64>> {
        self.coefficients.as_deref().map(DVector::from_column_slice)
    }

    pub fn delta_vector(&self) -> Option<DVector<f64>> {
        self.delta.as_deref().map(DVector::from_column_slice)
    }
}

pub(crate) fn support_of(v: &[f64]) -> Vec<usize> {
    (0..v.len()).filter(|&i| v[i].abs() > SUPPORT_TOL).collect()
}

/// `m*`, the number of neurons the solution needs.
pub fn critical_width(sol: &ConvexSolution) -> usize {
    sol.support.len()
}
