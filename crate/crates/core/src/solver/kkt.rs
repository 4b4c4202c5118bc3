use serde::{Deserialize, Serialize};

use super::{ConvexSolution, LassoProblem};

/// Optimality certificate of a Lasso solution.
///
/// With `z = −∇L(Dw)` (the residual `y − Dw` for squared loss), `w` is
/// optimal iff `|d_iᵀz| <= β` for every column and `d_iᵀz = β·sign(w_i)` on
/// the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub passed: bool,
    /// `max_i |d_iᵀz| − β`.
    pub dual_violation: f64,
    /// `(i, |d_iᵀz − β·sign(w_i)|)` for each support index.
    pub support_slacks: Vec<(usize, f64)>,
    pub tol: f64,
}

impl KktReport {
    /// Largest violation of either condition (0 when both hold exactly).
    pub fn residual(&self) -> f64 {
        self.support_slacks
            .iter()
            .map(|s| s.1)
            .fold(self.dual_violation.max(0.0), f64::max)
    }

    fn failed(tol: f64) -> Self {
        Self {
            passed: false,
            dual_violation: f64::INFINITY,
            support_slacks: Vec::new(),
            tol,
        }
    }
}

pub fn kkt_check(prob: &LassoProblem, sol: &ConvexSolution, tol: f64) -> KktReport {
    let Some(w) = sol.coefficient_vector() else {
        return KktReport::failed(tol);
    };
    if w.len() != prob.design().ncols() {
        return KktReport::failed(tol);
    }
    let z = prob.dual_point(&w);
    let corr = prob.design().tr_mul(&z);
    let beta = prob.beta();
    let dual_violation = corr.amax() - beta;
    let support_slacks: Vec<(usize, f64)> = sol
        .support
        .iter()
        .map(|&i| (i, (corr[i] - beta * w[i].signum()).abs()))
        .collect();
    let passed = dual_violation <= tol * beta.max(1.0) && support_slacks.iter().all(|s| s.1 <= tol);
    KktReport {
        passed,
        dual_violation,
        support_slacks,
        tol,
    }
}
