use nalgebra::{DMatrix, DVector};

use super::{lasso_solve_with, ConvexSolution, LassoProblem, SolveOptions};
use crate::arrangements::ArrangementMatrix;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::model::LossKind;

/// Geometric path from `max_i |d_iᵀy|` down to `1e-10·||y||`.
pub fn default_path(design: &ArrangementMatrix, y: &DVector<f64>, steps: usize) -> Vec<f64> {
    let d = design.to_dense();
    let hi = d.tr_mul(y).amax();
    let lo = 1e-10 * y.norm();
    if steps < 2 || hi <= lo {
        return vec![lo];
    }
    let ratio = (lo / hi).powf(1.0 / (steps - 1) as f64);
    (0..steps).map(|k| hi * ratio.powi(k as i32)).collect()
}

/// `min ||w||_1 s.t. Dw = y`, approached by warm-started Lasso solves along
/// `path_betas`. The `ℓ1` norm of the result is the gauge of `y` with
/// respect to the convex hull of `±` patterns.
pub fn min_norm_interpolate(
    design: &ArrangementMatrix,
    y: &DVector<f64>,
    path_betas: &[f64],
) -> Result<ConvexSolution> {
    min_norm_interpolate_dense(design.to_dense(), y, path_betas)
}

pub(crate) fn min_norm_interpolate_dense(
    d: DMatrix<f64>,
    y: &DVector<f64>,
    path_betas: &[f64],
) -> Result<ConvexSolution> {
    if d.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but {} targets",
            d.nrows(),
            y.len()
        )));
    }
    let ynorm = y.norm();
    if ynorm == 0.0 {
        let prob = LassoProblem::from_dense(d, y.clone(), 0.0, LossKind::Squared)?;
        let p = prob.design().ncols();
        return Ok(ConvexSolution::from_coefficients(&prob, DVector::zeros(p), 0, true));
    }
    let Some(&last) = path_betas.last() else {
        return Err(Error::InvalidArgument("empty beta path".into()));
    };
    if path_betas.iter().any(|&b| !(b > 0.0)) || path_betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("beta path must be positive and decreasing".into()));
    }
    if last >= 1e-8 * ynorm {
        return Err(Error::InvalidArgument(format!(
            "beta path must end below 1e-8·||y|| = {:e}",
            1e-8 * ynorm
        )));
    }
    let ls = lstsq(&d, y);
    let residual = (&d * ls - y).norm();
    if residual >= 1e-8 * ynorm.max(1.0) {
        return Err(Error::Infeasible { residual });
    }

    let mut prob = LassoProblem::from_dense(d, y.clone(), path_betas[0], LossKind::Squared)?;
    let mut opts = SolveOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
        ..SolveOptions::default()
    };
    let mut sol = None;
    let mut iterations = 0;
    for &beta in path_betas {
        prob = prob.with_beta(beta)?;
        let s = lasso_solve_with(&prob, &opts)?;
        iterations += s.iterations;
        opts.warm_start = s.coefficient_vector();
        sol = Some(s);
    }
    let mut sol = sol.expect("path is nonempty");
    sol.iterations = iterations;
    Ok(sol)
}
