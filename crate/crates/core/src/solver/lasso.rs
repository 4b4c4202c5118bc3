use nalgebra::{DMatrix, DVector};

use super::{negative_loss_gradient, ConvexSolution, LassoProblem};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::model::LossKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop once the largest coefficient change in a pass drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Allow the hinge loss (subgradient descent with averaging, roughly
    /// 1e-3 relative accuracy).
    pub hinge_subgradient: bool,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            hinge_subgradient: false,
            warm_start: None,
        }
    }
}

pub fn lasso_solve(prob: &LassoProblem, tol: f64, max_iter: usize) -> Result<ConvexSolution> {
    lasso_solve_with(
        prob,
        &SolveOptions {
            tol,
            max_iter,
            ..SolveOptions::default()
        },
    )
}

pub fn lasso_solve_with(prob: &LassoProblem, opts: &SolveOptions) -> Result<ConvexSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
    }
    let p = prob.design().ncols();
    let w0 = match &opts.warm_start {
        Some(w) if w.len() == p => w.clone(),
        Some(w) => {
            return Err(Error::InvalidArgument(format!(
                "warm start has {} entries, design has {p} columns",
                w.len()
            )))
        }
        None => DVector::zeros(p),
    };
    let (w, iterations, converged) = match prob.loss() {
        LossKind::Squared => coordinate_descent(prob, w0, opts.tol, opts.max_iter),
        LossKind::Logistic => fista(prob, w0, opts.tol, opts.max_iter),
        LossKind::Hinge if opts.hinge_subgradient => subgradient(prob, w0, opts.max_iter),
        LossKind::Hinge => return Err(Error::UnsupportedLoss("hinge")),
    };
    let reduced = reduce_support(prob.design(), &w);
    // keep the reduction only if rounding left the objective intact
    let w = if prob.objective(&reduced) <= prob.objective(&w) + 1e-12 * prob.objective(&w).abs().max(1.0) {
        reduced
    } else {
        w
    };
    Ok(ConvexSolution::from_coefficients(prob, w, iterations, converged))
}

/// Moves `w` along directions that keep both `Dw` and `||w||_1` fixed until
/// the signed support columns `[d_j; sign(w_j)]` are independent, so at most
/// `n + 1` coefficients stay nonzero. Every loss and the penalty are
/// unchanged along the way.
pub(crate) fn reduce_support(d: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    let mut w = w.clone();
    loop {
        let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
        let k = support.len();
        if k <= 1 {
            return w;
        }
        let n = d.nrows();
        let m = DMatrix::from_fn(n + 1, k, |i, c| if i < n { d[(i, support[c])] } else { w[support[c]].signum() });
        let Some(v) = null_direction(&m) else {
            return w;
        };
        // step until the first coefficient reaches zero
        let (hit, t) = (0..k)
            .filter(|&c| v[c] != 0.0)
            .map(|c| (c, w[support[c]] / v[c]))
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("null vector is nonzero");
        for c in 0..k {
            let j = support[c];
            let next = w[j] - t * v[c];
            // rounding must not flip a sign
            w[j] = if c == hit || next * w[j] <= 0.0 { 0.0 } else { next };
        }
    }
}

/// Unit vector in the numerical null space of `m`, if there is one.
fn null_direction(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = m.shape();
    // pad so the SVD returns a full set of right singular vectors
    let padded = if rows < cols { m.clone().resize(cols, cols, 0.0) } else { m.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let (idx, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &s)| (i, s))?;
    (smin <= 1e-10 * smax.max(1.0)).then(|| v_t.row(idx).transpose())
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn column_dot(d: &DMatrix<f64>, j: usize, r: &DVector<f64>) -> f64 {
    d.column(j).dot(r)
}

/// Working-set coordinate descent: solve on a subset of columns, add the
/// columns that violate optimality, repeat.
fn coordinate_descent(prob: &LassoProblem, w: DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, usize, bool) {
    let d = prob.design();
    let y = prob.targets();
    let beta = prob.beta();
    let (n, p) = d.shape();
    let batch = (2 * n).max(10);
    if p <= 2 * batch {
        return cd_dense(d, y, beta, w, tol, max_iter);
    }
    let by_magnitude = |scores: &DVector<f64>, mask: &[bool]| {
        let mut idx: Vec<usize> = (0..p).filter(|&j| !mask[j]).collect();
        idx.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()).then(a.cmp(&b)));
        idx
    };
    let mut in_set = vec![false; p];
    for j in (0..p).filter(|&j| w[j] != 0.0) {
        in_set[j] = true;
    }
    let r0 = y - d * &w;
    for j in by_magnitude(&d.tr_mul(&r0), &in_set).into_iter().take(batch) {
        in_set[j] = true;
    }
    let mut w = w;
    let mut iters = 0;
    let slack = 1e-10 * beta.max(1.0);
    loop {
        let set: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
        let sub = d.select_columns(&set);
        let w_sub = DVector::from_iterator(set.len(), set.iter().map(|&j| w[j]));
        let (w_sub, used, converged) = cd_dense(&sub, y, beta, w_sub, tol, max_iter - iters);
        iters += used;
        w.fill(0.0);
        for (k, &j) in set.iter().enumerate() {
            w[j] = w_sub[k];
        }
        if !converged {
            return (w, iters, false);
        }
        let corr = d.tr_mul(&(y - d * &w));
        let violators: Vec<usize> = by_magnitude(&corr, &in_set)
            .into_iter()
            .take_while(|&j| corr[j].abs() > beta + slack)
            .take(batch)
            .collect();
        if violators.is_empty() {
            return (w, iters, true);
        }
        if iters >= max_iter {
            return (w, iters, false);
        }
        for j in violators {
            in_set[j] = true;
        }
    }
}

/// Cyclic coordinate descent with exact soft-threshold updates, alternating
/// full sweeps with sweeps over the current support.
fn cd_dense(d: &DMatrix<f64>, y: &DVector<f64>, beta: f64, mut w: DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, usize, bool) {
    let col_sq: Vec<f64> = (0..d.ncols()).map(|j| d.column(j).norm_squared()).collect();
    let all: Vec<usize> = (0..d.ncols()).collect();
    let mut r = y - d * &w;
    let mut iters = 0;
    let mut last_obj = f64::INFINITY;

    let sweep = |idx: &[usize], w: &mut DVector<f64>, r: &mut DVector<f64>| -> f64 {
        let mut max_change: f64 = 0.0;
        for &j in idx {
            if col_sq[j] == 0.0 {
                w[j] = 0.0;
                continue;
            }
            let rho = column_dot(d, j, r) + col_sq[j] * w[j];
            let next = soft_threshold(rho, beta) / col_sq[j];
            let delta = next - w[j];
            if delta != 0.0 {
                r.axpy(-delta, &d.column(j), 1.0);
                w[j] = next;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };
    let mut check = |w: &DVector<f64>, r: &DVector<f64>| {
        if cfg!(debug_assertions) {
            let obj = 0.5 * r.norm_squared() + beta * w.lp_norm(1);
            debug_assert!(
                obj <= last_obj + 1e-9 * (1.0 + last_obj.abs()),
                "coordinate descent increased the objective: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
    };

    while iters < max_iter {
        let change = sweep(&all, &mut w, &mut r);
        iters += 1;
        check(&w, &r);
        r = y - d * &w;
        if change < tol {
            return (w, iters, true);
        }
        if let Some(exact) = polish(d, y, beta, &w) {
            return (exact, iters, true);
        }
        let mut inner = 0;
        while iters < max_iter {
            let active: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
            let change = sweep(&active, &mut w, &mut r);
            iters += 1;
            inner += 1;
            check(&w, &r);
            if change < tol {
                break;
            }
            if inner % 50 == 0 {
                if let Some(exact) = polish(d, y, beta, &w) {
                    return (exact, iters, true);
                }
            }
        }
    }
    (w, iters, false)
}

/// Solves the stationarity equations on the current support and sign
/// pattern. Returns the point only if it keeps the signs, satisfies the
/// optimality conditions on every column and does not raise the objective.
fn polish(d: &DMatrix<f64>, y: &DVector<f64>, beta: f64, w: &DVector<f64>) -> Option<DVector<f64>> {
    let active: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let da = d.select_columns(&active);
    let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| w[j].signum()));
    let rhs = da.tr_mul(y) - &signs * beta;
    let wa = lstsq(&da.tr_mul(&da), &rhs);
    if wa.iter().zip(signs.iter()).any(|(&v, &s)| !(v * s > 0.0)) {
        return None;
    }
    let mut out = DVector::zeros(w.len());
    for (k, &j) in active.iter().enumerate() {
        out[j] = wa[k];
    }
    let r = y - d * &out;
    let corr = d.tr_mul(&r);
    let slack = 1e-10 * beta.max(1.0);
    let mut on_support = active.iter().zip(signs.iter()).peekable();
    for j in 0..w.len() {
        let ok = match on_support.peek() {
            Some(&(&a, &s)) if a == j => {
                on_support.next();
                (corr[j] - beta * s).abs() <= slack
            }
            _ => corr[j].abs() <= beta + slack,
        };
        if !ok {
            return None;
        }
    }
    let value = |v: &DVector<f64>| 0.5 * (y - d * v).norm_squared() + beta * v.lp_norm(1);
    (value(&out) <= value(w)).then_some(out)
}

fn loss_and_gradient(prob: &LassoProblem, w: &DVector<f64>) -> (f64, DVector<f64>) {
    let fit = prob.design() * w;
    let value = prob.loss().value(&fit, prob.targets());
    let neg = negative_loss_gradient(prob.loss(), &fit, prob.targets());
    (value, -prob.design().tr_mul(&neg))
}

/// Accelerated proximal gradient with backtracking and gradient restarts.
fn fista(prob: &LassoProblem, w0: DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, usize, bool) {
    let beta = prob.beta();
    let mut x = w0;
    let mut z = x.clone();
    let mut t: f64 = 1.0;
    let mut lip: f64 = 1e-3;
    for k in 1..=max_iter {
        let (fz, gz) = loss_and_gradient(prob, &z);
        let next = loop {
            let cand = (&z - &gz / lip).map(|v| soft_threshold(v, beta / lip));
            let step = &cand - &z;
            let fit = prob.design() * &cand;
            let fc = prob.loss().value(&fit, prob.targets());
            if fc <= fz + gz.dot(&step) + 0.5 * lip * step.norm_squared() + 1e-15 * fz.abs() {
                break cand;
            }
            lip *= 2.0;
        };
        let change = (&next - &x).amax();
        // restart momentum when it points uphill
        let restart = (&z - &next).dot(&(&next - &x)) > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        z = if restart {
            next.clone()
        } else {
            &next + (&next - &x) * ((t - 1.0) / t_next)
        };
        t = t_next;
        x = next;
        if change < tol {
            return (x, k, true);
        }
    }
    (x, max_iter, false)
}

/// Subgradient descent averaged over doubling windows, so the returned point
/// is the mean of the most recent window.
fn subgradient(prob: &LassoProblem, w0: DVector<f64>, max_iter: usize) -> (DVector<f64>, usize, bool) {
    let d = prob.design();
    let beta = prob.beta();
    let scale = d.norm().max(1.0);
    let mut w = w0.clone();
    let mut avg = w0;
    let mut window_start = 1;
    let mut checkpoint = f64::INFINITY;
    let mut converged = false;
    for k in 1..=max_iter {
        let fit = d * &w;
        let neg = negative_loss_gradient(prob.loss(), &fit, prob.targets());
        let g = -d.tr_mul(&neg) + w.map(|v| if v == 0.0 { 0.0 } else { beta * v.signum() });
        let eta = 1.0 / (scale * (k as f64).sqrt());
        w -= g * eta;
        avg += (&w - &avg) / (k - window_start + 1) as f64;
        if k.is_power_of_two() && k < max_iter {
            let obj = prob.objective(&avg);
            converged = (checkpoint - obj).abs() <= 1e-3 * obj.abs().max(1.0);
            checkpoint = obj;
            window_start = k + 1;
            avg = w.clone();
        }
    }
    (avg, max_iter, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::kkt_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(d: DMatrix<f64>, y: &[f64], beta: f64) -> LassoProblem {
        LassoProblem::from_dense(d, DVector::from_row_slice(y), beta, LossKind::Squared).unwrap()
    }

    #[test]
    fn soft_threshold_design() {
        let prob = problem(DMatrix::identity(2, 2), &[3.0, 1.0], 1.0);
        let sol = lasso_solve(&prob, 1e-12, 1000).unwrap();
        assert_eq!(sol.coefficients.as_deref(), Some(&[2.0, 0.0][..]));
        assert_eq!(sol.objective, 3.0);
        assert!(sol.converged);
        assert_eq!(sol.support, vec![0]);
    }

    #[test]
    fn unregularized_square_solve() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0]);
        let prob = problem(d.clone(), &[1.0, 2.0, 3.0], 0.0);
        let sol = lasso_solve(&prob, 1e-13, 100_000).unwrap();
        let w = sol.coefficient_vector().unwrap();
        assert!((d * w - prob.targets()).amax() < 1e-9);
    }

    #[test]
    fn zero_above_critical_beta() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let y = [1.0, -2.0, 0.5];
        let bmax = d.tr_mul(&DVector::from_row_slice(&y)).amax();
        let sol = lasso_solve(&problem(d, &y, bmax), 1e-12, 1000).unwrap();
        assert!(sol.coefficients.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hinge_requires_opt_in() {
        let prob = LassoProblem::from_dense(DMatrix::identity(2, 2), DVector::from_row_slice(&[1.0, -1.0]), 0.1, LossKind::Hinge)
            .unwrap();
        assert!(matches!(lasso_solve(&prob, 1e-8, 10), Err(Error::UnsupportedLoss("hinge"))));
        let sol = lasso_solve_with(
            &prob,
            &SolveOptions {
                hinge_subgradient: true,
                max_iter: 20_000,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        // optimum: w = (1, -1), objective 0.2
        assert!((sol.objective - 0.2).abs() < 1e-3 * 1.0, "{}", sol.objective);
    }

    #[test]
    fn logistic_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = DMatrix::from_fn(8, 5, |_, _| f64::from(u8::from(rng.random_bool(0.5))));
        let y = DVector::from_fn(8, |i, _| if i % 3 == 0 { -1.0 } else { 1.0 });
        let prob = LassoProblem::from_dense(d, y, 0.3, LossKind::Logistic).unwrap();
        let sol = lasso_solve(&prob, 1e-11, 200_000).unwrap();
        assert!(sol.converged);
        assert!(kkt_check(&prob, &sol, 1e-6).passed, "{:?}", kkt_check(&prob, &sol, 1e-6));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DMatrix::from_fn(10, 30, |_, _| f64::from(u8::from(rng.random_bool(0.5))));
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let prob = LassoProblem::from_dense(d, y, 1e-4, LossKind::Squared).unwrap();
        let sol = lasso_solve(&prob, 1e-14, 2).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
        assert!(lasso_solve(&prob, 0.0, 2).is_err());
    }

    #[test]
    fn working_set_matches_full_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = DMatrix::from_fn(6, 300, |_, _| f64::from(u8::from(rng.random_bool(0.5))));
        let y = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
        let prob = LassoProblem::from_dense(d.clone(), y.clone(), 0.05, LossKind::Squared).unwrap();
        let sol = lasso_solve(&prob, 1e-12, 100_000).unwrap();
        let (w, _, converged) = cd_dense(&d, &y, 0.05, DVector::zeros(300), 1e-12, 1_000_000);
        assert!(sol.converged && converged);
        assert!((sol.objective - prob.objective(&w)).abs() < 1e-10);
        assert!(kkt_check(&prob, &sol, 1e-9).passed);
    }

    #[test]
    fn reduction_keeps_fit_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DMatrix::from_fn(4, 16, |_, _| f64::from(u8::from(rng.random_bool(0.5))));
        let w = DVector::from_fn(16, |_, _| rng.random_range(0.1..1.0));
        let r = reduce_support(&d, &w);
        assert!(r.iter().filter(|&&v| v != 0.0).count() <= 5);
        assert!((&d * &r - &d * &w).amax() < 1e-10);
        assert!((r.lp_norm(1) - w.lp_norm(1)).abs() < 1e-10);
        assert!(r.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn warm_start_is_used() {
        let prob = problem(DMatrix::identity(2, 2), &[3.0, 1.0], 1.0);
        let sol = lasso_solve_with(
            &prob,
            &SolveOptions {
                warm_start: Some(DVector::from_row_slice(&[2.0, 0.0])),
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
    }
}
