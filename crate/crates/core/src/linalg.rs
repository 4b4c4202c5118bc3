//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the row space of `x` as a `d × r` matrix.
///
/// Returns `None` for the zero matrix.
pub fn row_space_basis(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = x.clone().svd(false, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || !smax.is_finite() {
        return None;
    }
    let v_t = svd.v_t.expect("v_t requested");
    let mut keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_TOL * smax)
        .collect();
    keep.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let basis = DMatrix::from_fn(x.ncols(), keep.len(), |i, k| v_t[(keep[k], i)]);
    Some(basis)
}

/// Numerical rank with the crate-wide tolerance.
pub fn rank(x: &DMatrix<f64>) -> usize {
    row_space_basis(x).map_or(0, |b| b.ncols())
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, RANK_TOL * smax)
        .expect("both factors were computed")
}

/// Determinant of a small square matrix.
pub fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

/// Normal of the hyperplane spanned by the `k = r − 1` rows of `rows` (`k × r`),
/// from signed cofactors.
pub fn cofactor_normal(rows: &DMatrix<f64>) -> DVector<f64> {
    let r = rows.ncols();
    debug_assert_eq!(rows.nrows() + 1, r);
    DVector::from_fn(r, |k, _| {
        let minor = rows.clone().remove_column(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * det(&minor)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_basis() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 0.0]);
        assert_eq!(rank(&x), 2);
        assert_eq!(rank(&DMatrix::zeros(2, 2)), 0);
        let b = row_space_basis(&x).unwrap();
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        // rows of x lie in the span
        let proj = &x * &b * b.transpose();
        assert!((proj - &x).norm() < 1e-10);
    }

    #[test]
    fn normal_is_orthogonal() {
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let u = cofactor_normal(&rows);
        assert!((&rows * &u).norm() < 1e-12);
        assert!(u.norm() > 0.0);
        let u = cofactor_normal(&DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
        assert_eq!(u.as_slice(), &[4.0, -3.0]);
    }

    #[test]
    fn lstsq_example() {
        let x = DMatrix::from_row_slice(3, 2, &[-1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        let w = lstsq(&x, &DVector::from_row_slice(&[0.0, 1.0, 1.0]));
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
