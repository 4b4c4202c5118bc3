//! Minimum-norm interpolation: the smallest `ℓ1` output norm among networks
//! that fit the labels exactly.

use nalgebra::DVector;
use threshconvex::arrangements::enumerate_exact;
use threshconvex::model::Dataset;
use threshconvex::solver::{default_path, min_norm_interpolate};

fn main() -> threshconvex::Result<()> {
    let data = Dataset::from_rows(
        &[vec![-2.0, 1.0], vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]],
        &[1.0, -1.0, 1.0, -1.0, 1.0],
    )?;
    let arr = enumerate_exact(&data)?;
    let y: DVector<f64> = data.labels().clone();
    let sol = min_norm_interpolate(&arr, &y, &default_path(&arr, &y, 40))?;
    let w = sol.coefficient_vector().unwrap();
    println!("min ||w||_1 = {:.8}", w.lp_norm(1));
    println!("fit residual {:.1e}", (arr.to_dense() * &w - y).amax());
    for &j in &sol.support {
        println!("  {}  {:+.6}", arr.patterns()[j].bits, w[j]);
    }
    Ok(())
}
