//! Straight-through-estimator training on the five-point dataset, compared
//! with the convex optimum.

use threshconvex::arrangements::enumerate_exact;
use threshconvex::harness::{gen_synthetic, SyntheticKind};
use threshconvex::model::LossKind;
use threshconvex::solver::{lasso_solve, LassoProblem};
use threshconvex::ste::{multi_trial, SteConfig, Surrogate};

fn main() -> threshconvex::Result<()> {
    let data = gen_synthetic(SyntheticKind::OneD, 0, 0, 2)?;
    let beta = 1e-2;
    let arr = enumerate_exact(&data)?;
    let prob = LassoProblem::new(&arr, data.labels().clone(), beta, LossKind::Squared)?;
    let convex = lasso_solve(&prob, 1e-12, 100_000)?;
    println!("convex optimum {:.6e}", convex.objective);

    for surrogate in Surrogate::ALL {
        let cfg = SteConfig {
            surrogate,
            beta,
            epochs: 300,
            batch_size: 5,
            ..SteConfig::default()
        };
        let runs = multi_trial(&data, &[10], &cfg, 5)?;
        let finals: Vec<String> = runs.traces.iter().map(|t| format!("{:.4e}", t.final_objective())).collect();
        println!("{:<12} {}", surrogate.name(), finals.join("  "));
    }
    Ok(())
}
