//! Trains a two-layer threshold network by solving the Lasso over all
//! arrangement patterns, then checks the optimality certificate.

use threshconvex::arrangements::enumerate_exact;
use threshconvex::harness::{gen_synthetic, SyntheticKind};
use threshconvex::model::LossKind;
use threshconvex::solver::{critical_width, kkt_check, lasso_solve, LassoProblem};

fn main() -> threshconvex::Result<()> {
    let data = gen_synthetic(SyntheticKind::TwoLayerGt, 20, 3, 7)?.with_bias();
    let arr = enumerate_exact(&data)?;
    println!("{} samples, {} patterns", data.n(), arr.p());

    for beta in [1e-1, 1e-2, 1e-3] {
        let prob = LassoProblem::new(&arr, data.labels().clone(), beta, LossKind::Squared)?;
        let sol = lasso_solve(&prob, 1e-10, 200_000)?;
        let kkt = kkt_check(&prob, &sol, 1e-6);
        println!(
            "beta {beta:>6}: objective {:.6e}, neurons {}, KKT {} (residual {:.1e})",
            sol.objective,
            critical_width(&sol),
            if kkt.passed { "ok" } else { "failed" },
            kkt.residual()
        );
    }
    Ok(())
}
