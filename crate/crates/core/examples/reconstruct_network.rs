//! Turns a Lasso solution into explicit threshold neurons with each of the
//! three realization routes and evaluates the resulting networks.

use threshconvex::arrangements::sample_arrangements;
use threshconvex::harness::{gen_synthetic, SyntheticKind};
use threshconvex::model::{canonicalize, forward, objective, LossKind, RegularizedObjective};
use threshconvex::reconstruct::{build_two_layer, RealizationMethod};
use threshconvex::solver::{lasso_solve, LassoProblem};

fn main() -> threshconvex::Result<()> {
    let data = gen_synthetic(SyntheticKind::TwoLayerGt, 30, 4, 3)?.with_bias();
    let arr = sample_arrangements(&data, 200, 11)?;
    let beta = 1e-2;
    let prob = LassoProblem::new(&arr, data.labels().clone(), beta, LossKind::Squared)?;
    let sol = lasso_solve(&prob, 1e-10, 200_000)?;
    println!("convex objective {:.10} with {} active patterns", sol.objective, sol.support.len());

    let obj = RegularizedObjective::squared_l1(beta)?;
    for method in [RealizationMethod::Witness, RealizationMethod::Pinv, RealizationMethod::Svm] {
        // least squares with a 0.5 shift only reproduces every pattern on
        // rich enough features, so this route may refuse
        let net = match build_two_layer(&data, &sol, &arr, method) {
            Ok(net) => net,
            Err(e) => {
                println!("{method:?}: {e}");
                continue;
            }
        };
        let (canon, report) = canonicalize(&net);
        let fit = forward(&canon, &data)?;
        println!(
            "{method:?}: {} neurons, objective {:.10}, pruned {}, first outputs {:.3?}",
            canon.neuron_count(),
            objective(&canon, &data, &obj)?,
            report.pruned.len(),
            &fit.as_slice()[..3]
        );
    }
    Ok(())
}
