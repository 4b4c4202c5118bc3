//! Three-layer threshold network from a Lasso over second-layer patterns.

use threshconvex::arrangements::{deep_construct_sampled, enumerate_exact};
use threshconvex::harness::{gen_synthetic, SyntheticKind};
use threshconvex::model::{forward, LossKind};
use threshconvex::reconstruct::build_deep;
use threshconvex::solver::{lasso_solve, LassoProblem};

fn main() -> threshconvex::Result<()> {
    let data = gen_synthetic(SyntheticKind::ThreeLayerGt, 12, 2, 5)?.with_bias();
    let first = enumerate_exact(&data)?;
    let second = deep_construct_sampled(&first, 3, 400, 1)?;
    println!("layer patterns: {} then {}", first.p(), second.p());

    let prob = LassoProblem::new(&second, data.labels().clone(), 1e-2, LossKind::Squared)?;
    let sol = lasso_solve(&prob, 1e-10, 200_000)?;
    let net = build_deep(&data, &sol, &[first, second])?;
    let fit = forward(&net, &data)?;
    let hits = fit.iter().zip(data.labels().iter()).filter(|(f, y)| (f.signum() >= 0.0) == (**y > 0.0)).count();
    println!(
        "depth {}, {} subnetworks, objective {:.6e}, train accuracy {}/{}",
        net.depth(),
        net.subnetworks().len(),
        sol.objective,
        hits,
        data.n()
    );
    Ok(())
}
