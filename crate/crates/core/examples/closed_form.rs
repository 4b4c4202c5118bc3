//! When the arrangement is complete the training problem has a closed-form
//! solution; this builds the matching network with at most n + 2 neurons.

use nalgebra::DVector;
use threshconvex::arrangements::{is_complete, ArrangementMatrix};
use threshconvex::model::{forward, Dataset, LossKind};
use threshconvex::reconstruct::build_from_delta;
use threshconvex::solver::{closed_form_solve, lasso_solve, LassoProblem};

fn main() -> threshconvex::Result<()> {
    let n = 6;
    let data = Dataset::new(nalgebra::DMatrix::identity(n, n), DVector::from_fn(n, |i, _| (i as f64 * 1.3).sin()))?;
    let beta = 0.2;

    let sol = closed_form_solve(data.labels(), beta);
    println!("closed form objective {:.10}", sol.objective);

    let full = ArrangementMatrix::complete(n)?;
    println!("complete arrangement: {} patterns, complete = {}", full.p(), is_complete(&full)?);
    let prob = LassoProblem::new(&full, data.labels().clone(), beta, LossKind::Squared)?;
    let lasso = lasso_solve(&prob, 1e-12, 200_000)?;
    println!("lasso objective       {:.10}", lasso.objective);

    let net = build_from_delta(&data, &sol, None)?;
    let out = forward(&net, &data)?;
    println!("{} neurons, max |f(X) - delta| = {:.1e}", net.neuron_count(), (out - sol.delta_vector().unwrap()).amax());
    Ok(())
}
