use nalgebra::DVector;
use serde::Serialize;

use crate::arrangements::enumerate_matrix;
use crate::error::{Error, Result};
use crate::model::{canonicalize, objective, Dataset, LossKind, RegularizedObjective, RegularizerForm, ThresholdNetwork};
use crate::reconstruct::lasso_coefficients;
use crate::solver::{kkt_check, ConvexSolution, KktReport, LassoProblem};

/// Objective values of a network on a dataset and, for two-layer networks
/// on enumerable data, a KKT certificate over the full arrangement.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub depth: usize,
    pub neurons: usize,
    pub canonical: bool,
    pub loss: LossKind,
    pub beta: f64,
    /// Objective of the canonicalized network with the `ℓ1` output penalty.
    pub l1_objective: f64,
    pub weight_decay_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerifyReport {
    /// `false` only when a certificate was computed and failed.
    pub fn certified(&self) -> bool {
        self.kkt.as_ref().is_none_or(|k| k.passed)
    }
}

pub fn verify_network(
    net: &ThresholdNetwork,
    data: &Dataset,
    beta: f64,
    loss: LossKind,
    kkt_tol: f64,
    budget: u128,
) -> Result<VerifyReport> {
    let (canon, _) = canonicalize(net);
    let l1 = objective(&canon, data, &RegularizedObjective::new(beta, loss, RegularizerForm::L1Canonical)?)?;
    let wd = objective(net, data, &RegularizedObjective::new(beta, loss, RegularizerForm::WeightDecay)?)?;
    let mut report = VerifyReport {
        depth: net.depth(),
        neurons: net.neuron_count(),
        canonical: net.is_canonical(),
        loss,
        beta,
        l1_objective: l1,
        weight_decay_objective: wd,
        lasso_objective: None,
        kkt: None,
        note: None,
    };
    if net.depth() != 2 {
        report.note = Some("KKT certificate needs a two-layer network".into());
        return Ok(report);
    }
    let arr = match enumerate_matrix(data.features(), budget) {
        Ok(arr) => arr,
        Err(e @ Error::BudgetExceeded { .. }) => {
            report.note = Some(format!("no KKT certificate: {e}"));
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let w: DVector<f64> = lasso_coefficients(&canon, data, &arr)?;
    let prob = LassoProblem::new(&arr, data.labels().clone(), beta, loss)?;
    let sol = ConvexSolution::from_coefficients(&prob, w, 0, true);
    report.kkt = Some(kkt_check(&prob, &sol, kkt_tol));
    report.lasso_objective = Some(sol.objective);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrangements::{enumerate_exact, DEFAULT_BUDGET};
    use crate::reconstruct::{build_two_layer, RealizationMethod};
    use crate::solver::lasso_solve;

    #[test]
    fn optimal_network_is_certified() {
        let data = Dataset::from_rows(&[vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[1.0, -1.0, 1.0]).unwrap();
        let arr = enumerate_exact(&data).unwrap();
        let prob = LassoProblem::new(&arr, data.labels().clone(), 0.1, LossKind::Squared).unwrap();
        let sol = lasso_solve(&prob, 1e-12, 100_000).unwrap();
        let net = build_two_layer(&data, &sol, &arr, RealizationMethod::Witness).unwrap();
        let report = verify_network(&net, &data, 0.1, LossKind::Squared, 1e-6, DEFAULT_BUDGET).unwrap();
        assert!(report.certified());
        assert!((report.l1_objective - sol.objective).abs() < 1e-9);
        assert!((report.lasso_objective.unwrap() - sol.objective).abs() < 1e-9);

        let empty = ThresholdNetwork::empty(2);
        let report = verify_network(&empty, &data, 0.1, LossKind::Squared, 1e-6, DEFAULT_BUDGET).unwrap();
        assert!(!report.certified());
    }
}
