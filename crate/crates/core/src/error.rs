use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch in subnetwork {subnetwork}, layer {layer}: expected {expected} inputs, found {found}")]
    DimensionMismatch {
        subnetwork: usize,
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("network is not in canonical form: neuron {neuron} of subnetwork {subnetwork} has amplitude {amplitude}")]
    NotCanonical {
        subnetwork: usize,
        neuron: usize,
        amplitude: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {subsets} candidate subsets > budget {budget}; {advice}")]
    BudgetExceeded {
        subsets: u128,
        budget: u128,
        advice: &'static str,
    },

    #[error("completeness check needs n <= 30, got n = {0}")]
    TooManySamples(usize),

    #[error("unsupported loss `{0}` for this solver (enable the hinge subgradient solver)")]
    UnsupportedLoss(&'static str),

    #[error("KKT certificate failed with residual {residual:.3e}")]
    CertificateFailed { residual: f64 },

    #[error("solution did not converge")]
    NotConverged,

    #[error("targets are not in the range of the design (least-squares residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("pattern not realized by {method} route; mismatched samples {mismatched:?}")]
    RealizationFailed {
        method: &'static str,
        mismatched: Vec<usize>,
    },

    #[error("unrealizable Caratheodory atoms: {0:?}")]
    UnrealizableAtoms(Vec<usize>),

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("parse error in {path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line tool: 1 for validation
    /// problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged
            | Error::CertificateFailed { .. }
            | Error::Infeasible { .. }
            | Error::RealizationFailed { .. }
            | Error::UnrealizableAtoms(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
