use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{load_csv, split_standardize};
use super::synth::{gen_synthetic, representation_transform, RepresentationTransform, SyntheticKind};
use crate::arrangements::{enumerate_exact, sample_arrangements};
use crate::error::{Error, Result};
use crate::model::{forward, Dataset, LossKind, Subnetwork, ThresholdNetwork};
use crate::reconstruct::{build_two_layer, RealizationMethod};
use crate::solver::{kkt_check, lasso_solve_with, ConvexSolution, KktReport, LassoProblem, SolveOptions};
use crate::ste::{ste_train, PlateauSchedule, SteConfig, Surrogate, TrainTrace};

/// Environment variable capping the number of concurrently running cells.
pub const WORKERS_ENV: &str = "THRESHCONVEX_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, label_column: String },
    Synthetic { kind: SyntheticKind, n: usize, d: usize },
    OneD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// Lasso over sampled patterns, as many as the hidden width.
    ConvexLasso,
    /// Lasso over the exactly enumerated arrangement.
    ConvexExact,
    /// Sampled Lasso on random threshold features, least-squares neurons.
    ConvexPi,
    /// Sampled Lasso on random threshold features, SVM neurons.
    ConvexSvm,
    Ste(Surrogate),
}

impl Method {
    pub fn is_convex(self) -> bool {
        !matches!(self, Method::Ste(_))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::ConvexLasso => f.write_str("convex-lasso"),
            Method::ConvexExact => f.write_str("convex-exact"),
            Method::ConvexPi => f.write_str("convex-pi"),
            Method::ConvexSvm => f.write_str("convex-svm"),
            Method::Ste(s) => write!(f, "ste:{}", s.name()),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex-lasso" => Ok(Method::ConvexLasso),
            "convex-exact" => Ok(Method::ConvexExact),
            "convex-pi" => Ok(Method::ConvexPi),
            "convex-svm" => Ok(Method::ConvexSvm),
            other => match other.strip_prefix("ste:") {
                Some(variant) => Ok(Method::Ste(variant.parse()?)),
                None => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
            },
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: PlateauSchedule,
}

impl Default for SteSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 32,
            schedule: PlateauSchedule::default(),
        }
    }
}

fn default_split() -> f64 {
    0.8
}

fn default_representation() -> usize {
    100
}

fn default_loss() -> LossKind {
    LossKind::Squared
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DataSource,
    pub methods: Vec<Method>,
    pub beta: f64,
    /// Hidden widths for STE; the last one is also the sampled pattern count.
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    pub output_dir: PathBuf,
    /// Seed of data generation and splitting, shared by all cells.
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub ste: SteSettings,
    /// Size `M` of the random representation used by convex-pi and convex-svm.
    #[serde(default = "default_representation")]
    pub representation_dim: usize,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.methods.is_empty() {
            return fail("experiment needs at least one method");
        }
        if self.seeds.is_empty() {
            return fail("experiment needs at least one seed");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail("split ratio must be in (0, 1)");
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return fail("widths must be nonempty and positive");
        }
        if !(self.beta >= 0.0) {
            return fail("beta must be >= 0");
        }
        if self.representation_dim == 0 {
            return fail("representation_dim must be >= 1");
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Train and test sets of the configured source.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            DataSource::Csv { path, label_column } => load_csv(path, label_column, self.split_ratio, self.data_seed),
            DataSource::Synthetic { kind, n, d } => {
                let all = gen_synthetic(*kind, *n, *d, self.data_seed)?;
                if *kind == SyntheticKind::OneD {
                    return Ok((all.clone(), all));
                }
                split_standardize(all.features(), all.labels(), self.split_ratio, self.data_seed)
            }
            DataSource::OneD => {
                let all = gen_synthetic(SyntheticKind::OneD, 0, 0, self.data_seed)?;
                Ok((all.clone(), all))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub seed: u64,
    pub train_objective: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
    pub converged: bool,
    /// KKT certificate outcome for convex methods.
    pub kkt_passed: Option<bool>,
    pub error: Option<String>,
}

/// Fraction of samples with `sign(f) == y`, counting `f = 0` as positive.
pub fn accuracy(net: &ThresholdNetwork, data: &Dataset) -> Result<f64> {
    let f = forward(net, data)?;
    let hits = f
        .iter()
        .zip(data.labels().iter())
        .filter(|(&p, &y)| (if p >= 0.0 { 1.0 } else { -1.0 }) == y)
        .count();
    Ok(hits as f64 / data.n() as f64)
}

#[derive(Debug, Serialize)]
struct CellArtifact<'a> {
    spec: &'a ExperimentSpec,
    method: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<ConvexSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kkt: Option<KktReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<ThresholdNetwork>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<TrainTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct CellOutcome {
    row: MetricsRow,
    solution: Option<ConvexSolution>,
    kkt: Option<KktReport>,
    network: Option<ThresholdNetwork>,
    trace: Option<TrainTrace>,
}

fn with_trunk(transform: &RepresentationTransform, head: ThresholdNetwork, d: usize) -> Result<ThresholdNetwork> {
    let neurons = head.neurons().cloned().collect::<Vec<_>>();
    if neurons.is_empty() {
        return Ok(ThresholdNetwork::empty(d));
    }
    ThresholdNetwork::new(
        d,
        vec![Subnetwork {
            layers: vec![transform.layer.clone()],
            neurons,
        }],
    )
}

fn run_convex(spec: &ExperimentSpec, method: Method, seed: u64, train: &Dataset, test: &Dataset) -> Result<CellOutcome> {
    let width = *spec.widths.last().expect("validated");
    let (design_data, transform) = match method {
        Method::ConvexPi | Method::ConvexSvm => {
            let (t, tr) = representation_transform(train, spec.representation_dim, seed)?;
            (t, Some(tr))
        }
        _ => (train.clone(), None),
    };
    let arr = match method {
        Method::ConvexExact => enumerate_exact(&design_data)?,
        _ => sample_arrangements(&design_data, width, seed)?,
    };
    let prob = LassoProblem::new(&arr, train.labels().clone(), spec.beta, spec.loss)?;
    let sol = lasso_solve_with(
        &prob,
        &SolveOptions {
            tol: 1e-10,
            max_iter: 200_000,
            hinge_subgradient: true,
            ..SolveOptions::default()
        },
    )?;
    let kkt = kkt_check(&prob, &sol, 1e-6);
    let realization = match method {
        Method::ConvexPi => RealizationMethod::Pinv,
        Method::ConvexSvm => RealizationMethod::Svm,
        _ => RealizationMethod::Witness,
    };
    let head = build_two_layer(&design_data, &sol, &arr, realization)?;
    let net = match &transform {
        Some(t) => with_trunk(t, head, train.d())?,
        None => head,
    };
    Ok(CellOutcome {
        row: MetricsRow {
            method: method.to_string(),
            seed,
            train_objective: sol.objective,
            train_accuracy: accuracy(&net, train)?,
            test_accuracy: accuracy(&net, test)?,
            wall_seconds: 0.0,
            // a failed certificate counts as non-convergence
            converged: sol.converged && kkt.passed,
            kkt_passed: Some(kkt.passed),
            error: None,
        },
        solution: Some(sol),
        kkt: Some(kkt),
        network: Some(net),
        trace: None,
    })
}

fn run_ste(spec: &ExperimentSpec, surrogate: Surrogate, seed: u64, train: &Dataset, test: &Dataset) -> Result<CellOutcome> {
    let cfg = SteConfig {
        surrogate,
        learning_rate: spec.ste.learning_rate,
        epochs: spec.ste.epochs,
        batch_size: spec.ste.batch_size,
        beta: spec.beta,
        seed,
        schedule: spec.ste.schedule,
        loss: spec.loss,
    };
    let trace = ste_train(train, &spec.widths, &cfg)?;
    Ok(CellOutcome {
        row: MetricsRow {
            method: Method::Ste(surrogate).to_string(),
            seed,
            train_objective: trace.final_objective(),
            train_accuracy: accuracy(&trace.network, train)?,
            test_accuracy: accuracy(&trace.network, test)?,
            wall_seconds: 0.0,
            converged: !trace.diverged,
            kkt_passed: None,
            error: None,
        },
        solution: None,
        kkt: None,
        network: Some(trace.network.clone()),
        trace: Some(trace),
    })
}

fn run_cell(spec: &ExperimentSpec, method: Method, seed: u64, train: &Dataset, test: &Dataset) -> CellOutcome {
    let start = Instant::now();
    let result = match method {
        Method::Ste(s) => run_ste(spec, s, seed, train, test),
        _ => run_convex(spec, method, seed, train, test),
    };
    let mut outcome = result.unwrap_or_else(|e| CellOutcome {
        row: MetricsRow {
            method: method.to_string(),
            seed,
            train_objective: f64::NAN,
            train_accuracy: f64::NAN,
            test_accuracy: f64::NAN,
            wall_seconds: 0.0,
            converged: false,
            kkt_passed: None,
            error: Some(e.to_string()),
        },
        solution: None,
        kkt: None,
        network: None,
        trace: None,
    });
    outcome.row.wall_seconds = start.elapsed().as_secs_f64();
    outcome
}

fn cell_file(method: Method, seed: u64) -> String {
    format!("{}_seed{seed}.json", method.to_string().replace(':', "_"))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Runs every method × seed cell and writes `spec.json`, `metrics.csv`,
/// `timings.csv`, `curves.csv` and one JSON artifact per cell under
/// `spec.output_dir`. Cell failures are recorded in their rows.
///
/// `metrics.csv` holds no timing data, so reruns produce identical bytes.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let (train, test) = spec.load_data()?;
    let out = &spec.output_dir;
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
    write_json(&out.join("spec.json"), spec)?;

    let cells: Vec<(Method, u64)> = spec
        .methods
        .iter()
        .flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let run_all = || -> Result<Vec<(MetricsRow, Option<Vec<f64>>)>> {
        cells
            .par_iter()
            .map(|&(method, seed)| {
                let outcome = run_cell(spec, method, seed, &train, &test);
                let artifact = CellArtifact {
                    spec,
                    method: method.to_string(),
                    seed,
                    solution: outcome.solution,
                    kkt: outcome.kkt,
                    network: outcome.network,
                    trace: outcome.trace,
                    error: outcome.row.error.clone(),
                };
                write_json(&cells_dir.join(cell_file(method, seed)), &artifact)?;
                Ok((outcome.row, artifact.trace.map(|t| t.objectives)))
            })
            .collect()
    };
    let results = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    let (rows, curves): (Vec<MetricsRow>, Vec<Option<Vec<f64>>>) = results.into_iter().unzip();

    let mut metrics = csv_writer(&out.join("metrics.csv"))?;
    metrics.write_record([
        "method",
        "seed",
        "train_objective",
        "train_accuracy",
        "test_accuracy",
        "converged",
        "kkt_passed",
        "error",
    ])?;
    let mut timings = csv_writer(&out.join("timings.csv"))?;
    timings.write_record(["method", "seed", "wall_seconds"])?;
    for row in &rows {
        metrics.write_record([
            row.method.clone(),
            row.seed.to_string(),
            row.train_objective.to_string(),
            row.train_accuracy.to_string(),
            row.test_accuracy.to_string(),
            row.converged.to_string(),
            row.kkt_passed.map(|k| k.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
        ])?;
        timings.write_record([row.method.clone(), row.seed.to_string(), row.wall_seconds.to_string()])?;
    }
    metrics.flush().map_err(|e| Error::io(out.join("metrics.csv"), e))?;
    timings.flush().map_err(|e| Error::io(out.join("timings.csv"), e))?;

    // STE curves with each convex optimum drawn as a constant line over the
    // same epochs
    let epochs = curves.iter().flatten().map(Vec::len).max().unwrap_or(1).max(1);
    let mut writer = csv_writer(&out.join("curves.csv"))?;
    writer.write_record(["method", "seed", "epoch", "objective"])?;
    for (row, curve) in rows.iter().zip(&curves) {
        let values: Vec<f64> = match curve {
            Some(c) => c.clone(),
            None => vec![row.train_objective; epochs],
        };
        for (e, v) in values.iter().enumerate() {
            writer.write_record([row.method.clone(), row.seed.to_string(), (e + 1).to_string(), v.to_string()])?;
        }
    }
    writer.flush().map_err(|e| Error::io(out.join("curves.csv"), e))?;
    Ok(rows)
}
