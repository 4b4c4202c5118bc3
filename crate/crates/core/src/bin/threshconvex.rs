use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use threshconvex::arrangements::{
    enumerate_matrix, read_text, read_witness_csv, sample_arrangements, write_text, write_witness_csv, ArrangementMatrix,
    DEFAULT_BUDGET,
};
use threshconvex::harness::{read_csv_dataset, run_experiment, verify_network, ExperimentSpec, WORKERS_ENV};
use threshconvex::model::{Dataset, LossKind, ThresholdNetwork};
use threshconvex::reconstruct::{build_from_delta, build_two_layer, RealizationMethod};
use threshconvex::solver::{kkt_check, lasso_solve_with, ConvexSolution, LassoProblem, SolveOptions};
use threshconvex::ste::{multi_trial, SteConfig, Surrogate};
use threshconvex::{Error, Result};

#[derive(Parser)]
#[command(name = "threshconvex", version, about = "Convex training of threshold-activation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Headed numeric CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    label: String,
    /// Append a constant column.
    #[arg(long)]
    bias: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        read_csv_dataset(&self.data, &self.label, self.bias)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvexMethod {
    Exact,
    Sampled,
    /// Closed-form problem for complete arrangements.
    ClosedForm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Realization {
    Witness,
    Pinv,
    Svm,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the arrangement patterns of the data.
    Enumerate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        /// Pattern file; a `.witness.csv` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the convex program and write the solution JSON.
    TrainConvex {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: ConvexMethod,
        /// Pattern count for `sampled`.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value = "squared")]
        loss: LossKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long)]
        out: PathBuf,
        /// Also write the arrangement used (and its witness sidecar).
        #[arg(long)]
        arrangement: Option<PathBuf>,
    },
    /// Train straight-through-estimator baselines.
    TrainSte {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "identity")]
        surrogate: Surrogate,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        beta: f64,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "50")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "squared")]
        loss: LossKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a network from a convex solution.
    Reconstruct {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        solution: PathBuf,
        /// Pattern file the solution was computed on (not needed for
        /// closed-form solutions).
        #[arg(long)]
        arrangement: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "witness")]
        method: Realization,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec.
    Experiment {
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Objective and KKT report for a network.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value = "squared")]
        loss: LossKind,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn witness_path(patterns: &Path) -> PathBuf {
    let mut name = patterns.file_stem().unwrap_or_default().to_os_string();
    name.push(".witness.csv");
    patterns.with_file_name(name)
}

fn save_arrangement(arr: &ArrangementMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_text(arr, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    let side = witness_path(path);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    write_witness_csv(arr, BufWriter::new(file))
}

fn load_arrangement(path: &Path) -> Result<ArrangementMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let arr = read_text(BufReader::new(file))?;
    let side = witness_path(path);
    match File::open(&side) {
        Ok(f) => read_witness_csv(arr, BufReader::new(f)),
        Err(_) => Ok(arr),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enumerate { data, budget, out } => {
            let data = data.load()?;
            let arr = enumerate_matrix(data.features(), budget)?;
            save_arrangement(&arr, &out)?;
            println!("{} patterns over {} samples -> {}", arr.p(), arr.n(), out.display());
        }
        Command::TrainConvex {
            data,
            beta,
            method,
            samples,
            loss,
            seed,
            tol,
            max_iter,
            budget,
            out,
            arrangement,
        } => {
            let data = data.load()?;
            let sol = match method {
                ConvexMethod::ClosedForm => {
                    if loss != LossKind::Squared {
                        return Err(Error::UnsupportedLoss(loss.name()));
                    }
                    threshconvex::solver::closed_form_solve(data.labels(), beta)
                }
                ConvexMethod::Exact | ConvexMethod::Sampled => {
                    let arr = match method {
                        ConvexMethod::Exact => enumerate_matrix(data.features(), budget)?,
                        _ => sample_arrangements(&data, samples, seed)?,
                    };
                    let prob = LassoProblem::new(&arr, data.labels().clone(), beta, loss)?;
                    let sol = lasso_solve_with(
                        &prob,
                        &SolveOptions {
                            tol,
                            max_iter,
                            ..SolveOptions::default()
                        },
                    )?;
                    let kkt = kkt_check(&prob, &sol, 1e-6);
                    println!(
                        "objective {:.12e}, {} of {} patterns in support, KKT {} (residual {:.3e})",
                        sol.objective,
                        sol.support.len(),
                        arr.p(),
                        if kkt.passed { "passed" } else { "FAILED" },
                        kkt.residual()
                    );
                    if let Some(path) = &arrangement {
                        save_arrangement(&arr, path)?;
                    }
                    sol
                }
            };
            write_json(&out, &sol)?;
            if !sol.converged {
                return Err(Error::NotConverged);
            }
        }
        Command::TrainSte {
            data,
            surrogate,
            lr,
            epochs,
            batch_size,
            beta,
            widths,
            trials,
            seed,
            loss,
            out,
        } => {
            let data = data.load()?;
            let cfg = SteConfig {
                surrogate,
                learning_rate: lr,
                epochs,
                batch_size,
                beta,
                seed,
                loss,
                ..SteConfig::default()
            };
            let result = multi_trial(&data, &widths, &cfg, trials)?;
            for (i, t) in result.traces.iter().enumerate() {
                println!("trial {i} (seed {}): final objective {:.12e}", t.seed, t.final_objective());
            }
            write_json(&out, &result.traces)?;
        }
        Command::Reconstruct {
            data,
            solution,
            arrangement,
            method,
            out,
        } => {
            let data = data.load()?;
            let sol: ConvexSolution = read_json(&solution)?;
            let net = if sol.delta.is_some() {
                build_from_delta(&data, &sol, None)?
            } else {
                let path = arrangement
                    .ok_or_else(|| Error::InvalidArgument("Lasso solutions need --arrangement".into()))?;
                let arr = load_arrangement(&path)?;
                let method = match method {
                    Realization::Witness => RealizationMethod::Witness,
                    Realization::Pinv => RealizationMethod::Pinv,
                    Realization::Svm => RealizationMethod::Svm,
                };
                build_two_layer(&data, &sol, &arr, method)?
            };
            write_json(&out, &net)?;
            println!("{} neurons -> {}", net.neuron_count(), out.display());
        }
        Command::Experiment { spec, out, workers } => {
            let mut spec = ExperimentSpec::from_json_file(&spec)?;
            if let Some(dir) = out {
                spec.output_dir = dir;
            }
            if let Some(n) = workers {
                std::env::set_var(WORKERS_ENV, n.to_string());
            }
            let rows = run_experiment(&spec)?;
            for r in &rows {
                match &r.error {
                    Some(e) => println!("{:<18} seed {:<4} error: {e}", r.method, r.seed),
                    None => println!(
                        "{:<18} seed {:<4} objective {:.6e}  train acc {:.3}  test acc {:.3}  {:.2}s",
                        r.method, r.seed, r.train_objective, r.train_accuracy, r.test_accuracy, r.wall_seconds
                    ),
                }
            }
            fs::metadata(spec.output_dir.join("metrics.csv")).map_err(|e| Error::io(&spec.output_dir, e))?;
        }
        Command::Verify {
            data,
            network,
            beta,
            loss,
            tol,
            budget,
        } => {
            let data = data.load()?;
            let net: ThresholdNetwork = read_json(&network)?;
            let report = verify_network(&net, &data, beta, loss, tol, budget)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(kkt) = report.kkt.as_ref().filter(|k| !k.passed) {
                return Err(Error::CertificateFailed { residual: kkt.residual() });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // usage errors are validation failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
