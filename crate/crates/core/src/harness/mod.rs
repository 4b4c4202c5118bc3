//! Data loading, synthetic generators and the experiment runner.

pub mod data;
pub mod experiment;
pub mod synth;
pub mod verify;

pub use data::{binary_labels, load_csv, read_csv_dataset, read_table, Table};
pub use experiment::{accuracy, run_experiment, DataSource, ExperimentSpec, Method, MetricsRow, SteSettings, WORKERS_ENV};
pub use synth::{gen_synthetic, gen_synthetic_split, representation_transform, RepresentationTransform, SyntheticKind, TEACHER_WIDTH};
pub use verify::{verify_network, VerifyReport};
