//! Data ingestion, synthetic data, evaluation, and the command-line driver.

pub mod cli;
pub mod csvio;
pub mod eval;
pub mod models;
pub mod synth;

pub use csvio::{parse_ratings_csv, read_ratings_csv, write_ratings_csv};
pub use eval::{error_metrics, evaluate, split, EvalReport};
pub use models::ModelFile;
pub use synth::{generate, SyntheticSpec, Truth};
