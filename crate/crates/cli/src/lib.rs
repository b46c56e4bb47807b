//! End-to-end pipeline behind the `grasp` command: dataset generation, training,
//! evaluation, rendering and planning, each writing its artifacts plus a run manifest.

pub mod commands;
pub mod config;
pub mod generate;
pub mod objects;
pub mod report;

use std::fmt;

pub use config::PipelineConfig;

/// Failure categories, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Missing(String),
    Corrupt(String),
    Numerical(String),
    NoGrasp(String),
    Pipeline(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Missing(_) => 3,
            Self::Corrupt(_) => 4,
            Self::Numerical(_) => 5,
            Self::NoGrasp(_) => 6,
            Self::Pipeline(_) => 7,
            Self::Io(_) => 8,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Missing(m) => write!(f, "missing input: {m}"),
            Self::Corrupt(m) => write!(f, "corrupt artifact: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::NoGrasp(m) => write!(f, "no grasp: {m}"),
            Self::Pipeline(m) => write!(f, "pipeline failure: {m}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Corrupt(e.to_string())
    }
}

impl From<grasp_core::Error> for CliError {
    fn from(e: grasp_core::Error) -> Self {
        use grasp_core::Error as E;
        let m = e.to_string();
        match e {
            E::CorruptDataset(_) => Self::Corrupt(format!("{m}; regenerate the dataset with `grasp generate`")),
            E::CorruptCheckpoint(_) => Self::Corrupt(format!("{m}; retrain with `grasp train`")),
            E::MalformedFile { .. } => Self::Corrupt(m),
            E::NonFiniteLoss { .. } | E::Divergence { .. } => {
                Self::Numerical(format!("{m}; try a lower train.learning_rate"))
            }
            E::NoFeasibleGrasp(_) | E::NoObject => Self::NoGrasp(m),
            E::InvalidArgument(_) | E::Spec(_) => Self::Config(m),
            E::Io(err) => Self::Io(err),
            _ => Self::Pipeline(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Worker pool sized by the config, or the default global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}
