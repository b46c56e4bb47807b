use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed file {path:?}, line {line}: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty geometry: {0}")]
    EmptyGeometry(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("degenerate contact: {0}")]
    DegenerateContact(String),
    #[error("off frame: {0}")]
    OffFrame(String),
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("zero standard deviation in channel `{0}`")]
    ZeroStd(&'static str),
    #[error("corrupt dataset: {0}")]
    CorruptDataset(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("network spec error: {0}")]
    Spec(String),
    #[error("non-finite loss {loss} in batch {batch}")]
    NonFiniteLoss { batch: usize, loss: f64 },
    #[error("training diverged in epoch {epoch}: mean loss {loss} > 10x initial {initial}")]
    Divergence { epoch: usize, loss: f64, initial: f64 },
    #[error("ROC undefined: split contains a single class")]
    RocUndefined,
    #[error("no feasible grasp among {0} candidates")]
    NoFeasibleGrasp(usize),
    #[error("no object in segmentation mask")]
    NoObject,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
