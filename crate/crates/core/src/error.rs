use thiserror::Error;

/// Errors surfaced by simulation, model, and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice capacity exceeded: {requested} particles requested for {sites} sites")]
    Capacity { requested: usize, sites: usize },

    #[error("layer index {layer} out of range for {layers}-layer model")]
    LayerOutOfRange { layer: usize, layers: usize },

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid reaction set: {0}")]
    InvalidReactions(String),

    #[error("invalid configuration key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("empty batch passed to moment estimation")]
    EmptyBatch,

    #[error("state space too large to enumerate ({units} units, {options} options per unit)")]
    EnumerationTooLarge { units: usize, options: usize },

    #[error("non-finite value during forward integration at timepoint {timepoint}")]
    DivergedForward { timepoint: usize },

    #[error("non-finite value during adjoint integration at timepoint {timepoint}")]
    DivergedAdjoint { timepoint: usize },

    #[error("coordinate {0} outside [0, 1]")]
    LocalCoordOutOfRange(f64),

    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("cutoff {0} outside (0, 0.5]")]
    InvalidCutoff(f64),

    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),

    #[error("timepoint {timepoint} outside trajectory range [0, {last}]")]
    TimepointOutOfRange { timepoint: usize, last: usize },

    #[error("corrupt file `{path}`: {reason}")]
    CorruptFile { path: String, reason: String },

    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::CorruptFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
