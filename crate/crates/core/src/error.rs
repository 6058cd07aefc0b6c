use thiserror::Error;

/// Errors produced while fitting, applying or validating a corrector.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("non-finite score")]
    NonFiniteScore,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("quantile level outside (0,1]: {0}")]
    QuantileLevel(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance")]
    ZeroVariance,

    #[error("component count {k} out of range 1..={max}")]
    ComponentCount { k: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class {class}: {partition} set is empty")]
    EmptyPartition {
        class: String,
        partition: &'static str,
    },

    #[error("class {class}: {partition} set has {have} samples, need at least {need}")]
    TooFewSamples {
        class: String,
        partition: &'static str,
        have: usize,
        need: usize,
    },

    #[error("degenerate Fisher system{}", class.as_ref().map(|c| format!(" for class {c}")).unwrap_or_default())]
    DegenerateFisher { class: Option<String> },

    #[error("unlabeled sample in correction set (id {id})")]
    Unlabeled { id: String },

    #[error("unknown label {label}")]
    UnknownLabel { label: String },

    #[error("class {class}: delta {value} outside (0,1)")]
    InvalidDelta { class: String, value: f64 },

    #[error("class {class}: gamma target {target} unattainable with {m_minus} error samples (max {best:.6})")]
    GammaUnattainable {
        class: String,
        target: f64,
        m_minus: usize,
        best: f64,
    },

    #[error("malformed model document: {0}")]
    Model(String),

    #[error("unsupported model schema version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery itself rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
