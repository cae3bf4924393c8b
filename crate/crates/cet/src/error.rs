use thiserror::Error;

/// Errors shared across the testbed modules.
#[derive(Debug, Error)]
pub enum CetError {
    #[error("level-output code [{0} {1} {2}] is unreachable")]
    UnreachableCode(u8, u8, u8),
    #[error("empty schedule")]
    EmptySchedule,
    #[error("empty signal catalog")]
    EmptyCatalog,
    #[error("null rate {requested} exceeds available shutdown fraction {available}")]
    InsufficientShutdown { requested: f64, available: f64 },
    #[error("frame too short: have {have} timesteps, need {need}")]
    FrameTooShort { have: usize, need: usize },
    #[error("signal {signal} is entirely null")]
    AllNull { signal: usize },
    #[error("source length {len} shorter than window length {window}")]
    TooShort { len: usize, window: usize },
    #[error("balance ratio {requested} unattainable, achievable ratio is {achievable}")]
    InsufficientData { requested: f64, achievable: f64 },
    #[error("invalid split fractions: {0}")]
    BadSplit(String),
    #[error("class {0} missing from labels")]
    SingleClass(usize),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature count mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fdi level must be 1..=3, got {0}")]
    BadFdiLevel(u8),
    #[error("overlapping trip windows at t={0}")]
    OverlappingTrips(usize),
    #[error("missing trip template for trip {trip}, signal {signal}")]
    MissingTemplate { trip: usize, signal: usize },
    #[error("interval [{start}, {end}) invalid or outside frame of length {len}")]
    BadInterval { start: usize, end: usize, len: usize },
    #[error("dataset missing from bundle: {0}")]
    MissingDataset(String),
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("ROC undefined: only one class present")]
    RocSingleClass,
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CetError>;
