use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("malformed PNG {path}: {reason}")]
    MalformedPng { path: PathBuf, reason: String },

    #[error("unsupported PNG bit depth {depth} in {path} (8-bit grayscale or RGB only)")]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },

    #[error("bad tensor magic in {0}")]
    BadMagic(PathBuf),

    #[error("tensor length mismatch: shape {shape:?} needs {expected} values, found {found}")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("tensor rank {0} outside [1, 4]")]
    BadRank(usize),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("zero target dimension {0}x{1}")]
    ZeroDimension(usize, usize),

    #[error("pixel ({row}, {col}) outside {height}x{width} canvas")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("k = {k} exceeds the {distinct} distinct intensities")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("no lesion evidence: both candidate sets are empty")]
    NoLesionEvidence,

    #[error("CAM candidate set is empty")]
    EmptyCam,

    #[error("empty input")]
    EmptyInput,

    #[error("unmatched file {0}")]
    Unmatched(String),

    #[error("duplicate image id {0}")]
    DuplicateId(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("provider: {0}")]
    Provider(String),

    #[error("incomplete run: {0}")]
    IncompleteRun(String),

    #[error("config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("PNG encode: {0}")]
    PngEncode(#[from] png::EncodingError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
