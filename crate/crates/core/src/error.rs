use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constant image: no threshold separates two classes")]
    ConstantImage,

    #[error("degenerate projection geometry: {0}")]
    Geometry(String),

    #[error("invalid noise model: {0}")]
    NoiseModel(String),

    #[error("refusing to overwrite existing file {0}")]
    PathExists(PathBuf),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("config: {0}")]
    Config(String),

    #[error("weak denoiser: {0}")]
    Denoiser(String),

    #[error("pair {pair_id}: {source}")]
    Pair {
        pair_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} pairs failed: {}", pair_ids.join(", "))]
    BatchFailures {
        failed: usize,
        total: usize,
        pair_ids: Vec<String>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Stable numeric code for the error class.
    ///
    /// Used as the process exit status by the CLI and as the status value
    /// returned through the C ABI. `0` is success, `1` is reserved for
    /// unclassified failures and `2` for command-line usage errors.
    pub fn code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::UnsupportedFormat(_) | Error::Format { .. } => 4,
            Error::DimensionMismatch(_) => 5,
            Error::InvalidArgument(_) => 6,
            Error::ConstantImage => 7,
            Error::Geometry(_) => 8,
            Error::NoiseModel(_) => 9,
            Error::PathExists(_) => 10,
            Error::Manifest(_) => 11,
            Error::Config(_) => 12,
            Error::Denoiser(_) => 13,
            Error::Pair { .. } => 14,
            Error::BatchFailures { .. } => 15,
        }
    }
}
