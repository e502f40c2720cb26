use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("numeric degeneracy: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    #[error("missing manifest in {0}")]
    MissingManifest(PathBuf),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("empty batch: {0}")]
    EmptyBatch(String),

    #[error("missing artifact {0} (run the producing stage first)")]
    MissingArtifact(PathBuf),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::MissingManifest(_) => "missing_manifest",
            Error::Integrity(_) => "integrity",
            Error::Data(_) => "data",
            Error::EmptyBatch(_) => "empty_batch",
            Error::MissingArtifact(_) => "missing_artifact",
        }
    }
}
