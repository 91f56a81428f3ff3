use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: non-triangular face")]
    NonTriangularFace { line: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold edge ({0}, {1}) shared by more than two faces")]
    NonManifold(usize, usize),

    #[error("count mismatch: expected {expected}, got {got} ({what})")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("overlapping UV charts: faces {0} and {1}")]
    OverlappingCharts(usize, usize),

    #[error("not a UVP file")]
    NotUvp,

    #[error("unsupported version {0}")]
    Version(u32),

    #[error("unexpected EOF")]
    UnexpectedEof,

    #[error("{clamped} of {total} points fall outside the normalization cube")]
    OutOfCube { clamped: usize, total: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("ICP diverged: residual grew for 3 consecutive iterations ({history:?})")]
    Diverged { history: Vec<f64> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
