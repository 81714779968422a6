use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("{label}: non-finite output at x = {x:?}")]
    NonFinite { label: String, x: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("gradient singularity: degenerate segment {index} (coincident consecutive nodes)")]
    DegenerateSegment { index: usize },

    #[error("insufficient samples: need {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no near-critical point found within budget (best grad norm {best_grad_norm:.3e}, best distance {best_distance:.3e}); sweepout is not near-optimal")]
    NotNearOptimal {
        best: Vec<f64>,
        best_grad_norm: f64,
        best_distance: f64,
    },

    #[error("refinement failed: {reason} after {iterations} iterations")]
    Convergence {
        reason: String,
        iterations: usize,
        trace: Vec<f64>,
    },

    #[error("degenerate critical point: {0}; use the perturbation module")]
    Degenerate(String),

    #[error("surgery not applicable, index within bound ({0})")]
    SurgeryNotApplicable(String),

    #[error("no missed point found in the negative disc after {0} draws")]
    NoMissedPoint(usize),

    #[error("empty sweepout: {0}")]
    EmptySweepout(String),

    #[error("perturbation norm bound violated: |y| = {norm:.3e} >= {bound:.3e}")]
    NormBound { norm: f64, bound: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key(s) {unknown:?}; valid keys: {valid:?}")]
    UnknownKeys {
        unknown: Vec<String>,
        valid: Vec<String>,
    },

    #[error("unknown problem key '{0}'")]
    UnknownProblem(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn in_frame(self, index: usize) -> Self {
        Error::Frame {
            index,
            source: Box::new(self),
        }
    }
}
