use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("rank mismatch: {0}")]
    Rank(String),
    #[error("inverse Laplacian needs zero-mean input, got mean {mean:e}")]
    NonzeroMean { mean: f64 },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("identity check `{name}` failed: residual {residual:e} > {tol:e}")]
    Identity { name: String, residual: f64, tol: f64 },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
