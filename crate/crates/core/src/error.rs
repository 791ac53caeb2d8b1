use thiserror::Error;

use crate::model::Mode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "angle-cosine Gramian is not positive definite (leading minor {minor} is non-positive)"
    )]
    GramianNotPositiveDefinite { minor: usize },

    #[error("minimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("stationary point is a saddle: reduced Hessian eigenvalue {eigenvalue:e}")]
    SaddlePoint { eigenvalue: f64 },

    #[error("FG pattern residual {residual:e} exceeds tolerance; S_N invariance is broken")]
    SymmetryBroken { residual: f64 },

    #[error("reduced and dense eigenvalues disagree by {deviation:e} (relative)")]
    OracleMismatch { deviation: f64 },

    #[error("imaginary frequency in mode {mode}: lambda = {lambda:e}")]
    ImaginaryFrequency { mode: Mode, lambda: f64 },

    #[error("no admissible normal-mode occupancy for n_up = {n_up}, n_down = {n_down}: every candidate configuration has odd angular sum")]
    PauliInfeasible { n_up: usize, n_down: usize },

    #[error("bisection bracket [{lo}, {hi}] does not contain a sign change")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no overlapping particle numbers between table and references")]
    EmptyOverlap,

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Stage tag, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
