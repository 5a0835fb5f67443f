use thiserror::Error;

/// Errors raised across the optimizer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate value range: global min == max ({0})")]
    DegenerateRange(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("kernel matrix not positive definite (nugget escalated to {nugget:e})")]
    NotPositiveDefinite { nugget: f64 },

    #[error("GP fit failed: every restart diverged")]
    FitFailed,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("search exhausted: no feasible unevaluated candidates remain")]
    SearchExhausted,

    #[error("latent space has no feasible cells")]
    InfeasibleSpace,

    #[error("feasible space has {available} cells, {requested} requested")]
    InsufficientSpace { available: usize, requested: usize },

    #[error("manifold has {0} cells; at least two are required")]
    InsufficientCells(usize),

    #[error("objective evaluation failed: {0}")]
    EvaluationFailed(String),

    #[error("aborting run after {attempts} failed evaluations at iteration {iteration}: {last}")]
    RunAborted {
        iteration: usize,
        attempts: usize,
        last: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
