use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cycle detected in parent map at node {0}")]
    Cycle(u32),
    #[error("hierarchy must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("hierarchy must have depth exactly 2, node {node} sits at depth {depth}")]
    Depth { node: u32, depth: usize },
    #[error("mid-level node {0} has no children")]
    MidWithoutChildren(u32),
    #[error("node {0} is referenced as a parent but not declared")]
    UnknownNode(u32),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid panel: {0}")]
    Panel(String),
    #[error("node {0} has zero variance over the training period")]
    ZeroVariance(u32),
    #[error("timepoint {t} has fewer than {lag} preceding observations")]
    InsufficientLags { t: usize, lag: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("objective became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("covariance matrix is singular even with ridge inflation {gamma:e}; increase the ridge or supply more residuals")]
    SingularCovariance { gamma: f64 },
    #[error("need at least {needed} residual vectors, got {got}")]
    TooFewResiduals { needed: usize, got: usize },
    #[error("hierarchy does not match preset: {0}")]
    PresetMismatch(String),
    #[error("root total over the training period is zero")]
    ZeroRootTotal,
    #[error("need at least {needed} trial reports, got {got}")]
    TooFewTrials { needed: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
