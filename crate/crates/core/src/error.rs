use thiserror::Error;

use crate::model::HypothesisReport;
use crate::solver::CraneState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("grid needs at least 3 intervals, got {intervals}")]
    GridTooCoarse { intervals: usize },
    #[error("tension profile must have at least two samples")]
    TensionTooShort,
    #[error("tension profile contains a non-finite sample at index {index}")]
    NonFiniteTension { index: usize },
    #[error("table must have at least two points with strictly increasing abscissae")]
    BadTable,
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
}

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parameters violate the requested regime: {0}")]
    Hypotheses(HypothesisReport),
    #[error("state diverged at t = {t:.6}")]
    Diverged {
        t: f64,
        /// Last state whose entries were all finite and below the blow-up threshold.
        last_finite: Box<CraneState>,
    },
    #[error("invalid simulation configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("cross-term weight {varpi} makes the quadratic form indefinite (value {value:.3e})")]
    VarpiTooLarge { varpi: f64, value: f64 },
    #[error("rate fit needs at least {needed} samples in the window, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("rate fit needs positive values, found {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("search region is not a finite rectangle")]
    BadRegion,
    #[error("could not find a root-free boundary for the search region")]
    SingularBoundary,
}
