//! Library-wide error type. Variants carry enough context (states,
//! partial sums, incumbents) for callers to report failures honestly
//! instead of silently degrading.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("quadrature did not converge (partial sum {partial:.6e}, last increment {increment:.6e})")]
    QuadratureNonConvergence { partial: f64, increment: f64 },

    #[error("no certified bracket found: {0}")]
    BracketNotFound(String),

    #[error("state {state} has no outgoing edge")]
    NoOutgoingEdge { state: usize },

    #[error("trajectory left the truncation (radius {radius}) from state {state}")]
    TruncationEscape { state: usize, radius: usize },

    #[error("possible explosion: {jumps} jumps without reaching the horizon")]
    PossibleExplosion { jumps: u64 },

    #[error("sampling unsupported: {0}")]
    SamplingUnsupported(String),

    #[error("Legendre analysis unsupported: the weighted log-MGF stays finite at its abscissa ({detail})")]
    LegendreUnsupported { detail: String },

    #[error("tilt target rejected: {0}")]
    TiltTargetRejected(String),

    #[error("tilt normalizer diverges at state {state}")]
    TiltNormalizerDiverges { state: usize },

    #[error("optimizer did not converge: best incumbent {incumbent:.12e} ({detail})")]
    OptimizerNonConvergence { incumbent: f64, detail: String },

    #[error("function unevaluable at state {state}, duration {duration}: {detail}")]
    Unevaluable {
        state: usize,
        duration: f64,
        detail: String,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
