//! Semi-Markov (Markov renewal) processes: simulation, empirical
//! measures and flows, large-deviation rate functions, compactness
//! condition checkers, and exponential-tilting importance sampling.
//!
//! Module map:
//! - [`law`], [`model`]: waiting-law algebra and model definition.
//! - [`simulate`]: trajectories and empirical statistics.
//! - [`rate`]: joint and marginal rate functions, Legendre machinery.
//! - [`conditions`]: drift / scale-family / graph condition checkers.
//! - [`tilt`]: change of measure, martingales, importance sampling.
//! - [`verify`]: independent oracles and the Monte Carlo LDP harness.

pub mod conditions;
pub mod error;
pub mod law;
pub mod model;
pub mod numeric;
pub mod rate;
pub mod simulate;
pub mod tilt;
pub mod verify;

pub use error::{Error, Result};
pub use law::{Envelope, NumericLaw, WaitingLaw};
pub use model::{Edge, EdgeTarget, ModelKind, SemiMarkovModel, ValidationReport};
pub use simulate::{
    corrected_average, empirical_flow, empirical_measure, sample_trajectory,
    sample_trajectory_keyed, EmpiricalMeasure, Flow, Start, Trajectory,
};
