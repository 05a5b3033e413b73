//! Finite-state dimension of digit sequences: Copeland-Erdős sequences,
//! block entropies, (ε,k)-normality and diluted constructions.

pub mod constructions;
pub mod digits;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod normality;
pub mod polynomials;
pub mod scalar;
pub mod sequences;

pub use digits::{sigma_b, Alphabet, Digit, DigitString, Natural};
pub use entropy::{BlockCensus, CheckpointSchedule, DimensionEstimate, EntropyProfile};
pub use error::{Error, Result};
pub use polynomials::{Poly, Rational, RealCoefficient};
pub use scalar::Scalar;
pub use sequences::{ce_sequence, SequenceSource, SetStream};

/// Entropy profile with `f64` entries.
pub type Profile = EntropyProfile<f64>;
/// Dimension estimate with `f64` entries.
pub type Estimate = DimensionEstimate<f64>;
