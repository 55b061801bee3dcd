//! Numerical tools for one-helper source coding.
//!
//! A helper observes `X` and sends a rate-limited message; a second encoder
//! describes `Y`; the decoder must recover `Y` exactly. The crate computes the
//! achievable rate region through its supporting hyperplanes, the
//! strong-converse exponent `F(R1, R2)` that bounds the probability of correct
//! decoding outside that region, the scalar constants that make the bound
//! quantitative, and brute-force optimal codes that check it at tiny
//! blocklengths. [`wyner`] extends all of this to two decoders sharing the
//! helper.
//!
//! All quantities are in nats.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod exponent;
pub mod fmt;
pub mod oracle;
pub mod prob;
pub mod region;
mod search;
mod simplex;
mod tilt;
pub mod wyner;

pub use error::{Error, Result};
pub use exponent::{ExponentOptions, ExponentResult, ExponentSolver, TiltParams};
pub use prob::{JointSource, Pmf};
pub use region::{AuxChannel, RatePoint};
pub use simplex::OptimizerOptions;
