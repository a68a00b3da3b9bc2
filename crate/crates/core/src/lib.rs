//! Random Apollonian Network generation and numerical checks of its
//! degree-sequence theory.
//!
//! - [`network`]: the generator, face registry and choice-trace replay.
//! - [`expectations`]: the mean-field recurrences, limit coefficients `b_k`
//!   and the Azuma tail bound.
//! - [`oracle`]: exact means by enumeration and the bounded-difference
//!   coupling.
//! - [`montecarlo`]: replicated simulation and the statistical checks.

pub mod error;
pub mod expectations;
pub mod montecarlo;
pub mod network;
pub mod oracle;
pub mod powerlaw;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use network::{
    generate, generate_with, replay, ChoiceTrace, DegreeHistogram, Face, GenerateOptions, RanState,
    VertexId,
};
pub use rng::Xoshiro256PlusPlus;
