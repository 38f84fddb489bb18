//! Learning-with-errors toolkit.
//!
//! Noise distributions on `Z_p` and the torus, lattice utilities with exact
//! small-dimension oracles, discrete Gaussian sampling, the LWE reductions,
//! desk-scale attacks, the classical half of the worst-case to average-case
//! reduction, and an LWE-based public-key cryptosystem.

pub mod attacks;
pub mod checks;
pub mod crypto;
pub mod error;
pub mod dgs;
pub mod gaussian;
pub mod io;
pub mod lattice;
pub mod lwe;
pub mod modring;
pub mod rng;
pub mod stats;
pub mod worstcase;

pub use error::{Error, Result};

/// Whether precondition-bearing operations enforce their hypotheses
/// (`Strict`) or run anyway and report what they measured (`Diagnostic`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    #[default]
    Diagnostic,
}
