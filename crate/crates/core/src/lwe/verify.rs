//! Testing a candidate secret against continuous samples.
//!
//! With `y = b - <a, s'>/p mod 1`, the mean of `cos(2 pi y)` concentrates at
//! `exp(-pi alpha^2)` when `s' = s` and at 0 otherwise, since a wrong
//! candidate makes `y` periodic with period `1/k` for some `k >= 2`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::modring::{ModVector, Torus};

use super::{ContinuousSample, SampleStream};

pub const VERIFY_THRESHOLD: f64 = 0.02;

/// The statistic has standard deviation about `1/sqrt(2N)` under a wrong
/// candidate; at this N a false accept needs a 3.6 sigma excursion.
pub const DEFAULT_VERIFY_SAMPLES: usize = 16_384;

pub fn mean_cosine(candidate: &ModVector, samples: &[ContinuousSample]) -> f64 {
    let p = candidate.modulus() as f64;
    let total: f64 = samples
        .iter()
        .map(|x| {
            let y = x.b - Torus::new(x.a.dot(candidate) as f64 / p);
            (2.0 * PI * y.value()).cos()
        })
        .sum();
    total / samples.len().max(1) as f64
}

/// Accepts iff the mean cosine over `count` fresh samples exceeds 0.02.
pub fn verify_secret(
    candidate: &ModVector,
    stream: &mut dyn SampleStream<Torus>,
    count: usize,
) -> Result<bool> {
    Ok(Verifier { samples: count }.statistic(candidate, stream)? > VERIFY_THRESHOLD)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verifier {
    pub samples: usize,
}

impl Default for Verifier {
    fn default() -> Self {
        Self {
            samples: DEFAULT_VERIFY_SAMPLES,
        }
    }
}

impl Verifier {
    /// Sample count `max(n, default)`.
    pub fn for_dimension(n: usize) -> Self {
        Self {
            samples: n.max(DEFAULT_VERIFY_SAMPLES),
        }
    }

    pub fn statistic(&self, candidate: &ModVector, stream: &mut dyn SampleStream<Torus>) -> Result<f64> {
        let p = candidate.modulus() as f64;
        let mut total = 0.0;
        for _ in 0..self.samples {
            let x = stream.draw()?;
            let y = x.b - Torus::new(x.a.dot(candidate) as f64 / p);
            total += (2.0 * PI * y.value()).cos();
        }
        Ok(total / self.samples.max(1) as f64)
    }

    pub fn accepts(&self, candidate: &ModVector, stream: &mut dyn SampleStream<Torus>) -> Result<bool> {
        Ok(self.statistic(candidate, stream)? > VERIFY_THRESHOLD)
    }
}
