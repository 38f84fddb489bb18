//! Gaussian functions, the periodic normal distribution `Psi_beta` on the
//! torus, discretization to `Z_p`, and statistical distance.
//!
//! Conventions: `rho_s(x) = exp(-pi |x/s|^2)`, so a one-dimensional sample of
//! `nu_s` is normal with standard deviation `s / sqrt(2 pi)`. Statistical
//! distance is the full L1 distance and ranges over `[0, 2]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modring::{round_nearest, Torus};

/// Panels per unit length for composite Simpson quadrature.
pub const SIMPSON_PANELS_PER_UNIT: usize = 1 << 12;

/// Tail mass dropped when truncating the `Psi_beta` series.
pub const PSI_TAIL: f64 = 1e-15;

/// Tolerance on the total mass of a pmf.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Standard deviation of the normal law whose density is `rho_s / s`.
pub fn normal_std(s: f64) -> f64 {
    s / (2.0 * PI).sqrt()
}

pub fn rho(x: &[f64], s: f64) -> f64 {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    (-PI * norm2 / (s * s)).exp()
}

/// `rho_s` as a function of the squared norm.
pub fn rho_norm2(norm2: f64, s: f64) -> f64 {
    (-PI * norm2 / (s * s)).exp()
}

/// `nu_s(x) = rho_s(x) / s^n` with `n = x.len()`.
pub fn nu_density(x: &[f64], s: f64) -> f64 {
    rho(x, s) / s.powi(x.len() as i32)
}

pub fn sample_nu<R: Rng + ?Sized>(s: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, normal_std(s)).expect("finite positive width");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// CDF of a centred normal with the given standard deviation.
pub fn normal_cdf(x: f64, std: f64) -> f64 {
    0.5 * libm::erfc(-x / (std * std::f64::consts::SQRT_2))
}

/// Number of periods kept on each side when summing the `Psi_beta` series.
pub fn psi_truncation(beta: f64) -> usize {
    (beta * ((1.0 / PSI_TAIL).ln() / PI).sqrt()).ceil() as usize + 2
}

/// Density of `Psi_beta` at the torus point `r` (any real is reduced mod 1).
pub fn psi_density(r: f64, beta: f64) -> f64 {
    let r = Torus::new(r).value();
    let k = psi_truncation(beta) as i64;
    (-k..=k)
        .map(|j| {
            let t = (r - j as f64) / beta;
            (-PI * t * t).exp()
        })
        .sum::<f64>()
        / beta
}

/// Samples `Psi_beta`: a normal with standard deviation `beta / sqrt(2 pi)`
/// reduced mod 1. `beta == 0` is the point mass at 0.
pub fn sample_psi<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Torus {
    if beta == 0.0 {
        return Torus::zero();
    }
    let normal = Normal::new(0.0, normal_std(beta)).expect("finite positive width");
    Torus::new(normal.sample(rng))
}

/// One draw of the discretized noise `bar-Psi_beta` on `Z_p`.
pub fn sample_psi_discrete<R: Rng + ?Sized>(beta: f64, p: u64, rng: &mut R) -> u64 {
    let x = sample_psi(beta, rng).value();
    round_nearest(p as f64 * x).rem_euclid(p as i64) as u64
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64 + ?Sized>(f: &F, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels.max(2).next_multiple_of(2);
    let h = (hi - lo) / panels as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson quadrature at the default resolution of 2^12 panels per unit length.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, lo: f64, hi: f64) -> f64 {
    let panels = ((hi - lo) * SIMPSON_PANELS_PER_UNIT as f64).ceil() as usize;
    simpson(f, lo, hi, panels)
}

/// A probability density on the torus.
pub trait TorusDensity {
    fn density(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> TorusDensity for F {
    fn density(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `Psi_beta` as a density object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrappedGaussian {
    pub beta: f64,
}

impl WrappedGaussian {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn truncation(&self) -> usize {
        psi_truncation(self.beta)
    }
}

impl TorusDensity for WrappedGaussian {
    fn density(&self, x: f64) -> f64 {
        psi_density(x, self.beta)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UniformTorus;

impl TorusDensity for UniformTorus {
    fn density(&self, _x: f64) -> f64 {
        1.0
    }
}

/// A probability mass function on `Z_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    p: u64,
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Domain("pmf needs at least two cells".into()));
        }
        if probs.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::Domain("pmf entries must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::Domain(format!("pmf sums to {total}, not 1")));
        }
        let probs = probs.into_iter().map(|q| q / total).collect::<Vec<_>>();
        Ok(Self {
            p: probs.len() as u64,
            probs,
        })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("weights must have positive mass".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(p: u64) -> Self {
        Self {
            p,
            probs: vec![1.0 / p as f64; p as usize],
        }
    }

    pub fn point_mass(p: u64, at: u64) -> Self {
        let mut probs = vec![0.0; p as usize];
        probs[(at % p) as usize] = 1.0;
        Self { p, probs }
    }

    /// The parity-with-noise error law: `chi(0) = 1 - eps`, `chi(1) = eps`.
    pub fn bernoulli(eps: f64) -> Result<Self> {
        Self::new(vec![1.0 - eps, eps])
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: u64) -> f64 {
        self.probs[(i % self.p) as usize]
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, &q| {
                *acc += q;
                Some(*acc)
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &q) in self.probs.iter().enumerate() {
            acc += q;
            if u < acc {
                return i as u64;
            }
        }
        // rounding slack: last cell with positive mass
        self.probs.iter().rposition(|&q| q > 0.0).unwrap_or(0) as u64
    }

    /// Law of `X + Y mod p` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &DiscretePmf) -> Result<DiscretePmf> {
        if self.p != other.p {
            return Err(Error::Domain("convolving pmfs on different moduli".into()));
        }
        let p = self.p as usize;
        let mut out = vec![0.0; p];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                out[(i + j) % p] += a * b;
            }
        }
        Ok(DiscretePmf {
            p: self.p,
            probs: out,
        })
    }

    /// `chi^{*k}`: the sum of `k` independent draws (point mass at 0 for `k = 0`).
    pub fn convolve_power(&self, k: usize) -> DiscretePmf {
        let mut acc = DiscretePmf::point_mass(self.p, 0);
        for _ in 0..k {
            acc = acc.convolve(self).expect("same modulus");
        }
        acc
    }

    /// Law of `f(X)` for a map `f: Z_p -> Z_q`.
    pub fn pushforward<F: Fn(u64) -> u64>(&self, q: u64, f: F) -> DiscretePmf {
        let mut out = vec![0.0; q as usize];
        for (i, &w) in self.probs.iter().enumerate() {
            out[(f(i as u64) % q) as usize] += w;
        }
        DiscretePmf { p: q, probs: out }
    }

    /// Per-residue log-likelihoods with a floor for empty cells.
    pub fn log_likelihoods(&self, floor: f64) -> Vec<f64> {
        self.probs.iter().map(|&q| q.max(floor).ln()).collect()
    }
}

/// Inverse-cdf sampling by binary search, for repeated draws from one pmf.
#[derive(Clone, Debug)]
pub struct PmfSampler {
    cdf: Vec<f64>,
}

impl PmfSampler {
    pub fn new(pmf: &DiscretePmf) -> Self {
        Self { cdf: pmf.cdf() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u64
    }
}

/// `bar-phi(i) = integral of phi over [(i - 1/2)/p, (i + 1/2)/p]`.
pub fn discretize_density<D: TorusDensity + ?Sized>(phi: &D, p: u64) -> DiscretePmf {
    let width = 1.0 / p as f64;
    let panels = (SIMPSON_PANELS_PER_UNIT as f64 * width).ceil() as usize;
    let f = |x: f64| phi.density(x);
    let masses: Vec<f64> = (0..p)
        .map(|i| {
            let lo = (i as f64 - 0.5) * width;
            simpson(&f, lo, lo + width, panels)
        })
        .collect();
    let total: f64 = masses.iter().sum();
    DiscretePmf {
        p,
        probs: masses.into_iter().map(|m| m / total).collect(),
    }
}

/// `bar-Psi_beta` on `Z_p`.
pub fn discretized_psi(beta: f64, p: u64) -> Result<DiscretePmf> {
    Ok(discretize_density(&WrappedGaussian::new(beta)?, p))
}

/// Where a density lives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Torus,
    /// A real interval carrying (numerically) all of the mass.
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    fn bounds(self) -> (f64, f64) {
        match self {
            Domain::Torus => (0.0, 1.0),
            Domain::Interval { lo, hi } => (lo, hi),
        }
    }
}

/// A density evaluator tagged with its domain.
pub struct Density<'a> {
    domain: Domain,
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
}

impl<'a> Density<'a> {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'a>(domain: Domain, f: F) -> Self {
        Self {
            domain,
            eval: Box::new(f),
        }
    }

    pub fn wrapped_gaussian(beta: f64) -> Self {
        Self::new(Domain::Torus, move |x| psi_density(x, beta))
    }

    /// One-dimensional `nu_s` on `[-lo_hi, lo_hi]`.
    pub fn normal(s: f64, half_width: f64) -> Self {
        Self::new(
            Domain::Interval {
                lo: -half_width,
                hi: half_width,
            },
            move |x| rho(&[x], s) / s,
        )
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

/// `integral |f - g|` by Simpson quadrature over the shared domain.
pub fn stat_distance(f: &Density<'_>, g: &Density<'_>) -> Result<f64> {
    if f.domain != g.domain {
        return Err(Error::Domain(format!(
            "densities live on {:?} and {:?}",
            f.domain, g.domain
        )));
    }
    let (lo, hi) = f.domain.bounds();
    let diff = |x: f64| (f.eval(x) - g.eval(x)).abs();
    Ok(integrate(&diff, lo, hi))
}

/// `sum |a(i) - b(i)|` for two pmfs on the same `Z_p`.
pub fn stat_distance_pmf(a: &DiscretePmf, b: &DiscretePmf) -> Result<f64> {
    if a.p != b.p {
        return Err(Error::Domain(format!(
            "pmfs on Z_{} and Z_{}",
            a.p, b.p
        )));
    }
    Ok(a.probs
        .iter()
        .zip(&b.probs)
        .map(|(x, y)| (x - y).abs())
        .sum())
}
