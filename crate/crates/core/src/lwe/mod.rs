//! LWE samples, sample streams, the solver and distinguisher interfaces,
//! the solution verifier, and the reductions between LWE variants.
//!
//! A sample is `(a, b)` with `a` uniform in `Z_p^n` and either
//! `b = <a, s> + e mod p` (discrete, `e ~ chi`) or `b = <a, s>/p + e mod 1`
//! (continuous, `e ~ Psi_beta`). Solvers and distinguishers pull samples
//! from a [`SampleStream`] so their consumption can be metered.

pub mod exact;
pub mod reductions;
pub mod verify;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{discretized_psi, sample_psi, DiscretePmf, PmfSampler};
use crate::modring::{check_modulus, is_prime, round_nearest, ModVector, Torus, MAX_MODULUS};

pub use reductions::{
    full_pipeline, AverageToWorst, ContinuousToDiscrete, DecisionToSearch, LiftError,
    PipelineConfig,
};
pub use verify::{mean_cosine, verify_secret, Verifier, DEFAULT_VERIFY_SAMPLES, VERIFY_THRESHOLD};

/// Error law of an LWE instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    /// A pmf `chi` on `Z_p`.
    Discrete { pmf: DiscretePmf },
    /// `Psi_beta` on the torus; `beta = 0` is noiseless.
    Psi { beta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LweParams {
    pub n: usize,
    pub p: u64,
    pub noise: Noise,
}

impl LweParams {
    pub fn new(n: usize, p: u64, noise: Noise) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !(2..MAX_MODULUS).contains(&p) {
            return Err(Error::Domain(format!("modulus {p} outside [2, 2^31)")));
        }
        match &noise {
            Noise::Discrete { pmf } if pmf.modulus() != p => {
                return Err(Error::Domain(format!(
                    "noise pmf lives on Z_{}, params on Z_{p}",
                    pmf.modulus()
                )))
            }
            Noise::Psi { beta } if !(*beta >= 0.0) => {
                return Err(Error::Domain(format!("beta must be non-negative, got {beta}")))
            }
            _ => {}
        }
        Ok(Self { n, p, noise })
    }

    pub fn psi(n: usize, p: u64, beta: f64) -> Result<Self> {
        Self::new(n, p, Noise::Psi { beta })
    }

    pub fn discrete(n: usize, p: u64, pmf: DiscretePmf) -> Result<Self> {
        Self::new(n, p, Noise::Discrete { pmf })
    }

    /// The error law on `Z_p`: `chi` itself, or `bar-Psi_beta`.
    pub fn discrete_noise(&self) -> Result<DiscretePmf> {
        match &self.noise {
            Noise::Discrete { pmf } => Ok(pmf.clone()),
            Noise::Psi { beta } if *beta == 0.0 => Ok(DiscretePmf::point_mass(self.p, 0)),
            Noise::Psi { beta } => discretized_psi(*beta, self.p),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.noise, Noise::Psi { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LweSample<B> {
    pub a: ModVector,
    pub b: B,
}

pub type DiscreteSample = LweSample<u64>;
pub type ContinuousSample = LweSample<Torus>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Discrete,
    Continuous,
    Uniform,
}

/// A batch of samples of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleBatch {
    Discrete(Vec<DiscreteSample>),
    Continuous(Vec<ContinuousSample>),
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        match self {
            SampleBatch::Discrete(v) => v.len(),
            SampleBatch::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generates samples of `A_{s,chi}`, `A_{s,phi}` or `U`. Uniform samples are
/// continuous when the params carry a torus noise law, discrete otherwise.
pub fn sample_lwe<R: Rng + ?Sized>(
    params: &LweParams,
    s: &ModVector,
    mode: SampleMode,
    count: usize,
    rng: &mut R,
) -> Result<SampleBatch> {
    let seed = rng.random();
    match mode {
        SampleMode::Discrete => {
            let mut o = DiscreteOracle::new(params, Some(s.clone()), seed)?;
            Ok(SampleBatch::Discrete(take(&mut o, count)?))
        }
        SampleMode::Continuous => {
            let mut o = ContinuousOracle::new(params, Some(s.clone()), seed)?;
            Ok(SampleBatch::Continuous(take(&mut o, count)?))
        }
        SampleMode::Uniform if params.is_continuous() => {
            let mut o = ContinuousOracle::new(params, None, seed)?;
            Ok(SampleBatch::Continuous(take(&mut o, count)?))
        }
        SampleMode::Uniform => {
            let mut o = DiscreteOracle::new(params, None, seed)?;
            Ok(SampleBatch::Discrete(take(&mut o, count)?))
        }
    }
}

/// A source of LWE samples.
pub trait SampleStream<B> {
    fn dim(&self) -> usize;
    fn modulus(&self) -> u64;
    fn draw(&mut self) -> Result<LweSample<B>>;
}

impl<B, S: SampleStream<B> + ?Sized> SampleStream<B> for &mut S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn modulus(&self) -> u64 {
        (**self).modulus()
    }

    fn draw(&mut self) -> Result<LweSample<B>> {
        (**self).draw()
    }
}

pub fn take<B, S: SampleStream<B> + ?Sized>(stream: &mut S, count: usize) -> Result<Vec<LweSample<B>>> {
    (0..count).map(|_| stream.draw()).collect()
}

/// Consumes samples from a stream and proposes a secret.
pub trait Solver<B> {
    /// Most samples consumed by one call to `solve`.
    fn budget(&self) -> usize;
    fn solve(&self, stream: &mut dyn SampleStream<B>, rng: &mut dyn RngCore) -> Result<ModVector>;
}

/// Consumes samples from a stream and accepts or rejects.
pub trait Distinguisher<B> {
    fn budget(&self) -> usize;
    fn accepts(&self, stream: &mut dyn SampleStream<B>, rng: &mut dyn RngCore) -> Result<bool>;
}

impl<B, S: Solver<B> + ?Sized> Solver<B> for &S {
    fn budget(&self) -> usize {
        (**self).budget()
    }

    fn solve(&self, stream: &mut dyn SampleStream<B>, rng: &mut dyn RngCore) -> Result<ModVector> {
        (**self).solve(stream, rng)
    }
}

impl<B, D: Distinguisher<B> + ?Sized> Distinguisher<B> for &D {
    fn budget(&self) -> usize {
        (**self).budget()
    }

    fn accepts(&self, stream: &mut dyn SampleStream<B>, rng: &mut dyn RngCore) -> Result<bool> {
        (**self).accepts(stream, rng)
    }
}

/// `A_{s,chi}`, or `U` on `Z_p^n x Z_p` when no secret is given.
#[derive(Clone, Debug)]
pub struct DiscreteOracle {
    n: usize,
    p: u64,
    secret: Option<ModVector>,
    noise: PmfSampler,
    rng: ChaCha20Rng,
}

impl DiscreteOracle {
    pub fn new(params: &LweParams, secret: Option<ModVector>, seed: u64) -> Result<Self> {
        Self::with_noise(params.n, params.p, &params.discrete_noise()?, secret, seed)
    }

    pub fn with_noise(n: usize, p: u64, chi: &DiscretePmf, secret: Option<ModVector>, seed: u64) -> Result<Self> {
        if chi.modulus() != p {
            return Err(Error::Domain("noise modulus differs from p".into()));
        }
        if let Some(s) = &secret {
            if s.len() != n || s.modulus() != p {
                return Err(Error::Domain("secret has the wrong shape".into()));
            }
        }
        Ok(Self {
            n,
            p,
            secret,
            noise: PmfSampler::new(chi),
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn uniform(n: usize, p: u64, seed: u64) -> Self {
        Self {
            n,
            p,
            secret: None,
            noise: PmfSampler::new(&DiscretePmf::point_mass(p, 0)),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl SampleStream<u64> for DiscreteOracle {
    fn dim(&self) -> usize {
        self.n
    }

    fn modulus(&self) -> u64 {
        self.p
    }

    fn draw(&mut self) -> Result<DiscreteSample> {
        let a = ModVector::random(self.n, self.p, &mut self.rng);
        let b = match &self.secret {
            Some(s) => (a.dot(s) + self.noise.sample(&mut self.rng)) % self.p,
            None => self.rng.random_range(0..self.p),
        };
        Ok(LweSample { a, b })
    }
}

/// `A_{s,Psi_beta}`, or `U` on `Z_p^n x T` when no secret is given.
#[derive(Clone, Debug)]
pub struct ContinuousOracle {
    n: usize,
    p: u64,
    secret: Option<ModVector>,
    beta: f64,
    rng: ChaCha20Rng,
}

impl ContinuousOracle {
    pub fn new(params: &LweParams, secret: Option<ModVector>, seed: u64) -> Result<Self> {
        match params.noise {
            Noise::Psi { beta } => Self::with_beta(params.n, params.p, beta, secret, seed),
            Noise::Discrete { .. } => Err(Error::Config(
                "continuous samples need a torus noise law".into(),
            )),
        }
    }

    pub fn with_beta(n: usize, p: u64, beta: f64, secret: Option<ModVector>, seed: u64) -> Result<Self> {
        check_modulus(p)?;
        if let Some(s) = &secret {
            if s.len() != n || s.modulus() != p {
                return Err(Error::Domain("secret has the wrong shape".into()));
            }
        }
        Ok(Self {
            n,
            p,
            secret,
            beta,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }
}

impl SampleStream<Torus> for ContinuousOracle {
    fn dim(&self) -> usize {
        self.n
    }

    fn modulus(&self) -> u64 {
        self.p
    }

    fn draw(&mut self) -> Result<ContinuousSample> {
        let a = ModVector::random(self.n, self.p, &mut self.rng);
        let b = match &self.secret {
            Some(s) => {
                Torus::new(a.dot(s) as f64 / self.p as f64) + sample_psi(self.beta, &mut self.rng)
            }
            None => Torus::new(self.rng.random()),
        };
        Ok(LweSample { a, b })
    }
}

/// Replays a fixed list of samples; running dry is a budget error.
#[derive(Clone, Debug)]
pub struct VecStream<B> {
    n: usize,
    p: u64,
    samples: Vec<LweSample<B>>,
    next: usize,
}

impl<B> VecStream<B> {
    pub fn new(n: usize, p: u64, samples: Vec<LweSample<B>>) -> Self {
        Self {
            n,
            p,
            samples,
            next: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.samples.len() - self.next
    }
}

impl<B: Clone> SampleStream<B> for VecStream<B> {
    fn dim(&self) -> usize {
        self.n
    }

    fn modulus(&self) -> u64 {
        self.p
    }

    fn draw(&mut self) -> Result<LweSample<B>> {
        let s = self
            .samples
            .get(self.next)
            .cloned()
            .ok_or_else(|| Error::Budget(format!("all {} samples consumed", self.samples.len())))?;
        self.next += 1;
        Ok(s)
    }
}

/// A stream backed by a closure.
pub struct FnStream<F> {
    n: usize,
    p: u64,
    f: F,
}

impl<F> FnStream<F> {
    pub fn new(n: usize, p: u64, f: F) -> Self {
        Self { n, p, f }
    }
}

impl<B, F: FnMut() -> Result<LweSample<B>>> SampleStream<B> for FnStream<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn modulus(&self) -> u64 {
        self.p
    }

    fn draw(&mut self) -> Result<LweSample<B>> {
        (self.f)()
    }
}

/// Counts draws and refuses to exceed a limit.
pub struct Budgeted<S> {
    inner: S,
    limit: usize,
    used: usize,
}

impl<S> Budgeted<S> {
    pub fn new(inner: S, limit: usize) -> Self {
        Self {
            inner,
            limit,
            used: 0,
        }
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<B, S: SampleStream<B>> SampleStream<B> for Budgeted<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn draw(&mut self) -> Result<LweSample<B>> {
        if self.used >= self.limit {
            return Err(Error::Budget(format!("declared budget of {} samples exceeded", self.limit)));
        }
        self.used += 1;
        self.inner.draw()
    }
}

/// `f_t(a, b) = (a, b + <a, t>)`, mapping `A_{s,chi}` to `A_{s+t,chi}`.
pub struct ShiftedStream<'a> {
    inner: &'a mut dyn SampleStream<u64>,
    t: ModVector,
}

impl<'a> ShiftedStream<'a> {
    pub fn new(inner: &'a mut dyn SampleStream<u64>, t: ModVector) -> Self {
        Self { inner, t }
    }
}

impl SampleStream<u64> for ShiftedStream<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn draw(&mut self) -> Result<DiscreteSample> {
        let s = self.inner.draw()?;
        let b = (s.b + s.a.dot(&self.t)) % self.modulus();
        Ok(LweSample { a: s.a, b })
    }
}

/// `(a + l e_i, b + l k)` with fresh uniform `l`: keeps `A_{s,chi}` when
/// `k = s_i` and makes it uniform otherwise (for prime `p`).
pub struct CoordinateGuessStream<'a> {
    inner: &'a mut dyn SampleStream<u64>,
    coordinate: usize,
    guess: u64,
    rng: ChaCha20Rng,
}

impl<'a> CoordinateGuessStream<'a> {
    pub fn new(inner: &'a mut dyn SampleStream<u64>, coordinate: usize, guess: u64, seed: u64) -> Self {
        Self {
            inner,
            coordinate,
            guess,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl SampleStream<u64> for CoordinateGuessStream<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn draw(&mut self) -> Result<DiscreteSample> {
        let p = self.modulus();
        let mut s = self.inner.draw()?;
        let l = self.rng.random_range(0..p);
        let ai = s.a.get(self.coordinate).value();
        s.a.set(self.coordinate, (ai + l) % p);
        s.b = (s.b + l * self.guess) % p;
        Ok(s)
    }
}

/// Rounds `p b` to the nearest integer mod `p`.
pub fn discretize_b(b: Torus, p: u64) -> u64 {
    round_nearest(p as f64 * b.value()).rem_euclid(p as i64) as u64
}

/// Turns continuous samples into discrete ones by rounding `p b`.
pub struct DiscretizingStream<'a> {
    inner: &'a mut dyn SampleStream<Torus>,
}

impl<'a> DiscretizingStream<'a> {
    pub fn new(inner: &'a mut dyn SampleStream<Torus>) -> Self {
        Self { inner }
    }
}

impl SampleStream<u64> for DiscretizingStream<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn draw(&mut self) -> Result<DiscreteSample> {
        let s = self.inner.draw()?;
        let p = self.modulus();
        Ok(LweSample {
            a: s.a,
            b: discretize_b(s.b, p),
        })
    }
}

/// Adds independent `Psi_width` noise to each `b`.
pub struct NoiseAddingStream<'a> {
    inner: &'a mut dyn SampleStream<Torus>,
    width: f64,
    rng: ChaCha20Rng,
}

impl<'a> NoiseAddingStream<'a> {
    pub fn new(inner: &'a mut dyn SampleStream<Torus>, width: f64, seed: u64) -> Self {
        Self {
            inner,
            width,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl SampleStream<Torus> for NoiseAddingStream<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn draw(&mut self) -> Result<ContinuousSample> {
        let s = self.inner.draw()?;
        Ok(LweSample {
            a: s.a,
            b: s.b + sample_psi(self.width, &mut self.rng),
        })
    }
}

pub(crate) fn require_prime(p: u64) -> Result<()> {
    check_modulus(p)?;
    if !is_prime(p) {
        return Err(Error::UnsupportedModulus(p));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::stat_distance_pmf;
    use crate::stats::{residue_counts, tv_counts_vs_probs};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn noiseless_samples_satisfy_equations() {
        let params = LweParams::discrete(4, 11, DiscretePmf::point_mass(11, 0)).unwrap();
        let s = ModVector::random(4, 11, &mut rng(1));
        let SampleBatch::Discrete(batch) = sample_lwe(&params, &s, SampleMode::Discrete, 200, &mut rng(2)).unwrap()
        else {
            panic!("expected discrete samples")
        };
        assert!(batch.iter().all(|x| x.b == x.a.dot(&s)));
    }

    #[test]
    fn parity_noise_rate() {
        let eps = 0.125;
        let params = LweParams::discrete(10, 2, DiscretePmf::bernoulli(eps).unwrap()).unwrap();
        let s = ModVector::random(10, 2, &mut rng(3));
        let SampleBatch::Discrete(batch) = sample_lwe(&params, &s, SampleMode::Discrete, 10_000, &mut rng(4)).unwrap()
        else {
            panic!("expected discrete samples")
        };
        let ok = batch.iter().filter(|x| x.b == x.a.dot(&s)).count() as f64 / 1e4;
        assert!((ok - (1.0 - eps)).abs() < 0.01, "{ok}");
    }

    #[test]
    fn a_marginal_is_uniform() {
        let params = LweParams::psi(2, 5, 0.1).unwrap();
        let s = ModVector::new(vec![1, 3], 5);
        let SampleBatch::Continuous(batch) =
            sample_lwe(&params, &s, SampleMode::Continuous, 100_000, &mut rng(5)).unwrap()
        else {
            panic!("expected continuous samples")
        };
        let counts = residue_counts(batch.iter().map(|x| x.a.entries()[0] * 5 + x.a.entries()[1]), 25);
        let expected = 100_000.0 / 25.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let pval = 1.0 - ChiSquared::new(24.0).unwrap().cdf(stat);
        assert!(pval > 1e-3, "chi-square {stat}, p = {pval}");
    }

    #[test]
    fn uniform_mode_follows_noise_kind() {
        let s = ModVector::zero(3, 7);
        let cont = LweParams::psi(3, 7, 0.1).unwrap();
        assert!(matches!(
            sample_lwe(&cont, &s, SampleMode::Uniform, 3, &mut rng(6)).unwrap(),
            SampleBatch::Continuous(_)
        ));
        let disc = LweParams::discrete(3, 7, DiscretePmf::uniform(7)).unwrap();
        assert!(matches!(
            sample_lwe(&disc, &s, SampleMode::Uniform, 3, &mut rng(6)).unwrap(),
            SampleBatch::Discrete(_)
        ));
        assert!(sample_lwe(&disc, &s, SampleMode::Continuous, 3, &mut rng(6)).is_err());
        assert!(LweParams::discrete(3, 5, DiscretePmf::uniform(7)).is_err());
    }

    #[test]
    fn discretization_commutes() {
        // round(p * (continuous sample)) versus drawing from bar-Psi directly
        let (p, beta) = (16u64, 0.1);
        let s = ModVector::new(vec![3, 9], p);
        let mut cont = ContinuousOracle::with_beta(2, p, beta, Some(s.clone()), 7).unwrap();
        let mut disc = DiscretizingStream::new(&mut cont);
        let errs = (0..100_000).map(|_| {
            let x = disc.draw().unwrap();
            (x.b + p - x.a.dot(&s)) % p
        });
        let counts = residue_counts(errs, p);
        let target = discretized_psi(beta, p).unwrap();
        assert!(tv_counts_vs_probs(&counts, target.probs()) < 0.02);

        let mut direct = DiscreteOracle::new(&LweParams::psi(2, p, beta).unwrap(), Some(s.clone()), 8).unwrap();
        let errs = (0..100_000).map(|_| {
            let x = direct.draw().unwrap();
            (x.b + p - x.a.dot(&s)) % p
        });
        let counts2 = residue_counts(errs, p);
        assert!(crate::stats::tv_counts(&counts, &counts2) < 0.02);
        assert!(stat_distance_pmf(&target, &LweParams::psi(2, p, beta).unwrap().discrete_noise().unwrap()).unwrap() == 0.0);
    }

    #[test]
    fn noiseless_discretization_is_exact() {
        let p = 13;
        let s = ModVector::new(vec![4, 0, 12], p);
        let mut cont = ContinuousOracle::with_beta(3, p, 0.0, Some(s.clone()), 9).unwrap();
        let mut disc = DiscretizingStream::new(&mut cont);
        for _ in 0..1000 {
            let x = disc.draw().unwrap();
            assert_eq!(x.b, x.a.dot(&s));
        }
    }

    #[test]
    fn budgeted_stream_counts() {
        let mut o = DiscreteOracle::uniform(2, 5, 1);
        let mut b = Budgeted::new(&mut o, 3);
        assert!(take(&mut b, 3).is_ok());
        assert_eq!(b.used(), 3);
        assert!(matches!(b.draw(), Err(Error::Budget(_))));
        let mut v = VecStream::new(1, 5, vec![LweSample { a: ModVector::zero(1, 5), b: 0u64 }]);
        assert!(v.draw().is_ok());
        assert!(matches!(v.draw(), Err(Error::Budget(_))));
    }
}
