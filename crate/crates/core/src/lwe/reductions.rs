//! Reductions between LWE variants: noise lifting, average case to worst
//! case, decision to search, and continuous to discrete, plus their
//! composition.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::modring::{centered_abs, ModVector, Torus};

use super::verify::Verifier;
use super::{
    require_prime, CoordinateGuessStream, DiscreteOracle, DiscretizingStream, Distinguisher,
    NoiseAddingStream, SampleStream, ShiftedStream, Solver,
};

pub const DEFAULT_LIFT_GRID: usize = 64;
pub const DEFAULT_SHIFTS: usize = 100;
pub const DEFAULT_ESTIMATE_CALLS: usize = 2000;

/// Solves `A_{s,Psi_beta}` for unknown `beta <= alpha` with a solver `W`
/// for `Psi_alpha`: for `gamma` on the grid `{0, alpha^2/G, ..., alpha^2}`
/// add `Psi_sqrt(gamma)` noise, run `W`, and keep the first candidate that
/// passes verification on fresh samples.
#[derive(Clone, Debug)]
pub struct LiftError<W> {
    pub inner: W,
    pub alpha: f64,
    pub grid: usize,
    /// Calls to `W` per grid point.
    pub repeats: usize,
    pub verifier: Verifier,
}

impl<W> LiftError<W> {
    pub fn new(inner: W, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            inner,
            alpha,
            grid: DEFAULT_LIFT_GRID,
            repeats: 1,
            verifier: Verifier::default(),
        })
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid.max(1);
        self
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats.max(1);
        self
    }

    pub fn with_verifier(mut self, verifier: Verifier) -> Self {
        self.verifier = verifier;
        self
    }
}

impl<W: Solver<Torus>> LiftError<W> {
    /// The recovered secret and the `gamma` at which it verified.
    pub fn solve_with_gamma(
        &self,
        stream: &mut dyn SampleStream<Torus>,
        rng: &mut dyn RngCore,
    ) -> Result<(ModVector, f64)> {
        let a2 = self.alpha * self.alpha;
        for j in 0..=self.grid {
            let gamma = a2 * j as f64 / self.grid as f64;
            for _ in 0..self.repeats {
                let seed = rng.random();
                let candidate = {
                    let mut noisy = NoiseAddingStream::new(&mut *stream, gamma.sqrt(), seed);
                    match self.inner.solve(&mut noisy, rng) {
                        Ok(c) => c,
                        Err(Error::NotFound(_)) => continue,
                        Err(e) => return Err(e),
                    }
                };
                if self.verifier.accepts(&candidate, stream)? {
                    log::debug!("noise lifting verified at gamma = {gamma}");
                    return Ok((candidate, gamma));
                }
            }
        }
        Err(Error::NotFound(
            "no grid point produced a candidate that passed verification".into(),
        ))
    }
}

impl<W: Solver<Torus>> Solver<Torus> for LiftError<W> {
    fn budget(&self) -> usize {
        (self.grid + 1) * self.repeats * (self.inner.budget() + self.verifier.samples)
    }

    fn solve(&self, stream: &mut dyn SampleStream<Torus>, rng: &mut dyn RngCore) -> Result<ModVector> {
        self.solve_with_gamma(stream, rng).map(|(s, _)| s)
    }
}

/// Turns a distinguisher that works for some secrets into one that works
/// for all: try random shifts `f_t`, estimate the acceptance probability of
/// `W` on `f_t(R)` and on `U`, and accept once they differ by more than
/// `gap / 2`.
#[derive(Clone, Debug)]
pub struct AverageToWorst<D> {
    pub inner: D,
    pub n: usize,
    pub p: u64,
    pub shifts: usize,
    pub estimate_calls: usize,
    /// The acceptance gap `W` achieves on its good secrets.
    pub gap: f64,
}

impl<D> AverageToWorst<D> {
    pub fn new(inner: D, n: usize, p: u64, gap: f64) -> Self {
        Self {
            inner,
            n,
            p,
            shifts: DEFAULT_SHIFTS,
            estimate_calls: DEFAULT_ESTIMATE_CALLS,
            gap,
        }
    }

    pub fn with_trials(mut self, shifts: usize, estimate_calls: usize) -> Self {
        self.shifts = shifts;
        self.estimate_calls = estimate_calls;
        self
    }
}

impl<D: Distinguisher<u64>> AverageToWorst<D> {
    fn estimate(&self, stream: &mut dyn SampleStream<u64>, rng: &mut dyn RngCore) -> Result<f64> {
        let mut hits = 0usize;
        for _ in 0..self.estimate_calls {
            if self.inner.accepts(stream, rng)? {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.estimate_calls.max(1) as f64)
    }
}

impl<D: Distinguisher<u64>> Distinguisher<u64> for AverageToWorst<D> {
    fn budget(&self) -> usize {
        self.shifts * self.estimate_calls * self.inner.budget()
    }

    fn accepts(&self, stream: &mut dyn SampleStream<u64>, rng: &mut dyn RngCore) -> Result<bool> {
        for _ in 0..self.shifts {
            let t = ModVector::random(self.n, self.p, rng);
            let on_shifted = {
                let mut shifted = ShiftedStream::new(&mut *stream, t);
                self.estimate(&mut shifted, rng)?
            };
            let mut uniform = DiscreteOracle::uniform(self.n, self.p, rng.random());
            let on_uniform = self.estimate(&mut uniform, rng)?;
            if (on_shifted - on_uniform).abs() > self.gap / 2.0 {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Recovers `s` one coordinate at a time: for each guess `k` of `s_i`,
/// apply `(a + l e_i, b + l k)` and ask `W` whether the result still looks
/// like LWE. Exactly one guess per coordinate must be accepted.
#[derive(Clone, Debug)]
pub struct DecisionToSearch<D> {
    pub inner: D,
    pub n: usize,
    pub p: u64,
}

impl<D> DecisionToSearch<D> {
    pub fn new(inner: D, n: usize, p: u64) -> Result<Self> {
        require_prime(p)?;
        Ok(Self { inner, n, p })
    }
}

impl<D: Distinguisher<u64>> Solver<u64> for DecisionToSearch<D> {
    fn budget(&self) -> usize {
        self.n * self.p as usize * self.inner.budget()
    }

    fn solve(&self, stream: &mut dyn SampleStream<u64>, rng: &mut dyn RngCore) -> Result<ModVector> {
        require_prime(self.p)?;
        let mut s = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut accepted = Vec::new();
            for k in 0..self.p {
                let mut guess = CoordinateGuessStream::new(&mut *stream, i, k, rng.random());
                if self.inner.accepts(&mut guess, rng)? {
                    accepted.push(k);
                }
            }
            match accepted.as_slice() {
                [k] => s.push(*k),
                _ => {
                    return Err(Error::NotFound(format!(
                        "coordinate {i}: distinguisher accepted guesses {accepted:?}"
                    )))
                }
            }
        }
        Ok(ModVector::new(s, self.p))
    }
}

/// Solves continuous LWE with a solver for the discretized noise by rounding
/// `p b` to the nearest integer.
#[derive(Clone, Debug)]
pub struct ContinuousToDiscrete<W> {
    pub inner: W,
}

impl<W> ContinuousToDiscrete<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }
}

impl<W: Solver<u64>> Solver<Torus> for ContinuousToDiscrete<W> {
    fn budget(&self) -> usize {
        self.inner.budget()
    }

    fn solve(&self, stream: &mut dyn SampleStream<Torus>, rng: &mut dyn RngCore) -> Result<ModVector> {
        let mut disc = DiscretizingStream::new(stream);
        self.inner.solve(&mut disc, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub shifts: usize,
    pub estimate_calls: usize,
    pub gap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            shifts: DEFAULT_SHIFTS,
            estimate_calls: DEFAULT_ESTIMATE_CALLS,
            gap: 0.5,
        }
    }
}

pub type Pipeline<D> = ContinuousToDiscrete<DecisionToSearch<AverageToWorst<D>>>;

/// A solver for continuous LWE built from a distinguisher for the
/// discretized problem that only works on some secrets.
pub fn full_pipeline<D: Distinguisher<u64>>(
    w: D,
    n: usize,
    p: u64,
    config: PipelineConfig,
) -> Result<Pipeline<D>> {
    let worst = AverageToWorst::new(w, n, p, config.gap).with_trials(config.shifts, config.estimate_calls);
    Ok(ContinuousToDiscrete::new(DecisionToSearch::new(worst, n, p)?))
}

/// A distinguisher that only recognises a fixed set of secrets: it accepts
/// when, for some secret in the set, at least `agree` of its `k` samples
/// satisfy `|b - <a, s>| <= tol` in the centered metric.
#[derive(Clone, Debug)]
pub struct PlantedDistinguisher {
    pub secrets: Vec<ModVector>,
    pub k: usize,
    pub tol: u64,
    pub agree: f64,
}

impl PlantedDistinguisher {
    pub fn new(secrets: Vec<ModVector>, k: usize) -> Self {
        Self {
            secrets,
            k,
            tol: 0,
            agree: 0.9,
        }
    }
}

impl Distinguisher<u64> for PlantedDistinguisher {
    fn budget(&self) -> usize {
        self.k
    }

    fn accepts(&self, stream: &mut dyn SampleStream<u64>, _rng: &mut dyn RngCore) -> Result<bool> {
        let p = stream.modulus();
        let samples = super::take(stream, self.k)?;
        Ok(self.secrets.iter().any(|s| {
            let good = samples
                .iter()
                .filter(|x| centered_abs((x.b + p - x.a.dot(s)) % p, p) <= self.tol)
                .count();
            good as f64 >= self.agree * self.k as f64
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::discretized_psi;
    use crate::lwe::{take, Budgeted, ContinuousOracle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    /// Knows the secret; answers correctly only when the noise width it sees
    /// is `alpha` (within `tol` on the mean cosine).
    struct PickySolver {
        s: ModVector,
        alpha: f64,
        k: usize,
        tol: f64,
    }

    impl Solver<Torus> for PickySolver {
        fn budget(&self) -> usize {
            self.k
        }

        fn solve(&self, stream: &mut dyn SampleStream<Torus>, _rng: &mut dyn RngCore) -> Result<ModVector> {
            let samples = take(stream, self.k)?;
            let z = crate::lwe::mean_cosine(&self.s, &samples);
            if (z - (-PI * self.alpha * self.alpha).exp()).abs() < self.tol {
                Ok(self.s.clone())
            } else {
                let mut wrong = self.s.clone();
                wrong.set(0, (self.s.get(0).value() + 1) % self.s.modulus());
                Ok(wrong)
            }
        }
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn lift_error_at_full_width_uses_gamma_zero() {
        let s = ModVector::new(vec![1, 5, 2], 7);
        let alpha = 0.5;
        let w = PickySolver { s: s.clone(), alpha, k: 8000, tol: 0.03 };
        let lift = LiftError::new(w, alpha).unwrap();
        let mut o = ContinuousOracle::with_beta(3, 7, alpha, Some(s.clone()), 1).unwrap();
        let (got, gamma) = lift.solve_with_gamma(&mut o, &mut rng(2)).unwrap();
        assert_eq!(got, s);
        assert_eq!(gamma, 0.0);
    }

    #[test]
    fn lift_error_finds_the_missing_variance() {
        let s = ModVector::new(vec![1, 5, 2], 7);
        let alpha = 0.5;
        let w = PickySolver { s: s.clone(), alpha, k: 8000, tol: 0.03 };
        let lift = LiftError::new(w, alpha).unwrap();
        let mut o = ContinuousOracle::with_beta(3, 7, alpha / 2.0, Some(s.clone()), 3).unwrap();
        let (got, gamma) = lift.solve_with_gamma(&mut o, &mut rng(4)).unwrap();
        assert_eq!(got, s);
        let target = 0.75 * alpha * alpha;
        assert!(gamma > target - 0.05 && gamma < target + 0.02, "{gamma} vs {target}");
    }

    #[test]
    fn lift_error_rejects_bad_alpha_and_reports_failure() {
        let s = ModVector::new(vec![1], 7);
        assert!(LiftError::new(PickySolver { s: s.clone(), alpha: 1.0, k: 1, tol: 0.0 }, 1.0).is_err());
        // solver never matches: every candidate is wrong and verification fails
        let w = PickySolver { s: s.clone(), alpha: 0.3, k: 100, tol: -1.0 };
        let lift = LiftError::new(w, 0.3).unwrap().with_grid(4).with_verifier(Verifier { samples: 4096 });
        let mut o = ContinuousOracle::with_beta(1, 7, 0.3, Some(s), 5).unwrap();
        assert!(matches!(lift.solve(&mut o, &mut rng(6)), Err(Error::NotFound(_))));
    }

    fn chi() -> crate::gaussian::DiscretePmf {
        discretized_psi(0.05, 5).unwrap()
    }

    #[test]
    fn worst_to_average_with_planted_distinguisher() {
        let (n, p) = (2, 5);
        let s0 = ModVector::new(vec![3, 1], p);
        let w = PlantedDistinguisher::new(vec![s0], 8);
        let wp = AverageToWorst::new(w, n, p, 0.8).with_trials(200, 16);
        let mut r = rng(7);
        for trial in 0..20 {
            let s = ModVector::random(n, p, &mut r);
            let mut lwe = DiscreteOracle::with_noise(n, p, &chi(), Some(s.clone()), 100 + trial).unwrap();
            assert!(wp.accepts(&mut lwe, &mut r).unwrap(), "missed secret {s:?}");
            let mut u = DiscreteOracle::uniform(n, p, 200 + trial);
            assert!(!wp.accepts(&mut u, &mut r).unwrap());
        }
    }

    #[test]
    fn decision_to_search_needs_prime_modulus() {
        let w = PlantedDistinguisher::new(vec![], 1);
        assert!(matches!(DecisionToSearch::new(w, 2, 6), Err(Error::UnsupportedModulus(6))));
    }

    #[test]
    fn decision_to_search_reports_inconsistent_distinguisher() {
        struct Always;
        impl Distinguisher<u64> for Always {
            fn budget(&self) -> usize {
                0
            }
            fn accepts(&self, _: &mut dyn SampleStream<u64>, _: &mut dyn RngCore) -> Result<bool> {
                Ok(true)
            }
        }
        let d = DecisionToSearch::new(Always, 2, 5).unwrap();
        let mut u = DiscreteOracle::uniform(2, 5, 1);
        assert!(matches!(d.solve(&mut u, &mut rng(1)), Err(Error::NotFound(_))));
    }

    fn fraction_distinguisher(p: u64) -> PlantedDistinguisher {
        // good on the 1/p fraction of secrets with first coordinate 0
        PlantedDistinguisher::new((0..p).map(|j| ModVector::new(vec![0, j], p)).collect(), 8)
    }

    #[test]
    fn full_pipeline_recovers_secrets() {
        let (n, p, beta) = (2, 5, 0.05);
        let cfg = PipelineConfig { shifts: 40, estimate_calls: 32, gap: 0.8 };
        let solver = full_pipeline(fraction_distinguisher(p), n, p, cfg).unwrap();
        let mut r = rng(8);
        let mut ok = 0;
        for trial in 0..50 {
            let s = ModVector::random(n, p, &mut r);
            let mut o = ContinuousOracle::with_beta(n, p, beta, Some(s.clone()), 300 + trial).unwrap();
            if solver.solve(&mut o, &mut r).ok() == Some(s) {
                ok += 1;
            }
        }
        assert!(ok >= 45, "{ok}/50");
    }

    #[test]
    fn full_pipeline_noiseless_and_within_budget() {
        let (n, p) = (2, 5);
        let cfg = PipelineConfig { shifts: 40, estimate_calls: 8, gap: 0.8 };
        let solver = full_pipeline(fraction_distinguisher(p), n, p, cfg).unwrap();
        let mut r = rng(9);
        for trial in 0..10 {
            let s = ModVector::random(n, p, &mut r);
            let o = ContinuousOracle::with_beta(n, p, 0.0, Some(s.clone()), 400 + trial).unwrap();
            let mut metered = Budgeted::new(o, solver.budget());
            assert_eq!(solver.solve(&mut metered, &mut r).unwrap(), s);
            assert!(metered.used() <= solver.budget());
        }
    }
}
