//! Desk-scale solvers: exhaustive maximum likelihood, Gaussian elimination
//! with majority voting, and BKW for learning parity with noise.

use std::collections::HashMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::DiscretePmf;
use crate::lwe::{take, DiscreteOracle, DiscreteSample, Distinguisher, SampleStream, Solver};
use crate::modring::ModVector;
use crate::rng;

pub const ML_FLOOR: f64 = 1e-12;
pub const ML_TIE_TOLERANCE: f64 = 1e-9;
pub const MAX_ML_BINARY_DIM: usize = 16;
pub const MAX_ML_CANDIDATES: u64 = 1 << 24;

const ML_CHUNK: u64 = 4096;

pub fn ml_guard(n: usize, p: u64) -> Result<()> {
    let ok = if p == 2 {
        n <= MAX_ML_BINARY_DIM
    } else {
        p.checked_pow(n as u32).is_some_and(|c| c <= MAX_ML_CANDIDATES)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ResourceLimit(format!("exhaustive search over Z_{p}^{n} is too large")))
    }
}

fn better(x: (f64, u64), y: (f64, u64)) -> (f64, u64) {
    if (x.0 - y.0).abs() <= ML_TIE_TOLERANCE {
        if x.1 <= y.1 {
            x
        } else {
            y
        }
    } else if x.0 > y.0 {
        x
    } else {
        y
    }
}

/// The candidate maximising `sum_i score[b_i - <a_i, s'>]`, with its score.
/// Near-ties (within 1e-9) go to the lexicographically smallest candidate.
pub fn ml_search(samples: &[DiscreteSample], n: usize, p: u64, score: &[f64]) -> Result<(ModVector, f64)> {
    ml_guard(n, p)?;
    if score.len() as u64 != p {
        return Err(Error::Domain("score table length must equal p".into()));
    }
    if let Some(x) = samples.iter().find(|x| x.a.len() != n || x.a.modulus() != p) {
        return Err(Error::Domain(format!("sample in Z_{}^{} does not match Z_{p}^{n}", x.a.modulus(), x.a.len())));
    }
    let total = p.pow(n as u32);
    let cols: Vec<Vec<u64>> = (0..n)
        .map(|j| samples.iter().map(|x| x.a.entries()[j]).collect())
        .collect();
    let decode = |mut idx: u64| {
        let mut d = vec![0u64; n];
        for slot in d.iter_mut().rev() {
            *slot = idx % p;
            idx /= p;
        }
        d
    };
    let best = (0..total.div_ceil(ML_CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * ML_CHUNK;
            let end = total.min(start + ML_CHUNK);
            let mut digits = decode(start);
            let s0 = ModVector::new(digits.clone(), p);
            let mut res: Vec<u64> = samples.iter().map(|x| (x.b + p - x.a.dot(&s0)) % p).collect();
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for idx in start..end {
                let v: f64 = res.iter().map(|&r| score[r as usize]).sum();
                best = better(best, (v, idx));
                if idx + 1 == end {
                    break;
                }
                // odometer step; a wrap subtracts p * a_ij, which is zero mod p
                let mut j = n - 1;
                loop {
                    digits[j] += 1;
                    for (r, &a) in res.iter_mut().zip(&cols[j]) {
                        *r = (*r + p - a) % p;
                    }
                    if digits[j] < p {
                        break;
                    }
                    digits[j] = 0;
                    j -= 1;
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), better);
    Ok((ModVector::new(decode(best.1), p), best.0))
}

/// Maximum-likelihood secret under error law `chi`.
pub fn solve_ml(samples: &[DiscreteSample], chi: &DiscretePmf) -> Result<ModVector> {
    let n = samples.first().map_or(0, |x| x.a.len());
    ml_search(samples, n, chi.modulus(), &chi.log_likelihoods(ML_FLOOR)).map(|(s, _)| s)
}

#[derive(Clone, Debug)]
pub struct MlSolver {
    pub chi: DiscretePmf,
    pub samples: usize,
}

impl MlSolver {
    pub fn new(chi: DiscretePmf, samples: usize) -> Self {
        Self { chi, samples }
    }
}

impl Solver<u64> for MlSolver {
    fn budget(&self) -> usize {
        self.samples
    }

    fn solve(&self, stream: &mut dyn SampleStream<u64>, _rng: &mut dyn RngCore) -> Result<ModVector> {
        if stream.modulus() != self.chi.modulus() {
            return Err(Error::Domain("error law and stream use different moduli".into()));
        }
        let n = stream.dim();
        let samples = take(stream, self.samples)?;
        ml_search(&samples, n, self.chi.modulus(), &self.chi.log_likelihoods(ML_FLOOR)).map(|(s, _)| s)
    }
}

/// Generalised likelihood-ratio test of `A_{s,chi}` (unknown `s`) against
/// `U`: accepts when `max_s' sum_i log(p chi(b_i - <a_i, s'>))` exceeds
/// `threshold`, by default `n ln p`.
#[derive(Clone, Debug)]
pub struct LikelihoodDistinguisher {
    pub chi: DiscretePmf,
    pub samples: usize,
    pub threshold: Option<f64>,
}

impl LikelihoodDistinguisher {
    pub fn new(chi: DiscretePmf, samples: usize) -> Self {
        Self {
            chi,
            samples,
            threshold: None,
        }
    }

    pub fn statistic(&self, samples: &[DiscreteSample], n: usize) -> Result<f64> {
        let p = self.chi.modulus();
        let ln_p = (p as f64).ln();
        let score: Vec<f64> = self.chi.log_likelihoods(ML_FLOOR).iter().map(|l| l + ln_p).collect();
        ml_search(samples, n, p, &score).map(|(_, v)| v)
    }
}

impl Distinguisher<u64> for LikelihoodDistinguisher {
    fn budget(&self) -> usize {
        self.samples
    }

    fn accepts(&self, stream: &mut dyn SampleStream<u64>, _rng: &mut dyn RngCore) -> Result<bool> {
        let n = stream.dim();
        let samples = take(stream, self.samples)?;
        let threshold = self.threshold.unwrap_or(n as f64 * (self.chi.modulus() as f64).ln());
        Ok(self.statistic(&samples, n)? > threshold)
    }
}

fn require_binary(p: u64) -> Result<()> {
    if p == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedModulus(p))
    }
}

fn require_word(n: usize) -> Result<()> {
    if n == 0 || n > 64 {
        return Err(Error::Domain(format!("binary solvers need 1 <= n <= 64, got {n}")));
    }
    Ok(())
}

fn pack(a: &ModVector) -> u64 {
    a.entries().iter().enumerate().fold(0, |acc, (i, &x)| acc | ((x & 1) << i))
}

/// One elimination: the bit recovered for `e_j` and the number of equations
/// XORed together to get it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussTrial {
    pub bit: u64,
    pub support: usize,
}

/// Writes `e_j` as a sum of rows of `rows` over GF(2); returns the chosen
/// row indices.
pub fn express_unit(rows: &[u64], n: usize, j: usize) -> Option<Vec<usize>> {
    let words = rows.len().div_ceil(64).max(1);
    let mut basis: Vec<(u64, Vec<u64>)> = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        let mut tag = vec![0u64; words];
        tag[i / 64] |= 1 << (i % 64);
        let mut v = r;
        for (b, t) in &basis {
            if v & (1 << b.trailing_zeros()) != 0 {
                v ^= b;
                tag.iter_mut().zip(t).for_each(|(x, y)| *x ^= y);
            }
        }
        if v != 0 {
            let pivot = 1u64 << v.trailing_zeros();
            for (b, t) in basis.iter_mut() {
                if *b & pivot != 0 {
                    *b ^= v;
                    t.iter_mut().zip(&tag).for_each(|(x, y)| *x ^= y);
                }
            }
            basis.push((v, tag));
        }
        if basis.len() == n {
            break;
        }
    }
    let mut target = 1u64 << j;
    let mut comb = vec![0u64; words];
    for (b, t) in &basis {
        if target & (1 << b.trailing_zeros()) != 0 {
            target ^= b;
            comb.iter_mut().zip(t).for_each(|(x, y)| *x ^= y);
        }
    }
    (target == 0).then(|| (0..rows.len()).filter(|&i| comb[i / 64] >> (i % 64) & 1 == 1).collect())
}

/// Draws batches of `batch` equations until one spans `e_j`, then XORs the
/// right-hand sides of the equations used.
pub fn gauss_trial(
    stream: &mut dyn SampleStream<u64>,
    j: usize,
    batch: usize,
    max_retries: usize,
) -> Result<GaussTrial> {
    require_binary(stream.modulus())?;
    let n = stream.dim();
    require_word(n)?;
    if j >= n {
        return Err(Error::Domain(format!("coordinate {j} out of range for n = {n}")));
    }
    for _ in 0..=max_retries {
        let samples = take(stream, batch)?;
        let rows: Vec<u64> = samples.iter().map(|x| pack(&x.a)).collect();
        if let Some(set) = express_unit(&rows, n, j) {
            let bit = set.iter().fold(0, |acc, &i| acc ^ samples[i].b);
            return Ok(GaussTrial { bit, support: set.len() });
        }
    }
    Err(Error::NotFound(format!("e_{j} not in the span of {} fresh batches", max_retries + 1)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussMajority {
    pub bit: u64,
    pub trials: Vec<GaussTrial>,
}

/// Bias of the XOR of `support` independent Bernoulli(`eps`) errors being 0.
pub fn xor_success_probability(eps: f64, support: usize) -> f64 {
    0.5 + 0.5 * (1.0 - 2.0 * eps).powi(support as i32)
}

/// Majority vote over `repetitions` eliminations for coordinate `j`.
pub fn solve_gauss_majority(
    stream: &mut dyn SampleStream<u64>,
    j: usize,
    repetitions: usize,
    batch: usize,
    max_retries: usize,
) -> Result<GaussMajority> {
    let trials = (0..repetitions)
        .map(|_| gauss_trial(stream, j, batch, max_retries))
        .collect::<Result<Vec<_>>>()?;
    let ones = trials.iter().filter(|t| t.bit == 1).count();
    Ok(GaussMajority {
        bit: u64::from(2 * ones > trials.len()),
        trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussSolver {
    pub n: usize,
    pub repetitions: usize,
    pub batch: usize,
    pub max_retries: usize,
}

impl GaussSolver {
    pub fn new(n: usize, repetitions: usize) -> Self {
        Self {
            n,
            repetitions,
            batch: n + 8,
            max_retries: 16,
        }
    }
}

impl Solver<u64> for GaussSolver {
    fn budget(&self) -> usize {
        self.n * self.repetitions * self.batch * (self.max_retries + 1)
    }

    fn solve(&self, stream: &mut dyn SampleStream<u64>, _rng: &mut dyn RngCore) -> Result<ModVector> {
        let bits = (0..stream.dim())
            .map(|j| solve_gauss_majority(stream, j, self.repetitions, self.batch, self.max_retries).map(|m| m.bit))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModVector::new(bits, 2))
    }
}

/// Blocking for BKW on `n` bits: `a = ceil(n / b)` blocks of `b` bits (the
/// last possibly shorter). `budget` samples are split evenly over the `a`
/// target rotations and the `repetitions` per rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BkwParams {
    pub n: usize,
    pub b: usize,
    pub budget: usize,
    pub repetitions: usize,
}

impl BkwParams {
    pub fn new(n: usize, b: usize, budget: usize) -> Result<Self> {
        let out = Self {
            n,
            b,
            budget,
            repetitions: 1,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn with_repetitions(mut self, repetitions: usize) -> Result<Self> {
        self.repetitions = repetitions;
        self.validate()?;
        Ok(self)
    }

    pub fn rounds(&self) -> usize {
        self.n.div_ceil(self.b)
    }

    /// Samples fed into one reduction pass.
    pub fn per_pass(&self) -> usize {
        self.budget / (self.rounds() * self.repetitions)
    }

    fn validate(&self) -> Result<()> {
        require_word(self.n)?;
        if self.b == 0 || self.b > 20 || self.repetitions == 0 {
            return Err(Error::Config("need 1 <= b <= 20 and at least one repetition".into()));
        }
        // the tables hold 2^b - 1 equations per eliminated block
        let tables = (self.rounds() - 1) * ((1usize << self.b) - 1);
        if self.per_pass() <= tables {
            return Err(Error::Budget(format!(
                "{} samples per pass cannot fill {tables} table slots",
                self.per_pass()
            )));
        }
        Ok(())
    }

    fn block_mask(&self, k: usize) -> u64 {
        let lo = k * self.b;
        let hi = (lo + self.b).min(self.n);
        (lo..hi).fold(0, |m, i| m | (1 << i))
    }
}

/// Eliminates every block except `target`, pairing equations that agree on
/// the current block. Each surviving equation is the XOR of at most
/// `2^(a-1)` inputs.
pub fn bkw_reduce(equations: Vec<(u64, u64)>, params: &BkwParams, target: usize) -> Vec<(u64, u64)> {
    let mut current = equations;
    for k in (0..params.rounds()).filter(|&k| k != target) {
        let mask = params.block_mask(k);
        let mut table: HashMap<u64, (u64, u64)> = HashMap::new();
        let mut next = Vec::with_capacity(current.len() / 2 + 1);
        for (a, b) in current {
            let key = a & mask;
            if key == 0 {
                next.push((a, b));
            } else if let Some((a2, b2)) = table.remove(&key) {
                next.push((a ^ a2, b ^ b2));
            } else {
                table.insert(key, (a, b));
            }
        }
        current = next;
    }
    current
}

/// Most-agreeing assignment of the `target` block, smallest on ties.
pub fn bkw_decode(equations: &[(u64, u64)], params: &BkwParams, target: usize) -> u64 {
    let shift = target * params.b;
    let width = (params.block_mask(target) >> shift).count_ones();
    let mut best = (0usize, 0u64);
    for cand in 0..(1u64 << width) {
        let s = cand << shift;
        let agree = equations
            .iter()
            .filter(|(a, b)| u64::from((a & s).count_ones() & 1) == *b)
            .count();
        if agree > best.0 {
            best = (agree, s);
        }
    }
    best.1
}

/// BKW over `p = 2`: each block in turn is the target of a reduction pass
/// on fresh samples and is decoded by exhaustive likelihood, with a
/// per-bit majority across repetitions.
pub fn solve_bkw(stream: &mut dyn SampleStream<u64>, params: &BkwParams) -> Result<ModVector> {
    require_binary(stream.modulus())?;
    if stream.dim() != params.n {
        return Err(Error::Domain(format!("stream has n = {}, params n = {}", stream.dim(), params.n)));
    }
    params.validate()?;
    let mut secret = 0u64;
    for target in 0..params.rounds() {
        let mask = params.block_mask(target);
        let mut votes = vec![0usize; params.n];
        for _ in 0..params.repetitions {
            let eqs: Vec<(u64, u64)> = take(stream, params.per_pass())?
                .iter()
                .map(|x| (pack(&x.a), x.b & 1))
                .collect();
            let reduced: Vec<(u64, u64)> = bkw_reduce(eqs, params, target)
                .into_iter()
                .filter(|(a, _)| a & mask != 0)
                .collect();
            if reduced.is_empty() {
                return Err(Error::Budget(format!("no equations survived reduction for block {target}")));
            }
            let block = bkw_decode(&reduced, params, target);
            for (i, v) in votes.iter_mut().enumerate() {
                *v += (block >> i & 1) as usize;
            }
        }
        for (i, &v) in votes.iter().enumerate() {
            if mask >> i & 1 == 1 && 2 * v > params.repetitions {
                secret |= 1 << i;
            }
        }
    }
    Ok(ModVector::new((0..params.n).map(|i| secret >> i & 1).collect(), 2))
}

#[derive(Clone, Copy, Debug)]
pub struct BkwSolver {
    pub params: BkwParams,
}

impl Solver<u64> for BkwSolver {
    fn budget(&self) -> usize {
        self.params.per_pass() * self.params.rounds() * self.params.repetitions
    }

    fn solve(&self, stream: &mut dyn SampleStream<u64>, _rng: &mut dyn RngCore) -> Result<ModVector> {
        solve_bkw(stream, &self.params)
    }
}

/// Fraction of `trials` LPN instances (`n`, noise rate `eps`) that BKW
/// solves exactly with the given parameters; running out of samples counts
/// as a failure. Trials run in parallel on
/// independent streams of `seed`.
pub fn bkw_success_rate(params: &BkwParams, eps: f64, trials: usize, seed: u64) -> Result<f64> {
    let chi = DiscretePmf::bernoulli(eps)?;
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "bkw", t);
            let s = ModVector::random(params.n, 2, &mut r);
            let mut o = DiscreteOracle::with_noise(params.n, 2, &chi, Some(s.clone()), r.next_u64())?;
            match solve_bkw(&mut o, params) {
                Ok(got) => Ok(u64::from(got == s)),
                Err(Error::Budget(_)) => Ok(0),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(hits.iter().sum::<u64>() as f64 / trials.max(1) as f64)
}

/// Smallest budget on `grid` reaching success rate `target`, if any.
pub fn bkw_min_budget(
    n: usize,
    b: usize,
    eps: f64,
    grid: &[usize],
    target: f64,
    trials: usize,
    seed: u64,
) -> Result<Option<usize>> {
    for &budget in grid {
        let Ok(params) = BkwParams::new(n, b, budget) else {
            continue;
        };
        if bkw_success_rate(&params, eps, trials, seed)? >= target {
            return Ok(Some(budget));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::discretized_psi;
    use crate::lwe::{Budgeted, VecStream};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn oracle(n: usize, p: u64, chi: &DiscretePmf, r: &mut ChaCha20Rng) -> (ModVector, DiscreteOracle) {
        let s = ModVector::random(n, p, r);
        let o = DiscreteOracle::with_noise(n, p, chi, Some(s.clone()), r.next_u64()).unwrap();
        (s, o)
    }

    /// Plain reference for the ML argmax.
    fn brute_ml(samples: &[DiscreteSample], n: usize, p: u64, chi: &DiscretePmf) -> ModVector {
        let ll = chi.log_likelihoods(ML_FLOOR);
        let mut best: Option<(f64, ModVector)> = None;
        for idx in 0..p.pow(n as u32) {
            let mut d = vec![0; n];
            let mut x = idx;
            for slot in d.iter_mut().rev() {
                *slot = x % p;
                x /= p;
            }
            let s = ModVector::new(d, p);
            let v: f64 = samples.iter().map(|e| ll[((e.b + p - e.a.dot(&s)) % p) as usize]).sum();
            if best.as_ref().is_none_or(|(bv, _)| v > bv + ML_TIE_TOLERANCE) {
                best = Some((v, s));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn ml_noiseless_and_matches_reference() {
        let mut r = ChaCha20Rng::seed_from_u64(1);
        let exact = DiscretePmf::point_mass(7, 0);
        let (s, mut o) = oracle(3, 7, &exact, &mut r);
        assert_eq!(solve_ml(&take(&mut o, 10).unwrap(), &exact).unwrap(), s);
        let chi = discretized_psi(0.3, 7).unwrap();
        for _ in 0..5 {
            let (_, mut o) = oracle(3, 7, &chi, &mut r);
            let samples = take(&mut o, 12).unwrap();
            assert_eq!(solve_ml(&samples, &chi).unwrap(), brute_ml(&samples, 3, 7, &chi));
        }
    }

    #[test]
    fn ml_ties_are_lexicographic() {
        // no samples: every candidate scores 0
        let chi = DiscretePmf::uniform(5);
        let (s, v) = ml_search(&[], 3, 5, &chi.log_likelihoods(ML_FLOOR)).unwrap();
        assert_eq!(s, ModVector::zero(3, 5));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ml_guard_limits() {
        assert!(ml_guard(16, 2).is_ok());
        assert!(ml_guard(17, 2).is_err());
        assert!(ml_guard(10, 5).is_ok());
        assert!(ml_guard(11, 5).is_err());
    }

    #[test]
    fn ml_parity_with_noise() {
        let chi = DiscretePmf::bernoulli(0.1).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(2);
        let ok = (0..100)
            .filter(|_| {
                let (s, mut o) = oracle(10, 2, &chi, &mut r);
                solve_ml(&take(&mut o, 200).unwrap(), &chi).unwrap() == s
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn ml_small_modulus_gaussian() {
        let chi = discretized_psi(0.05, 5).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(3);
        let solver = MlSolver::new(chi.clone(), 100);
        let ok = (0..100)
            .filter(|_| {
                let (s, o) = oracle(4, 5, &chi, &mut r);
                let mut metered = Budgeted::new(o, solver.budget());
                solver.solve(&mut metered, &mut ChaCha20Rng::seed_from_u64(0)).unwrap() == s
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn likelihood_distinguisher_separates() {
        let chi = discretized_psi(0.05, 5).unwrap();
        let d = LikelihoodDistinguisher::new(chi.clone(), 16);
        let mut r = ChaCha20Rng::seed_from_u64(4);
        for t in 0..50 {
            let (_, mut o) = oracle(3, 5, &chi, &mut r);
            assert!(d.accepts(&mut o, &mut r).unwrap());
            let mut u = DiscreteOracle::uniform(3, 5, t);
            assert!(!d.accepts(&mut u, &mut r).unwrap());
        }
    }

    #[test]
    fn express_unit_finds_valid_subsets() {
        let mut r = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rows: Vec<u64> = (0..12).map(|_| r.next_u64() & 0xff).collect();
            for j in 0..8 {
                if let Some(set) = express_unit(&rows, 8, j) {
                    assert_eq!(set.iter().fold(0, |acc, &i| acc ^ rows[i]), 1 << j);
                }
            }
        }
        assert_eq!(express_unit(&[0b01, 0b01], 2, 1), None);
    }

    #[test]
    fn gauss_noiseless_single_repetition() {
        let mut r = ChaCha20Rng::seed_from_u64(6);
        let (s, mut o) = oracle(8, 2, &DiscretePmf::point_mass(2, 0), &mut r);
        let solver = GaussSolver::new(8, 1);
        assert_eq!(solver.solve(&mut o, &mut r).unwrap(), s);
    }

    #[test]
    fn gauss_majority_with_noise() {
        let chi = DiscretePmf::bernoulli(0.05).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(7);
        let ok = (0..100)
            .filter(|&t| {
                let (s, mut o) = oracle(8, 2, &chi, &mut r);
                let j = t % 8;
                solve_gauss_majority(&mut o, j, 201, 16, 16).unwrap().bit == s.entries()[j]
            })
            .count();
        assert!(ok >= 90, "{ok}");
    }

    #[test]
    fn gauss_single_trial_bias_matches_closed_form() {
        let eps = 0.1;
        let chi = DiscretePmf::bernoulli(eps).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(8);
        let mut predicted = 0.0;
        let mut hits = 0;
        let trials = 4000;
        let mut support = 0;
        for _ in 0..trials {
            let (s, mut o) = oracle(16, 2, &chi, &mut r);
            let t = gauss_trial(&mut o, 0, 16, 64).unwrap();
            predicted += xor_success_probability(eps, t.support);
            support += t.support;
            hits += usize::from(t.bit == s.entries()[0]);
        }
        let measured = hits as f64 / trials as f64;
        assert!((measured - predicted / trials as f64).abs() < 0.05);
        // a square batch needs about n/2 rows, and the bias is already small
        assert!((support as f64 / trials as f64 - 8.0).abs() < 1.5);
        assert!(measured < 0.65);
    }

    #[test]
    fn gauss_rejects_other_moduli() {
        let mut o = DiscreteOracle::uniform(3, 3, 1);
        assert!(matches!(gauss_trial(&mut o, 0, 4, 1), Err(Error::UnsupportedModulus(3))));
    }

    #[test]
    fn bkw_reduce_tracks_xors() {
        let params = BkwParams::new(8, 4, 4096).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(9);
        let eqs: Vec<(u64, u64)> = (0..1024).map(|_| (r.next_u64() & 0xff, 0)).collect();
        let out = bkw_reduce(eqs, &params, 1);
        assert!(out.iter().all(|(a, _)| a & 0x0f == 0));
        assert!(out.len() > 400);
    }

    #[test]
    fn bkw_noiseless_exact() {
        let mut r = ChaCha20Rng::seed_from_u64(10);
        for (n, b) in [(8, 4), (10, 3), (12, 6), (5, 5)] {
            let params = BkwParams::new(n, b, 1 << 12).unwrap();
            let (s, mut o) = oracle(n, 2, &DiscretePmf::point_mass(2, 0), &mut r);
            assert_eq!(solve_bkw(&mut o, &params).unwrap(), s);
        }
    }

    #[test]
    fn bkw_budget_errors() {
        assert!(matches!(BkwParams::new(16, 4, 40), Err(Error::Budget(_))));
        let params = BkwParams::new(8, 4, 64).unwrap();
        let s = ModVector::zero(8, 2);
        let samples = take(&mut DiscreteOracle::with_noise(8, 2, &DiscretePmf::point_mass(2, 0), Some(s), 1).unwrap(), 10)
            .unwrap();
        let mut short = VecStream::new(8, 2, samples);
        assert!(matches!(solve_bkw(&mut short, &params), Err(Error::Budget(_))));
    }

    #[test]
    fn bkw_recovers_lpn_secret() {
        let params = BkwParams::new(16, 4, 1 << 16).unwrap();
        assert!(bkw_success_rate(&params, 0.1, 40, 11).unwrap() >= 0.9);
    }
}
