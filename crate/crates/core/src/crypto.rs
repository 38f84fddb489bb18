//! Public-key encryption of single bits from LWE, with parameter
//! generation, Monte Carlo correctness estimates, the subset-sum uniformity
//! check, and a harness that turns a ciphertext distinguisher into an LWE
//! distinguisher.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{discretized_psi, DiscretePmf, PmfSampler};
use crate::lwe::{take, DiscreteOracle, DiscreteSample, Distinguisher, SampleStream};
use crate::modring::{centered_abs, is_prime, next_prime, ModVector};
use crate::rng;

pub const DEFAULT_EPS_M: f64 = 0.1;
/// Cap on `p^(n+1) 2^l` for exact subset-sum enumeration.
pub const MAX_LEFTOVER_WORK: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyMode {
    /// The public key carries every `a_i`.
    #[default]
    Full,
    /// The `a_i` come from a seed shared by all users; keys store only `b_i`.
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CryptoParams {
    pub n: usize,
    pub p: u64,
    pub m: usize,
    pub alpha: f64,
    pub eps: f64,
    #[serde(default)]
    pub mode: KeyMode,
}

/// `log_2` is used for both `m` and `alpha`.
pub fn gen_params(n: usize, eps: f64) -> Result<CryptoParams> {
    if n < 4 {
        return Err(Error::Domain(format!("need n >= 4, got {n}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let n2 = (n * n) as u64;
    let p = next_prime(n2);
    debug_assert!(p <= 2 * n2);
    let log_p = (p as f64).log2();
    let m = ((1.0 + eps) * (n as f64 + 1.0) * log_p).ceil() as usize;
    let log_n = (n as f64).log2();
    let alpha = 1.0 / ((n as f64).sqrt() * log_n * log_n);
    Ok(CryptoParams {
        n,
        p,
        m,
        alpha,
        eps,
        mode: KeyMode::Full,
    })
}

impl CryptoParams {
    /// Arbitrary parameters for experiments; only structural checks apply.
    pub fn custom(n: usize, p: u64, m: usize, alpha: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Domain("n and m must be positive".into()));
        }
        if !is_prime(p) || p >= crate::modring::MAX_MODULUS {
            return Err(Error::UnsupportedModulus(p));
        }
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            n,
            p,
            m,
            alpha,
            eps: DEFAULT_EPS_M,
            mode: KeyMode::Full,
        })
    }

    pub fn with_mode(mut self, mode: KeyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn half(&self) -> u64 {
        self.p / 2
    }

    /// `bar-Psi_alpha` on `Z_p`.
    pub fn noise(&self) -> Result<DiscretePmf> {
        discretized_psi(self.alpha, self.p)
    }
}

fn expand_crs(seed: u64, n: usize, p: u64, m: usize) -> Vec<ModVector> {
    let mut r = rng::stream(seed, "crs", 0);
    (0..m).map(|_| ModVector::random(n, p, &mut r)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateKey {
    pub params: CryptoParams,
    pub s: Vec<u64>,
}

impl PrivateKey {
    pub fn secret(&self) -> ModVector {
        ModVector::new(self.s.clone(), self.params.p)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PublicKeyFile {
    params: CryptoParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crs_seed: Option<String>,
    b: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PublicKeyFile", into = "PublicKeyFile")]
pub struct PublicKey {
    params: CryptoParams,
    a: Vec<ModVector>,
    b: Vec<u64>,
    crs_seed: Option<u64>,
}

impl TryFrom<PublicKeyFile> for PublicKey {
    type Error = Error;

    fn try_from(f: PublicKeyFile) -> Result<Self> {
        let CryptoParams { n, p, m, .. } = f.params;
        let (a, crs_seed) = match (f.a, f.crs_seed) {
            (Some(rows), None) => (rows.into_iter().map(|r| ModVector::new(r, p)).collect::<Vec<_>>(), None),
            (None, Some(hex_seed)) => {
                let bytes: [u8; 8] = hex::decode(&hex_seed)
                    .ok()
                    .and_then(|v| v.try_into().ok())
                    .ok_or_else(|| Error::Config(format!("crs_seed must be 16 hex digits, got {hex_seed:?}")))?;
                let seed = u64::from_be_bytes(bytes);
                (expand_crs(seed, n, p, m), Some(seed))
            }
            _ => return Err(Error::Config("public key needs exactly one of \"a\" and \"crs_seed\"".into())),
        };
        if a.len() != m || f.b.len() != m || a.iter().any(|v| v.len() != n) {
            return Err(Error::Config(format!("public key does not have m = {m} rows of length n = {n}")));
        }
        if a.iter().any(|v| v.entries().iter().any(|&x| x >= p)) || f.b.iter().any(|&x| x >= p) {
            return Err(Error::Config("public key residue out of range".into()));
        }
        Ok(Self {
            params: f.params,
            a,
            b: f.b,
            crs_seed,
        })
    }
}

impl From<PublicKey> for PublicKeyFile {
    fn from(k: PublicKey) -> Self {
        let (a, crs_seed) = match k.crs_seed {
            Some(seed) => (None, Some(hex::encode(seed.to_be_bytes()))),
            None => (Some(k.a.iter().map(|v| v.entries().to_vec()).collect()), None),
        };
        Self {
            params: k.params,
            a,
            crs_seed,
            b: k.b,
        }
    }
}

impl PublicKey {
    /// A full-mode key made of `m` given LWE samples.
    pub fn from_samples(params: &CryptoParams, samples: Vec<DiscreteSample>) -> Result<Self> {
        if samples.len() != params.m {
            return Err(Error::Domain(format!("need m = {} samples, got {}", params.m, samples.len())));
        }
        let (a, b) = samples.into_iter().map(|x| (x.a, x.b)).unzip();
        Ok(Self {
            params: CryptoParams {
                mode: KeyMode::Full,
                ..*params
            },
            a,
            b,
            crs_seed: None,
        })
    }

    pub fn params(&self) -> &CryptoParams {
        &self.params
    }

    pub fn a(&self) -> &[ModVector] {
        &self.a
    }

    pub fn b(&self) -> &[u64] {
        &self.b
    }

    pub fn crs_seed(&self) -> Option<u64> {
        self.crs_seed
    }

    /// Residues that must be stored: `m(n+1)`, or `m` in shared mode.
    pub fn stored_residues(&self) -> usize {
        match self.crs_seed {
            Some(_) => self.params.m,
            None => self.params.m * (self.params.n + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub a: Vec<u64>,
    pub b: u64,
}

pub fn keygen<R: Rng + ?Sized>(params: &CryptoParams, crs_seed: Option<u64>, rng: &mut R) -> Result<(PrivateKey, PublicKey)> {
    keygen_with_noise(params, crs_seed, &params.noise()?, rng)
}

/// Key generation with the errors `e_i` drawn from `chi` instead of
/// `bar-Psi_alpha`.
pub fn keygen_with_noise<R: Rng + ?Sized>(
    params: &CryptoParams,
    crs_seed: Option<u64>,
    chi: &DiscretePmf,
    rng: &mut R,
) -> Result<(PrivateKey, PublicKey)> {
    let CryptoParams { n, p, m, mode, .. } = *params;
    if chi.modulus() != p {
        return Err(Error::Domain("noise modulus differs from p".into()));
    }
    let a = match (mode, crs_seed) {
        (KeyMode::Shared, Some(seed)) => expand_crs(seed, n, p, m),
        (KeyMode::Shared, None) => return Err(Error::Config("shared mode needs a CRS seed".into())),
        (KeyMode::Full, Some(_)) => return Err(Error::Config("a CRS seed is only used in shared mode".into())),
        (KeyMode::Full, None) => (0..m).map(|_| ModVector::random(n, p, rng)).collect(),
    };
    let s = ModVector::random(n, p, rng);
    let noise = PmfSampler::new(chi);
    let b = a.iter().map(|ai| (ai.dot(&s) + noise.sample(rng)) % p).collect();
    Ok((
        PrivateKey {
            params: *params,
            s: s.entries().to_vec(),
        },
        PublicKey {
            params: *params,
            a,
            b,
            crs_seed,
        },
    ))
}

/// A uniformly random subset of `[m]`.
pub fn random_subset<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<usize> {
    (0..m).filter(|_| rng.random::<bool>()).collect()
}

pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, bit: u8, rng: &mut R) -> Result<Ciphertext> {
    let subset = random_subset(pk.params.m, rng);
    encrypt_with_subset(pk, bit, &subset)
}

/// `(sum_S a_i, bit floor(p/2) + sum_S b_i)`.
pub fn encrypt_with_subset(pk: &PublicKey, bit: u8, subset: &[usize]) -> Result<Ciphertext> {
    if bit > 1 {
        return Err(Error::Domain(format!("message must be a bit, got {bit}")));
    }
    let CryptoParams { n, p, m, .. } = pk.params;
    let mut a = ModVector::zero(n, p);
    let mut b = u64::from(bit) * pk.params.half();
    for &i in subset {
        if i >= m {
            return Err(Error::Domain(format!("subset index {i} out of range for m = {m}")));
        }
        a = a.add(&pk.a[i]);
        b = (b + pk.b[i]) % p;
    }
    Ok(Ciphertext {
        a: a.entries().to_vec(),
        b,
    })
}

/// `b - <a, s>` mod `p`.
pub fn phase(sk: &PrivateKey, ct: &Ciphertext) -> Result<u64> {
    let p = sk.params.p;
    if ct.a.len() != sk.s.len() || ct.a.iter().any(|&x| x >= p) || ct.b >= p {
        return Err(Error::Domain("ciphertext does not match the key".into()));
    }
    let a = ModVector::new(ct.a.clone(), p);
    Ok((ct.b + p - a.dot(&sk.secret())) % p)
}

/// 0 when the phase is strictly closer to 0 than to `floor(p/2)`, else 1.
pub fn decrypt(sk: &PrivateKey, ct: &Ciphertext) -> Result<u8> {
    let p = sk.params.p;
    let d = phase(sk, ct)?;
    let to_zero = centered_abs(d, p);
    let to_half = centered_abs((d + p - sk.params.half()) % p, p);
    Ok(u8::from(to_zero >= to_half))
}

pub fn encrypt_bits<R: Rng + ?Sized>(pk: &PublicKey, bits: &[u8], rng: &mut R) -> Result<Vec<Ciphertext>> {
    bits.iter().map(|&b| encrypt(pk, b, rng)).collect()
}

pub fn decrypt_bits(sk: &PrivateKey, cts: &[Ciphertext]) -> Result<Vec<u8>> {
    cts.iter().map(|c| decrypt(sk, c)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DecryptionStats {
    pub trials: usize,
    pub errors: usize,
    pub rate: f64,
    /// Errors although the accumulated noise was below `floor(p/2)/2`;
    /// always 0 for a correct implementation.
    pub violations: usize,
}

pub fn estimate_decryption_error(params: &CryptoParams, trials: usize, seed: u64) -> Result<DecryptionStats> {
    estimate_decryption_error_with(params, &params.noise()?, trials, seed)
}

/// Round trips of a random bit under fresh keys, with key errors from `chi`.
pub fn estimate_decryption_error_with(
    params: &CryptoParams,
    chi: &DiscretePmf,
    trials: usize,
    seed: u64,
) -> Result<DecryptionStats> {
    let quarter = params.half() as f64 / 2.0;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "correctness", t);
            let crs = (params.mode == KeyMode::Shared).then(|| r.next_u64());
            let (sk, pk) = keygen_with_noise(params, crs, chi, &mut r)?;
            let bit = r.random_range(0..2u8);
            let ct = encrypt(&pk, bit, &mut r)?;
            let wrong = decrypt(&sk, &ct)? != bit;
            let err = (phase(&sk, &ct)? + params.p - u64::from(bit) * params.half()) % params.p;
            let small = (centered_abs(err, params.p) as f64) < quarter;
            Ok((wrong, wrong && small))
        })
        .collect::<Result<Vec<_>>>()?;
    let errors = outcomes.iter().filter(|o| o.0).count();
    Ok(DecryptionStats {
        trials,
        errors,
        rate: errors as f64 / trials.max(1) as f64,
        violations: outcomes.iter().filter(|o| o.1).count(),
    })
}

/// Counts of each subset sum of `g` in `Z_p^k`, indexed base `p`, by
/// visiting all `2^l` subsets in Gray-code order.
pub fn subset_sum_counts(g: &[Vec<u64>], p: u64) -> Result<Vec<u64>> {
    let k = g.first().map_or(0, Vec::len);
    let cells = (p as f64).powi(k as i32);
    let work = cells * 2f64.powi(g.len() as i32);
    if work > MAX_LEFTOVER_WORK || g.len() >= 63 {
        return Err(Error::ResourceLimit(format!("subset-sum enumeration needs {work:.3e} steps")));
    }
    if g.iter().any(|x| x.len() != k || x.iter().any(|&v| v >= p)) {
        return Err(Error::Domain("group elements must all lie in Z_p^k".into()));
    }
    let encode = |v: &[u64]| v.iter().fold(0usize, |acc, &x| acc * p as usize + x as usize);
    let mut counts = vec![0u64; cells as usize];
    let mut sum = vec![0u64; k];
    let mut included = 0u64;
    counts[0] += 1;
    for step in 1u64..(1 << g.len()) {
        let j = step.trailing_zeros() as usize;
        included ^= 1 << j;
        let adding = included >> j & 1 == 1;
        for (s, &x) in sum.iter_mut().zip(&g[j]) {
            *s = if adding { (*s + x) % p } else { (*s + p - x) % p };
        }
        counts[encode(&sum)] += 1;
    }
    Ok(counts)
}

/// L1 distance of a count vector from uniform.
fn distance_from_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let u = 1.0 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 / total as f64 - u).abs()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct LeftoverHash {
    pub distances: Vec<f64>,
    pub mean: f64,
    /// `sqrt(|G| / 2^l)`.
    pub bound: f64,
}

/// For `draws` random `l`-tuples in `G = Z_p^(n+1)`, the exact distance of
/// the subset-sum distribution from uniform.
pub fn subset_sum_distance(p: u64, n: usize, l: usize, draws: usize, seed: u64) -> Result<LeftoverHash> {
    let k = n + 1;
    let order = (p as f64).powi(k as i32);
    if order * 2f64.powi(l as i32) > MAX_LEFTOVER_WORK {
        return Err(Error::ResourceLimit(format!("|G| 2^l = {:.3e} exceeds the guard", order * 2f64.powi(l as i32))));
    }
    let distances = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "leftover", t);
            let g: Vec<Vec<u64>> = (0..l).map(|_| (0..k).map(|_| r.random_range(0..p)).collect()).collect();
            if l == 0 {
                let mut counts = vec![0u64; order as usize];
                counts[0] = 1;
                return Ok(distance_from_uniform(&counts));
            }
            Ok(distance_from_uniform(&subset_sum_counts(&g, p)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = distances.iter().sum::<f64>() / draws.max(1) as f64;
    Ok(LeftoverHash {
        distances,
        mean,
        bound: (order / 2f64.powi(l as i32)).sqrt(),
    })
}

/// Guesses something about a ciphertext given the public key.
pub trait CiphertextDistinguisher: Sync {
    fn accepts(&self, pk: &PublicKey, ct: &Ciphertext, rng: &mut dyn RngCore) -> bool;
}

impl<W: CiphertextDistinguisher + ?Sized> CiphertextDistinguisher for &W {
    fn accepts(&self, pk: &PublicKey, ct: &Ciphertext, rng: &mut dyn RngCore) -> bool {
        (**self).accepts(pk, ct, rng)
    }
}

/// Decrypts with a known key and accepts encryptions of 0.
#[derive(Clone, Debug)]
pub struct LeakedKeyDistinguisher {
    pub sk: PrivateKey,
}

impl CiphertextDistinguisher for LeakedKeyDistinguisher {
    fn accepts(&self, _pk: &PublicKey, ct: &Ciphertext, _rng: &mut dyn RngCore) -> bool {
        decrypt(&self.sk, ct).is_ok_and(|b| b == 0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CoinFlip;

impl CiphertextDistinguisher for CoinFlip {
    fn accepts(&self, _pk: &PublicKey, _ct: &Ciphertext, rng: &mut dyn RngCore) -> bool {
        rng.random::<bool>()
    }
}

/// Acceptance rates of `W` on encryptions of 0, of 1, and on uniform pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Calibration {
    pub p0: f64,
    pub p1: f64,
    pub pu: f64,
}

/// The distinguisher `Z` for `A_{s,chi}` versus `U` built from a
/// ciphertext distinguisher `W`: take `m` samples as a public key, estimate
/// how often `W'` accepts encryptions of 0 and uniform pairs under that key,
/// and accept when the estimates differ by more than `advantage / 16`.
/// `W'` is `W`, or `W` with `(p-1)/2` added to `b` when `W` separates
/// encryptions of 1 from uniform better than encryptions of 0.
#[derive(Clone, Debug)]
pub struct SecurityHarness<W> {
    pub w: W,
    pub params: CryptoParams,
    /// Assumed `|p_0(W) - p_1(W)|`; sets the precision and the threshold.
    pub advantage: f64,
    pub estimate_calls: usize,
    pub shift: bool,
}

impl<W: CiphertextDistinguisher> SecurityHarness<W> {
    /// Estimates get a standard error of about `advantage / 64`.
    pub fn new(w: W, params: CryptoParams, advantage: f64) -> Result<Self> {
        if !(advantage > 0.0 && advantage <= 1.0) {
            return Err(Error::Domain(format!("advantage must lie in (0, 1], got {advantage}")));
        }
        Ok(Self {
            w,
            params,
            advantage,
            estimate_calls: ((32.0 / advantage).powi(2)).ceil() as usize,
            shift: false,
        })
    }

    pub fn with_estimate_calls(mut self, calls: usize) -> Self {
        self.estimate_calls = calls.max(1);
        self
    }

    pub fn threshold(&self) -> f64 {
        self.advantage / 16.0
    }

    /// Estimates `p_0(W)`, `p_1(W)`, `p_u(W)` over `trials` fresh keys (with
    /// secret `secret` when given) and picks the variant of `W'`.
    pub fn calibrate(&mut self, trials: usize, secret: Option<&ModVector>, seed: u64) -> Result<Calibration> {
        let chi = self.params.noise()?;
        let hits = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::stream(seed, "calibrate", t);
                let pk = match secret {
                    Some(s) => {
                        let mut o = DiscreteOracle::with_noise(self.params.n, self.params.p, &chi, Some(s.clone()), r.next_u64())?;
                        PublicKey::from_samples(&self.params, take(&mut o, self.params.m)?)?
                    }
                    None => keygen_with_noise(&self.params, None, &chi, &mut r)?.1,
                };
                let c0 = encrypt(&pk, 0, &mut r)?;
                let c1 = encrypt(&pk, 1, &mut r)?;
                let cu = uniform_ciphertext(&self.params, &mut r);
                Ok([
                    self.w.accepts(&pk, &c0, &mut r),
                    self.w.accepts(&pk, &c1, &mut r),
                    self.w.accepts(&pk, &cu, &mut r),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        let rate = |k: usize| hits.iter().filter(|h| h[k]).count() as f64 / trials.max(1) as f64;
        let cal = Calibration {
            p0: rate(0),
            p1: rate(1),
            pu: rate(2),
        };
        self.shift = (cal.p1 - cal.pu).abs() > (cal.p0 - cal.pu).abs();
        Ok(cal)
    }

    pub fn w_prime_accepts(&self, pk: &PublicKey, ct: &Ciphertext, rng: &mut dyn RngCore) -> bool {
        if self.shift {
            let p = self.params.p;
            let shifted = Ciphertext {
                a: ct.a.clone(),
                b: (ct.b + (p - 1) / 2) % p,
            };
            self.w.accepts(pk, &shifted, rng)
        } else {
            self.w.accepts(pk, ct, rng)
        }
    }

    /// `(p_0(pk), p_u(pk))` estimated with `estimate_calls` calls each.
    pub fn estimates(&self, pk: &PublicKey, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
        let mut h0 = 0usize;
        let mut hu = 0usize;
        for _ in 0..self.estimate_calls {
            let c0 = encrypt(pk, 0, rng)?;
            h0 += usize::from(self.w_prime_accepts(pk, &c0, rng));
            let cu = uniform_ciphertext(&self.params, rng);
            hu += usize::from(self.w_prime_accepts(pk, &cu, rng));
        }
        let k = self.estimate_calls as f64;
        Ok((h0 as f64 / k, hu as f64 / k))
    }
}

impl<W: CiphertextDistinguisher> Distinguisher<u64> for SecurityHarness<W> {
    fn budget(&self) -> usize {
        self.params.m
    }

    fn accepts(&self, stream: &mut dyn SampleStream<u64>, rng: &mut dyn RngCore) -> Result<bool> {
        if stream.dim() != self.params.n || stream.modulus() != self.params.p {
            return Err(Error::Domain("sample stream does not match the parameters".into()));
        }
        let pk = PublicKey::from_samples(&self.params, take(stream, self.params.m)?)?;
        let (p0, pu) = self.estimates(&pk, rng)?;
        Ok((p0 - pu).abs() > self.threshold())
    }
}

pub fn uniform_ciphertext<R: Rng + ?Sized>(params: &CryptoParams, rng: &mut R) -> Ciphertext {
    Ciphertext {
        a: (0..params.n).map(|_| rng.random_range(0..params.p)).collect(),
        b: rng.random_range(0..params.p),
    }
}

/// Acceptance rates of `z` on `A_{s,chi}` and on `U` over `trials`
/// independent runs each.
pub fn acceptance_rates<D: Distinguisher<u64> + Sync>(
    z: &D,
    params: &CryptoParams,
    s: &ModVector,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let chi = params.noise()?;
    let runs = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "advantage", t);
            let mut a = DiscreteOracle::with_noise(params.n, params.p, &chi, Some(s.clone()), r.next_u64())?;
            let mut u = DiscreteOracle::uniform(params.n, params.p, r.next_u64());
            Ok((z.accepts(&mut a, &mut r)?, z.accepts(&mut u, &mut r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = trials.max(1) as f64;
    Ok((
        runs.iter().filter(|x| x.0).count() as f64 / k,
        runs.iter().filter(|x| x.1).count() as f64 / k,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{discretize_density, WrappedGaussian};
    use crate::stats::tv_counts_vs_probs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn default_parameters() {
        let p32 = gen_params(32, DEFAULT_EPS_M).unwrap();
        assert_eq!((p32.p, p32.m), (1031, 364));
        assert!((p32.alpha - 1.0 / (32f64.sqrt() * 25.0)).abs() < 1e-12);
        let p64 = gen_params(64, DEFAULT_EPS_M).unwrap();
        assert_eq!(p64.p, 4099);
        assert!((p64.alpha - 0.003472).abs() < 1e-6);
        for n in 4..80 {
            let q = gen_params(n, DEFAULT_EPS_M).unwrap();
            let n2 = (n * n) as u64;
            assert!(q.p >= n2 && q.p <= 2 * n2 && is_prime(q.p));
            assert!(q.m as f64 >= 1.1 * (n as f64 + 1.0) * (q.p as f64).log2());
        }
        assert!(gen_params(3, DEFAULT_EPS_M).is_err());
    }

    #[test]
    fn zero_noise_keys_and_empty_subset() {
        let params = gen_params(8, DEFAULT_EPS_M).unwrap();
        let (sk, pk) = keygen_with_noise(&params, None, &DiscretePmf::point_mass(params.p, 0), &mut rng(1)).unwrap();
        let s = sk.secret();
        for (a, &b) in pk.a().iter().zip(pk.b()) {
            assert_eq!(a.dot(&s), b);
        }
        let c0 = encrypt_with_subset(&pk, 0, &[]).unwrap();
        assert_eq!(c0, Ciphertext { a: vec![0; 8], b: 0 });
        let c1 = encrypt_with_subset(&pk, 1, &[]).unwrap();
        assert_eq!(c1.b, params.p / 2);
        assert_eq!(decrypt(&sk, &encrypt(&pk, 0, &mut rng(2)).unwrap()).unwrap(), 0);
        assert_eq!(decrypt(&sk, &encrypt(&pk, 1, &mut rng(3)).unwrap()).unwrap(), 1);
        assert!(encrypt_with_subset(&pk, 2, &[]).is_err());
    }

    #[test]
    fn key_errors_follow_discretized_psi() {
        let params = CryptoParams::custom(4, 11, 100_000, 0.2).unwrap();
        let (sk, pk) = keygen(&params, None, &mut rng(4)).unwrap();
        let s = sk.secret();
        let mut counts = vec![0u64; 11];
        for (a, &b) in pk.a().iter().zip(pk.b()) {
            counts[((b + 11 - a.dot(&s)) % 11) as usize] += 1;
        }
        let reference = discretize_density(&WrappedGaussian::new(0.2).unwrap(), 11);
        assert!(tv_counts_vs_probs(&counts, reference.probs()) < 0.02);
    }

    #[test]
    fn bookkeeping_identity_and_round_trip() {
        let params = gen_params(16, DEFAULT_EPS_M).unwrap();
        let mut r = rng(5);
        let (sk, pk) = keygen(&params, None, &mut r).unwrap();
        let s = sk.secret();
        let p = params.p;
        let e: Vec<u64> = pk.a().iter().zip(pk.b()).map(|(a, &b)| (b + p - a.dot(&s)) % p).collect();
        for t in 0..2000 {
            let bit = (t % 2) as u8;
            let subset = random_subset(params.m, &mut r);
            let ct = encrypt_with_subset(&pk, bit, &subset).unwrap();
            let err = (phase(&sk, &ct).unwrap() + p - u64::from(bit) * params.half()) % p;
            assert_eq!(err, subset.iter().map(|&i| e[i]).sum::<u64>() % p);
            if (centered_abs(err, p) as f64) < params.half() as f64 / 2.0 {
                assert_eq!(decrypt(&sk, &ct).unwrap(), bit);
            }
        }
    }

    #[test]
    fn decrypt_tie_goes_to_one() {
        let params = CryptoParams::custom(1, 5, 1, 0.1).unwrap();
        let sk = PrivateKey { params, s: vec![0] };
        // phase 1 is at distance 1 from both 0 and 2
        assert_eq!(decrypt(&sk, &Ciphertext { a: vec![0], b: 1 }).unwrap(), 1);
        assert_eq!(decrypt(&sk, &Ciphertext { a: vec![0], b: 4 }).unwrap(), 0);
    }

    #[test]
    fn error_sum_is_convolution_power() {
        let params = CryptoParams::custom(2, 31, 12, 0.05).unwrap();
        let chi = params.noise().unwrap();
        let k = 12;
        let mut r = rng(6);
        let sampler = PmfSampler::new(&chi);
        let mut counts = vec![0u64; 31];
        for _ in 0..100_000 {
            let sum: u64 = (0..k).map(|_| sampler.sample(&mut r)).sum::<u64>() % 31;
            counts[sum as usize] += 1;
        }
        assert!(tv_counts_vs_probs(&counts, chi.convolve_power(k).probs()) < 0.02);
    }

    #[test]
    fn shared_mode_keys() {
        let params = gen_params(8, DEFAULT_EPS_M).unwrap().with_mode(KeyMode::Shared);
        assert!(matches!(keygen(&params, None, &mut rng(7)), Err(Error::Config(_))));
        let (_, pk1) = keygen(&params, Some(42), &mut rng(8)).unwrap();
        let (_, pk2) = keygen(&params, Some(42), &mut rng(9)).unwrap();
        assert_eq!(pk1.a(), pk2.a());
        assert_ne!(pk1.b(), pk2.b());
        assert_eq!(pk1.stored_residues(), params.m);
        let full = gen_params(8, DEFAULT_EPS_M).unwrap();
        let (_, pk3) = keygen(&full, None, &mut rng(10)).unwrap();
        assert_eq!(pk3.stored_residues(), full.m * (full.n + 1));
    }

    #[test]
    fn key_files_round_trip() {
        let params = gen_params(6, DEFAULT_EPS_M).unwrap();
        let (sk, pk) = keygen(&params, None, &mut rng(11)).unwrap();
        let json = serde_json::to_string(&pk).unwrap();
        assert!(json.contains("\"a\""));
        assert_eq!(serde_json::from_str::<PublicKey>(&json).unwrap(), pk);
        let sk2: PrivateKey = serde_json::from_str(&serde_json::to_string(&sk).unwrap()).unwrap();
        assert_eq!(sk2, sk);
        let shared = params.with_mode(KeyMode::Shared);
        let (_, pk) = keygen(&shared, Some(0xdead_beef), &mut rng(12)).unwrap();
        let json = serde_json::to_string(&pk).unwrap();
        assert!(json.contains("\"crs_seed\":\"00000000deadbeef\"") && !json.contains("\"a\""));
        assert_eq!(serde_json::from_str::<PublicKey>(&json).unwrap(), pk);
        let v: serde_json::Value = serde_json::json!({"params": params, "b": [1, 2]});
        assert!(serde_json::from_value::<PublicKey>(v).is_err());
    }

    #[test]
    fn decryption_error_rates() {
        let params = gen_params(16, DEFAULT_EPS_M).unwrap();
        let ok = estimate_decryption_error(&params, 2000, 13).unwrap();
        assert!(ok.rate <= 0.01, "{ok:?}");
        assert_eq!(ok.violations, 0);
        let noisy = estimate_decryption_error(&params.with_alpha(params.alpha * 50.0), 2000, 14).unwrap();
        assert!(noisy.rate > 0.05, "{noisy:?}");
        assert_eq!(noisy.violations, 0);
        let exact = estimate_decryption_error_with(&params, &DiscretePmf::point_mass(params.p, 0), 500, 15).unwrap();
        assert_eq!(exact.errors, 0);
    }

    /// Subset-sum law by dynamic programming over the group.
    fn subset_sum_dp(g: &[Vec<u64>], p: u64) -> Vec<u64> {
        let k = g[0].len();
        let cells = p.pow(k as u32) as usize;
        let decode = |mut i: usize| {
            let mut v = vec![0u64; k];
            for slot in v.iter_mut().rev() {
                *slot = (i % p as usize) as u64;
                i /= p as usize;
            }
            v
        };
        let encode = |v: &[u64]| v.iter().fold(0usize, |acc, &x| acc * p as usize + x as usize);
        let mut counts = vec![0u64; cells];
        counts[0] = 1;
        for x in g {
            let mut next = counts.clone();
            for (i, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let y: Vec<u64> = decode(i).iter().zip(x).map(|(a, b)| (a + b) % p).collect();
                    next[encode(&y)] += c;
                }
            }
            counts = next;
        }
        counts
    }

    #[test]
    fn gray_code_matches_dynamic_programming() {
        let mut r = rng(16);
        for l in [1, 5, 9] {
            let g: Vec<Vec<u64>> = (0..l).map(|_| (0..3).map(|_| r.random_range(0..5)).collect()).collect();
            assert_eq!(subset_sum_counts(&g, 5).unwrap(), subset_sum_dp(&g, 5));
        }
    }

    #[test]
    fn leftover_hash_distances() {
        let zero = subset_sum_distance(5, 2, 0, 3, 1).unwrap();
        assert!((zero.mean - 2.0 * (1.0 - 1.0 / 125.0)).abs() < 1e-12);
        assert!(zero.mean <= zero.bound);
        let means: Vec<f64> = [10, 12, 14]
            .iter()
            .map(|&l| subset_sum_distance(5, 2, l, 50, 17).unwrap().mean)
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
        let at14 = subset_sum_distance(5, 2, 14, 50, 18).unwrap();
        assert!(at14.mean <= at14.bound, "{} > {}", at14.mean, at14.bound);
        assert!(subset_sum_distance(7, 4, 20, 1, 1).is_err());
    }

    #[test]
    fn harness_with_leaked_key() {
        let params = gen_params(8, DEFAULT_EPS_M).unwrap();
        let mut r = rng(19);
        let (sk, _) = keygen(&params, None, &mut r).unwrap();
        let s = sk.secret();
        let mut z = SecurityHarness::new(LeakedKeyDistinguisher { sk }, params, 1.0).unwrap();
        let cal = z.calibrate(2000, Some(&s), 20).unwrap();
        let gap = (cal.p0 - cal.pu).abs().max((cal.p1 - cal.pu).abs());
        let (on_a, on_u) = acceptance_rates(&z, &params, &s, 100, 21).unwrap();
        assert!(on_a - on_u >= 0.9 * gap, "{on_a} {on_u} {cal:?}");
    }

    #[test]
    fn harness_with_coin_flip() {
        let params = gen_params(8, DEFAULT_EPS_M).unwrap();
        let mut z = SecurityHarness::new(CoinFlip, params, 1.0).unwrap();
        z.calibrate(500, None, 22).unwrap();
        let s = ModVector::random(8, params.p, &mut rng(23));
        let (on_a, on_u) = acceptance_rates(&z, &params, &s, 200, 24).unwrap();
        assert!((on_a - on_u).abs() < 0.05, "{on_a} {on_u}");
    }

    #[test]
    fn uniform_keys_hide_the_bit() {
        let params = CryptoParams::custom(2, 5, 14, 0.05).unwrap();
        let leftover = subset_sum_distance(5, 2, 14, 50, 25).unwrap();
        let mut r = rng(26);
        let (sk, _) = keygen(&params, None, &mut r).unwrap();
        let z = SecurityHarness::new(LeakedKeyDistinguisher { sk }, params, 1.0)
            .unwrap()
            .with_estimate_calls(20_000);
        let mut gaps = 0.0;
        let keys = 20;
        for _ in 0..keys {
            let mut u = DiscreteOracle::uniform(2, 5, r.next_u64());
            let pk = PublicKey::from_samples(&params, take(&mut u, 14).unwrap()).unwrap();
            let (p0, pu) = z.estimates(&pk, &mut r).unwrap();
            gaps += (p0 - pu).abs();
        }
        let mean_gap = gaps / keys as f64;
        // estimation noise of the difference is about 0.005
        assert!(mean_gap <= 2.0 * leftover.mean + 0.015, "{mean_gap} vs {}", leftover.mean);
    }
}
