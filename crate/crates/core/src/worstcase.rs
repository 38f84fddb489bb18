//! The classical steps of the worst-case reduction: LWE equations from
//! discrete Gaussian samples and a CVP target, closest vectors from their
//! coefficients mod `p`, and short independent vectors from a DGS oracle.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::attacks::MlSolver;
use crate::dgs::{dgs_pmf, BootstrapSampler, DgsPmf, DiscreteGaussianSpec};
use crate::error::{Error, Result};
use crate::gaussian::discretized_psi;
use crate::lattice::{
    babai_nearest_plane, closest_vector_exact, distance, greedy_independent, lll_reduce, lll_with_transform,
    norm, rank, smoothing_parameter, successive_minima, LatticeBasis, LatticePoint, DEFAULT_LLL_DELTA,
};
use crate::lwe::{ContinuousSample, ContinuousToDiscrete, LiftError, SampleStream, Solver};
use crate::modring::{ModVector, Torus};
use crate::{rng, Mode};

/// Stand-in for a negligible smoothing error at desk scale.
pub const DEFAULT_ETA_EPS: f64 = 1e-4;
pub const MAX_GIVP_DIM: usize = 4;
const COEFF_TOL: f64 = 1e-6;

/// Draws vectors of a fixed lattice from `D_{L,r}`.
pub trait DgsOracle {
    fn basis(&self) -> &LatticeBasis;
    fn sample(&mut self, r: f64, rng: &mut dyn RngCore) -> Result<LatticePoint>;
}

impl<O: DgsOracle + ?Sized> DgsOracle for &mut O {
    fn basis(&self) -> &LatticeBasis {
        (**self).basis()
    }

    fn sample(&mut self, r: f64, rng: &mut dyn RngCore) -> Result<LatticePoint> {
        (**self).sample(r, rng)
    }
}

/// Exact sampling from the enumerated pmf, cached per width.
#[derive(Clone, Debug)]
pub struct ExactDgsOracle {
    basis: LatticeBasis,
    cache: HashMap<u64, DgsPmf>,
}

impl ExactDgsOracle {
    pub fn new(basis: LatticeBasis) -> Self {
        Self {
            basis,
            cache: HashMap::new(),
        }
    }

    pub fn pmf(&mut self, r: f64) -> Result<&DgsPmf> {
        let key = r.to_bits();
        if !self.cache.contains_key(&key) {
            let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(self.basis.clone(), r)?)?;
            self.cache.insert(key, pmf);
        }
        Ok(&self.cache[&key])
    }
}

impl DgsOracle for ExactDgsOracle {
    fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    fn sample(&mut self, r: f64, rng: &mut dyn RngCore) -> Result<LatticePoint> {
        Ok(self.pmf(r)?.sample(rng).clone())
    }
}

/// The bootstrap sampler, which is only close to `D_{L,r}` for large `r`.
#[derive(Clone, Debug)]
pub struct BootstrapDgsOracle {
    basis: LatticeBasis,
    mode: Mode,
    cache: HashMap<u64, BootstrapSampler>,
}

impl BootstrapDgsOracle {
    pub fn new(basis: LatticeBasis, mode: Mode) -> Self {
        Self {
            basis,
            mode,
            cache: HashMap::new(),
        }
    }
}

impl DgsOracle for BootstrapDgsOracle {
    fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    fn sample(&mut self, r: f64, rng: &mut dyn RngCore) -> Result<LatticePoint> {
        let key = r.to_bits();
        if !self.cache.contains_key(&key) {
            let s = BootstrapSampler::new(&self.basis, r, self.mode)?;
            self.cache.insert(key, s);
        }
        Ok(self.cache[&key].sample(rng))
    }
}

/// A point `x` promised to lie within `d` of the dual lattice `L*`.
#[derive(Clone, Debug, Serialize)]
pub struct CvpInstance {
    pub dual: LatticeBasis,
    pub x: Vec<f64>,
    pub d: f64,
}

impl CvpInstance {
    pub fn new(dual: LatticeBasis, x: Vec<f64>, d: f64) -> Result<Self> {
        if x.len() != dual.dim() {
            return Err(Error::Domain(format!("target has length {}, lattice dimension {}", x.len(), dual.dim())));
        }
        if !(d > 0.0) {
            return Err(Error::Domain(format!("promised distance must be positive, got {d}")));
        }
        Ok(Self { dual, x, d })
    }

    pub fn dim(&self) -> usize {
        self.dual.dim()
    }

    /// The primal lattice `L`, whose samples pair with `L*`.
    pub fn primal(&self) -> Result<LatticeBasis> {
        self.dual.dual()
    }

    /// Whether `dist(x, L*) <= d < lambda_1(L*) / 2`, by enumeration.
    pub fn promise_holds(&self) -> Result<bool> {
        let (l1, _) = successive_minima(&self.dual)?;
        if self.d >= l1 / 2.0 {
            return Ok(false);
        }
        let kappa = closest_vector_exact(&self.dual, &self.x)?;
        Ok(distance(&kappa.vector, &self.x) <= self.d)
    }
}

/// `tau(x)`: the coefficients of the closest point of `L*`, mod `p`.
pub fn tau(inst: &CvpInstance, p: u64) -> Result<ModVector> {
    let kappa = closest_vector_exact(&inst.dual, &inst.x)?;
    Ok(ModVector::from_i64(&kappa.coeffs, p))
}

/// A random target within `d` of a random point of `lattice` with
/// coefficients in `[-5, 5]`, and that point.
pub fn random_target<R: Rng + ?Sized>(lattice: &LatticeBasis, d: f64, rng: &mut R) -> (Vec<f64>, LatticePoint) {
    let n = lattice.dim();
    let coeffs: Vec<i64> = (0..n).map(|_| rng.random_range(-5..=5)).collect();
    let center = lattice.point(&coeffs);
    let dir: Vec<f64> = crate::gaussian::sample_nu(1.0, n, rng);
    let len = norm(&dir).max(1e-300);
    let radius = d * rng.random::<f64>().powf(1.0 / n as f64);
    let x = center.vector.iter().zip(&dir).map(|(c, u)| c + radius * u / len).collect();
    (x, center)
}

/// What the equation generator needs in order to be close to
/// `A_{tau(x), Psi_beta}` with `beta <= alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct PreconditionReport {
    pub eta: f64,
    pub eps: f64,
    /// `sqrt(2) p eta_eps(L)`; `r` must exceed it.
    pub r_bound: f64,
    pub r_ok: bool,
    pub distance: f64,
    /// `alpha p / (sqrt(2) r)`.
    pub promise: f64,
    pub distance_ok: bool,
}

impl PreconditionReport {
    pub fn met(&self) -> bool {
        self.r_ok && self.distance_ok
    }
}

pub fn check_preconditions(inst: &CvpInstance, r: f64, p: u64, alpha: f64, eps: f64) -> Result<PreconditionReport> {
    let eta = smoothing_parameter(&inst.primal()?, eps)?;
    let r_bound = 2f64.sqrt() * p as f64 * eta;
    let kappa = closest_vector_exact(&inst.dual, &inst.x)?;
    let dist = distance(&kappa.vector, &inst.x);
    let promise = alpha * p as f64 / (2f64.sqrt() * r);
    Ok(PreconditionReport {
        eta,
        eps,
        r_bound,
        r_ok: r > r_bound,
        distance: dist,
        promise,
        distance_ok: dist <= promise,
    })
}

/// Continuous LWE samples `(L^{-1} v mod p, <x, v>/p + e)` with
/// `v ~ D_{L,r}` and `e` normal of standard deviation `alpha / (2 sqrt(pi))`.
pub struct EquationStream<'a> {
    primal: LatticeBasis,
    x: Vec<f64>,
    p: u64,
    r: f64,
    noise: Normal<f64>,
    oracle: &'a mut dyn DgsOracle,
    rng: rng::Rng,
}

impl<'a> EquationStream<'a> {
    /// Strict mode enforces the preconditions; diagnostic mode samples
    /// regardless (see `check_preconditions`).
    pub fn new(
        inst: &CvpInstance,
        oracle: &'a mut dyn DgsOracle,
        r: f64,
        p: u64,
        alpha: f64,
        mode: Mode,
        seed: u64,
    ) -> Result<Self> {
        crate::modring::check_modulus(p)?;
        if !(alpha > 0.0 && r > 0.0) {
            return Err(Error::Domain("alpha and r must be positive".into()));
        }
        let primal = inst.primal()?;
        if oracle.basis().dim() != primal.dim() {
            return Err(Error::Domain("DGS oracle lattice has the wrong dimension".into()));
        }
        if mode == Mode::Strict {
            let report = check_preconditions(inst, r, p, alpha, DEFAULT_ETA_EPS)?;
            if !report.met() {
                return Err(Error::Precondition(format!(
                    "need r > {:.4} (got {r}) and dist(x, L*) <= {:.4} (got {:.4})",
                    report.r_bound, report.promise, report.distance
                )));
            }
        }
        Ok(Self {
            primal,
            x: inst.x.clone(),
            p,
            r,
            noise: Normal::new(0.0, alpha / (2.0 * PI.sqrt())).map_err(|e| Error::Domain(e.to_string()))?,
            oracle,
            rng: rng::seeded(seed),
        })
    }

    /// A sample together with the lattice vector behind it and the
    /// unwrapped noise `<x - kappa, v>/p + e` relative to `kappa`.
    pub fn draw_with_noise(&mut self, kappa: &[f64]) -> Result<(ContinuousSample, LatticePoint, f64)> {
        let v = self.oracle.sample(self.r, &mut self.rng)?;
        let coeffs = self
            .primal
            .integer_coefficients(&v.vector, COEFF_TOL)
            .ok_or_else(|| Error::Domain("DGS oracle returned a vector outside L".into()))?;
        let e = self.noise.sample(&mut self.rng);
        let p = self.p as f64;
        let xv: f64 = self.x.iter().zip(&v.vector).map(|(a, b)| a * b).sum();
        let shift: f64 = self.x.iter().zip(kappa).zip(&v.vector).map(|((a, k), b)| (a - k) * b).sum();
        let sample = ContinuousSample {
            a: ModVector::from_i64(&coeffs, self.p),
            b: Torus::new(xv / p + e),
        };
        let point = LatticePoint { coeffs, vector: v.vector };
        Ok((sample, point, shift / p + e))
    }
}

impl SampleStream<Torus> for EquationStream<'_> {
    fn dim(&self) -> usize {
        self.primal.dim()
    }

    fn modulus(&self) -> u64 {
        self.p
    }

    fn draw(&mut self) -> Result<ContinuousSample> {
        let zero = vec![0.0; self.x.len()];
        self.draw_with_noise(&zero).map(|(s, _, _)| s)
    }
}

/// `sqrt((r |x'|/p)^2 + alpha^2/2)`, the width of the equation noise.
pub fn equation_noise_width(r: f64, offset_norm: f64, p: u64, alpha: f64) -> f64 {
    ((r * offset_norm / p as f64).powi(2) + alpha * alpha / 2.0).sqrt()
}

pub type CvpSolver = LiftError<ContinuousToDiscrete<MlSolver>>;

/// Maximum likelihood for `bar-Psi_alpha`, lifted to handle any width up to
/// `alpha`.
pub fn default_cvp_solver(p: u64, alpha: f64, samples: usize) -> Result<CvpSolver> {
    LiftError::new(ContinuousToDiscrete::new(MlSolver::new(discretized_psi(alpha, p)?, samples)), alpha)
}

/// `tau(x)` from an LWE solver run on generated equations.
#[allow(clippy::too_many_arguments)]
pub fn cvp_mod_p<S: Solver<Torus> + ?Sized>(
    inst: &CvpInstance,
    oracle: &mut dyn DgsOracle,
    r: f64,
    p: u64,
    alpha: f64,
    solver: &S,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<ModVector> {
    let mut stream = EquationStream::new(inst, oracle, r, p, alpha, mode, rng.next_u64())?;
    solver.solve(&mut stream, rng)
}

/// The closest point and the contracted targets `x_1, ..., x_{n+1}`.
#[derive(Clone, Debug, Serialize)]
pub struct CvpOutcome {
    pub point: LatticePoint,
    pub targets: Vec<Vec<f64>>,
    pub residues: Vec<ModVector>,
}

/// `kappa_L(x)` from an oracle for its coefficients mod `p`: contract with
/// `x_{i+1} = (x_i - L (a_i mod p)) / p` for `n` steps, finish with Babai,
/// and back-substitute `c_i = p c_{i+1} + a_i`.
pub fn cvp_from_mod_p(
    basis: &LatticeBasis,
    d: f64,
    oracle: &mut dyn FnMut(&[f64], f64) -> Result<ModVector>,
    x: &[f64],
    p: u64,
) -> Result<CvpOutcome> {
    let n = basis.dim();
    let mut targets = vec![x.to_vec()];
    let mut residues = Vec::with_capacity(n);
    let mut radius = d;
    for _ in 0..n {
        let xi = targets.last().unwrap();
        let a = oracle(xi, radius)?;
        if a.len() != n || a.modulus() != p {
            return Err(Error::Domain("coefficient oracle returned a vector of the wrong shape".into()));
        }
        let ai: Vec<i64> = a.entries().iter().map(|&v| v as i64).collect();
        let la = basis.point(&ai).vector;
        targets.push(xi.iter().zip(&la).map(|(x, l)| (x - l) / p as f64).collect());
        residues.push(a);
        radius /= p as f64;
    }
    let red = lll_reduce(basis, DEFAULT_LLL_DELTA)?;
    let last = babai_nearest_plane(&red, targets.last().unwrap());
    let mut c = basis
        .integer_coefficients(&last.vector, COEFF_TOL)
        .ok_or_else(|| Error::Domain("Babai output is not a lattice point".into()))?;
    for a in residues.iter().rev() {
        c = c.iter().zip(a.entries()).map(|(&ci, &ai)| p as i64 * ci + ai as i64).collect();
    }
    let point = basis.point(&c);
    let dist = distance(&point.vector, x);
    if dist > d * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::NotFound(format!(
            "coefficient oracle inconsistent: recovered point is {dist:.4} from x, promise {d:.4}"
        )));
    }
    Ok(CvpOutcome { point, targets, residues })
}

/// `cvp_from_mod_p` on `L*` driven by `cvp_mod_p`.
#[allow(clippy::too_many_arguments)]
pub fn closest_dual_vector<S: Solver<Torus> + ?Sized>(
    inst: &CvpInstance,
    oracle: &mut dyn DgsOracle,
    r: f64,
    p: u64,
    alpha: f64,
    solver: &S,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<CvpOutcome> {
    let mut coeffs = |xi: &[f64], di: f64| {
        let sub = CvpInstance::new(inst.dual.clone(), xi.to_vec(), di)?;
        cvp_mod_p(&sub, &mut *oracle, r, p, alpha, solver, mode, &mut *rng)
    };
    cvp_from_mod_p(&inst.dual, inst.d, &mut coeffs, &inst.x, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct GivpOutcome {
    pub vectors: Vec<LatticePoint>,
    pub max_norm: f64,
    /// Index `i` of the width `r_i` that produced the set; `None` for the
    /// LLL basis.
    pub round: Option<usize>,
}

/// Short independent vectors from a DGS oracle: starting from the LLL
/// basis, draw `n^2` samples at each `r_i = lambda~_n 2^{-i}`,
/// `i = 0..=2n`, with `r_i >= phi`, and keep the full-rank set with the
/// smallest maximum norm.
pub fn givp_from_dgs(
    basis: &LatticeBasis,
    oracle: &mut dyn DgsOracle,
    phi: f64,
    rng: &mut dyn RngCore,
) -> Result<GivpOutcome> {
    let n = basis.dim();
    if n > MAX_GIVP_DIM {
        return Err(Error::ResourceLimit(format!("GIVP driver supports n <= {MAX_GIVP_DIM}")));
    }
    let (red, u) = lll_with_transform(basis, DEFAULT_LLL_DELTA)?;
    let lll: Vec<LatticePoint> = (0..n).map(|j| basis.point(&u[j])).collect();
    let max_norm = |set: &[LatticePoint]| set.iter().map(LatticePoint::norm).fold(0.0, f64::max);
    let lambda_n = red.column_norms().into_iter().fold(0.0, f64::max);
    let mut best = GivpOutcome {
        max_norm: max_norm(&lll),
        vectors: lll,
        round: None,
    };
    for i in 0..=2 * n {
        let r = lambda_n * 0.5f64.powi(i as i32);
        if r < phi {
            break;
        }
        let samples = (0..n * n)
            .map(|_| oracle.sample(r, rng))
            .collect::<Result<Vec<_>>>()?;
        let set = greedy_independent(&samples, n);
        if set.len() == n && max_norm(&set) < best.max_norm {
            best = GivpOutcome {
                max_norm: max_norm(&set),
                vectors: set,
                round: Some(i),
            };
        }
    }
    let vecs: Vec<Vec<f64>> = best.vectors.iter().map(|v| v.vector.clone()).collect();
    if rank(&vecs) < n {
        return Err(Error::NotFound("no full-rank set found".into()));
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub frequency: f64,
    pub trials: usize,
    /// Binomial standard deviation at the bound.
    pub sigma: f64,
    pub bound: f64,
    pub eta: f64,
    pub precondition_met: bool,
}

/// Fraction of `D_{L,r}` samples outside the span of `h`.
pub fn hyperplane_escape_rate(
    oracle: &mut dyn DgsOracle,
    r: f64,
    h: &[Vec<f64>],
    trials: usize,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<EscapeReport> {
    let n = oracle.basis().dim();
    if h.iter().any(|v| v.len() != n) {
        return Err(Error::Domain("subspace vectors have the wrong length".into()));
    }
    if rank(h) >= n {
        return Err(Error::Precondition("the subspace must be proper".into()));
    }
    let eta = smoothing_parameter(oracle.basis(), 0.1)?;
    let precondition_met = r >= 2f64.sqrt() * eta * (1.0 - 1e-9);
    if !precondition_met && mode == Mode::Strict {
        return Err(Error::Precondition(format!(
            "need r >= sqrt(2) eta_0.1(L) = {:.4}, got {r}",
            2f64.sqrt() * eta
        )));
    }
    // orthonormal basis of H
    let mut onb: Vec<Vec<f64>> = Vec::new();
    for v in h {
        let mut w = v.clone();
        for q in &onb {
            let c: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let len = norm(&w);
        if len > 1e-9 * norm(v).max(1.0) {
            onb.push(w.iter().map(|a| a / len).collect());
        }
    }
    let mut outside = 0usize;
    for _ in 0..trials {
        let x = oracle.sample(r, rng)?.vector;
        let mut w = x.clone();
        for q in &onb {
            let c: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        if norm(&w) > 1e-9 * norm(&x).max(1.0) {
            outside += 1;
        }
    }
    Ok(EscapeReport {
        frequency: outside as f64 / trials.max(1) as f64,
        trials,
        sigma: crate::stats::binomial_sigma(0.1, trials),
        bound: 0.1,
        eta,
        precondition_met,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentStep {
    pub r: f64,
    pub next_r: f64,
    pub precondition_met: bool,
    pub solved: usize,
    pub trials: usize,
}

/// The iterative part of the reduction with the quantum step replaced by
/// exact sampling: at each width `r_i = r_0 (sqrt(n) / (alpha p))^i` solve
/// `trials` CVP instances on `L*` through LWE.
#[allow(clippy::too_many_arguments)]
pub fn iterative_descent(
    primal: &LatticeBasis,
    p: u64,
    alpha: f64,
    r0: f64,
    steps: usize,
    trials: usize,
    ml_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<DescentStep>> {
    let n = primal.dim();
    let dual = primal.dual()?;
    let (dual_l1, _) = successive_minima(&dual)?;
    let eta = smoothing_parameter(primal, DEFAULT_ETA_EPS)?;
    let factor = (n as f64).sqrt() / (alpha * p as f64);
    let solver = default_cvp_solver(p, alpha, ml_samples)?;
    let mut oracle = ExactDgsOracle::new(primal.clone());
    let mut out = Vec::with_capacity(steps);
    let mut r = r0;
    for i in 0..steps {
        let d = (alpha * p as f64 / (2f64.sqrt() * r)).min(0.45 * dual_l1);
        let mut solved = 0;
        for _ in 0..trials {
            let (x, _) = random_target(&dual, 0.9 * d, rng);
            let inst = CvpInstance::new(dual.clone(), x, d)?;
            let expect = tau(&inst, p)?;
            match cvp_mod_p(&inst, &mut oracle, r, p, alpha, &solver, Mode::Diagnostic, rng) {
                Ok(s) if s == expect => solved += 1,
                Ok(_) | Err(Error::NotFound(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let next_r = r * factor;
        log::info!("descent step {i}: r = {r:.4}; quantum step would prepare D_(L, {next_r:.4}) here, using exact sampling");
        out.push(DescentStep {
            r,
            next_r,
            precondition_met: r > 2f64.sqrt() * p as f64 * eta,
            solved,
            trials,
        });
        r = next_r;
    }
    Ok(out)
}
