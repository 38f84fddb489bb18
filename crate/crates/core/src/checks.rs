//! Registry of numeric claim checks, each run at a fixed scale and seeded
//! from a single value.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{bkw_min_budget, bkw_success_rate, BkwParams, LikelihoodDistinguisher};
use crate::crypto::{estimate_decryption_error, gen_params, subset_sum_distance, DEFAULT_EPS_M};
use crate::dgs::{binned_tv_to_pmf, check_shift_invariance, dgs_pmf, BootstrapSampler, DiscreteGaussianSpec};
use crate::error::{Error, Result};
use crate::gaussian::{discretized_psi, stat_distance, Density};
use crate::lattice::{closest_vector_exact, distance, smoothing_parameter, LatticeBasis};
use crate::lwe::exact::{JointPmf, Q};
use crate::lwe::reductions::DecisionToSearch;
use crate::lwe::{ContinuousOracle, DiscreteOracle, Solver};
use crate::modring::ModVector;
use crate::rng;
use crate::stats::mean_var;
use crate::worstcase::{
    closest_dual_vector, cvp_mod_p, default_cvp_solver, equation_noise_width, givp_from_dgs,
    hyperplane_escape_rate, random_target, tau, CvpInstance, EquationStream, ExactDgsOracle,
};
use crate::lwe::verify::Verifier;
use crate::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub number: usize,
    pub claim: String,
    pub measured: f64,
    /// How `measured` is compared with `bound`: `"<="`, `"<"`, `">="`, or
    /// `"error"` when the check could not run.
    pub relation: String,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

pub struct CheckSpec {
    pub id: &'static str,
    pub claim: &'static str,
    run: fn(u64) -> Result<Measured>,
}

struct Measured {
    measured: f64,
    relation: &'static str,
    bound: f64,
    pass: bool,
    detail: String,
}

impl Measured {
    fn le(measured: f64, bound: f64, detail: String) -> Self {
        Self { measured, relation: "<=", bound, pass: measured <= bound, detail }
    }

    fn lt(measured: f64, bound: f64, detail: String) -> Self {
        Self { measured, relation: "<", bound, pass: measured < bound, detail }
    }

    fn ge(measured: f64, bound: f64, detail: String) -> Self {
        Self { measured, relation: ">=", bound, pass: measured >= bound, detail }
    }
}

pub const CHECKS: &[CheckSpec] = &[
    CheckSpec {
        id: "crypto-correctness",
        claim: "decryption error rate at n=64 default parameters is at most 1%",
        run: crypto_correctness,
    },
    CheckSpec {
        id: "verifier",
        claim: "mean-cosine verifier at alpha=0.5, N=256 accepts the secret and rejects wrong secrets 99% of the time",
        run: verifier,
    },
    CheckSpec {
        id: "psi-distance",
        claim: "distance between Psi_alpha and Psi_beta is at most 9(beta/alpha - 1) for alpha < beta <= 2 alpha",
        run: psi_distance,
    },
    CheckSpec {
        id: "banaszczyk",
        claim: "rho(Z^n outside the ball of radius sqrt(n)) < 2^(-2n) rho(Z^n) for n = 2, 3, 4",
        run: banaszczyk,
    },
    CheckSpec {
        id: "shift-invariance",
        claim: "rho_r(Z^2 + c) / r^2 lies within 1 +- 2 eps at r = eta_eps(Z^2) = 2",
        run: shift_invariance,
    },
    CheckSpec {
        id: "reduction-exactness",
        claim: "shift and coordinate-guess maps act exactly as stated on pmfs at n=1, p in {2, 3}",
        run: reduction_exactness,
    },
    CheckSpec {
        id: "decision-to-search",
        claim: "decision-to-search with a likelihood acceptor recovers s at n=3, p=5 in at least 49/50 trials",
        run: decision_to_search,
    },
    CheckSpec {
        id: "worstcase-cvp",
        claim: "CVP on Z^2 through LWE at p=5, r=10, alpha=0.5 is exact for at least 24/25 targets",
        run: worstcase_cvp,
    },
    CheckSpec {
        id: "noise-width",
        claim: "equation noise std matches sqrt((r|x'|/p)^2 + alpha^2/2)/sqrt(2 pi) within 5%",
        run: noise_width,
    },
    CheckSpec {
        id: "leftover-hash",
        claim: "mean subset-sum distance from uniform over Z_5^3 with l=14 is at most sqrt(|G|/2^l)",
        run: leftover_hash,
    },
    CheckSpec {
        id: "givp",
        claim: "GIVP driver on Z^2 with phi = sqrt(2) eta_0.1 returns 2 independent vectors of norm <= 2 sqrt(2) phi in 50/50 runs",
        run: givp,
    },
    CheckSpec {
        id: "hyperplane",
        claim: "D_{Z^2,r} at r = sqrt(2) eta_0.1 leaves the x-axis with frequency at least 1/10",
        run: hyperplane,
    },
    CheckSpec {
        id: "bkw",
        claim: "BKW at n=16, b=4, eps=0.1 recovers s in >= 90/100 trials within 2^18 samples; minimal budget grows with n/b",
        run: bkw,
    },
    CheckSpec {
        id: "bootstrap-dgs",
        claim: "bootstrap DGS sampler on Z^2 at r=64 is within binned TV 0.05 of the exact pmf at 10^5 draws",
        run: bootstrap_dgs,
    },
];

/// Resolves `"all"`, check ids, and 1-based check numbers.
pub fn select(selection: &[String]) -> Result<Vec<usize>> {
    if selection.is_empty() || selection.iter().any(|s| s == "all") {
        return Ok((0..CHECKS.len()).collect());
    }
    let mut out = Vec::new();
    for s in selection {
        let idx = match s.parse::<usize>() {
            Ok(k) if (1..=CHECKS.len()).contains(&k) => k - 1,
            _ => CHECKS
                .iter()
                .position(|c| c.id == s)
                .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))?,
        };
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn run_check(index: usize, seed: u64) -> Result<CheckResult> {
    let spec = CHECKS
        .get(index)
        .ok_or_else(|| Error::Config(format!("no check with index {index}")))?;
    let m = (spec.run)(seed)?;
    Ok(CheckResult {
        check_id: spec.id.to_string(),
        number: index + 1,
        claim: spec.claim.to_string(),
        measured: m.measured,
        relation: m.relation.to_string(),
        bound: m.bound,
        pass: m.pass,
        detail: m.detail,
    })
}

/// Runs the selected checks in registry order. A check that errors is
/// reported as failed with the error in `detail`.
pub fn run_checks(selection: &[String], seed: u64) -> Result<Vec<CheckResult>> {
    Ok(select(selection)?
        .into_iter()
        .map(|i| {
            run_check(i, seed).unwrap_or_else(|e| CheckResult {
                check_id: CHECKS[i].id.to_string(),
                number: i + 1,
                claim: CHECKS[i].claim.to_string(),
                measured: 0.0,
                relation: "error".into(),
                bound: 0.0,
                pass: false,
                detail: format!("error: {e}"),
            })
        })
        .collect())
}

fn z2() -> LatticeBasis {
    LatticeBasis::identity(2)
}

fn crypto_correctness(seed: u64) -> Result<Measured> {
    let params = gen_params(64, DEFAULT_EPS_M)?;
    let stats = estimate_decryption_error(&params, 10_000, seed)?;
    Ok(Measured::le(
        stats.rate,
        0.01,
        format!(
            "p={}, m={}, alpha={:.6}, {} errors in {} trials, {} violations",
            params.p, params.m, params.alpha, stats.errors, stats.trials, stats.violations
        ),
    ))
}

fn verifier(seed: u64) -> Result<Measured> {
    let (n, p, alpha, trials, wrong) = (10, 101, 0.5, 100, 20);
    let v = Verifier { samples: 256 };
    let mut r = rng::stream(seed, "verifier", 0);
    let (mut accepted, mut rejected, mut z_sum) = (0usize, 0usize, 0.0);
    for _ in 0..trials {
        let s = ModVector::random(n, p, &mut r);
        let mut o = ContinuousOracle::with_beta(n, p, alpha, Some(s.clone()), r.random())?;
        let z = v.statistic(&s, &mut o)?;
        z_sum += z;
        accepted += usize::from(z > crate::lwe::verify::VERIFY_THRESHOLD);
        for _ in 0..wrong {
            let mut w = ModVector::random(n, p, &mut r);
            if w == s {
                w.set(0, (w.get(0).value() + 1) % p);
            }
            rejected += usize::from(!v.accepts(&w, &mut o)?);
        }
    }
    let acc = accepted as f64 / trials as f64;
    let rej = rejected as f64 / (trials * wrong) as f64;
    Ok(Measured::ge(
        acc.min(rej),
        0.99,
        format!(
            "accept rate {acc:.3}, reject rate {rej:.4}, mean z on secret {:.4} (expected {:.4})",
            z_sum / trials as f64,
            (-PI * alpha * alpha).exp()
        ),
    ))
}

fn psi_distance(seed: u64) -> Result<Measured> {
    let mut r = rng::stream(seed, "psi-distance", 0);
    let mut pairs: Vec<(f64, f64)> = vec![(0.2, 0.22)];
    pairs.extend((0..50).map(|_| {
        let a: f64 = r.random_range(0.02..0.5);
        (a, a * (1.0 + r.random_range(0.0..1.0f64).max(1e-3)))
    }));
    let mut worst = 0.0f64;
    let mut reference = 0.0;
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let d = stat_distance(&Density::wrapped_gaussian(a), &Density::wrapped_gaussian(b))?;
        if i == 0 {
            reference = d;
        }
        worst = worst.max(d / (9.0 * (b / a - 1.0)));
    }
    let mut m = Measured::le(
        worst,
        1.0,
        format!("max distance/bound over {} pairs; distance at (0.2, 0.22) = {reference:.4}", pairs.len()),
    );
    m.pass &= reference > 0.0 && reference <= 0.9;
    Ok(m)
}

fn banaszczyk(_: u64) -> Result<Measured> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in 2..=4usize {
        let k = 7i64;
        let side = (2 * k + 1) as usize;
        let (mut tail, mut total) = (0.0, 0.0);
        for idx in 0..side.pow(n as u32) {
            let mut x = idx;
            let mut norm2 = 0i64;
            for _ in 0..n {
                let c = (x % side) as i64 - k;
                x /= side;
                norm2 += c * c;
            }
            let w = (-PI * norm2 as f64).exp();
            total += w;
            if norm2 as usize > n {
                tail += w;
            }
        }
        let ratio = tail / (total * 4f64.powi(-(n as i32)));
        parts.push(format!("n={n}: tail {tail:.3e}, ratio {ratio:.3e}"));
        worst = worst.max(ratio);
    }
    Ok(Measured::lt(worst, 1.0, parts.join("; ")))
}

fn z2_eps_at_half() -> f64 {
    let theta: f64 = (-10i64..=10).map(|k| (-4.0 * PI * (k * k) as f64).exp()).sum();
    theta * theta - 1.0
}

fn shift_invariance(seed: u64) -> Result<Measured> {
    let eps = z2_eps_at_half();
    let mut r = rng::stream(seed, "shift-invariance", 0);
    let mut worst = 0.0f64;
    let mut met = true;
    for _ in 0..100 {
        let c = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let chk = check_shift_invariance(&z2(), &c, 2.0, eps)?;
        worst = worst.max((chk.ratio - 1.0).abs());
        met &= chk.precondition_met;
    }
    Ok(Measured::le(worst, 2.0 * eps, format!("eps = {eps:.4e}, max |ratio - 1| over 100 shifts, eta condition met: {met}")))
}

fn reduction_exactness(_: u64) -> Result<Measured> {
    let chis: Vec<Vec<Q>> = vec![
        vec![Q::new(3, 4), Q::new(1, 4)],
        vec![Q::new(9, 10), Q::new(1, 10)],
        vec![Q::new(1, 2), Q::new(1, 4), Q::new(1, 4)],
        vec![Q::new(4, 5), Q::new(1, 10), Q::new(1, 10)],
        vec![Q::new(2, 3), Q::new(1, 3), Q::from_integer(0)],
    ];
    let (mut cases, mut mismatches) = (0usize, 0usize);
    for chi in &chis {
        let p = chi.len() as u64;
        let u = JointPmf::uniform(1, p)?;
        for s in 0..p {
            let sv = ModVector::new(vec![s], p);
            let a = JointPmf::lwe(&sv, chi)?;
            for t in 0..p {
                let tv = ModVector::new(vec![t], p);
                cases += 2;
                mismatches += usize::from(a.push_shift(&tv) != JointPmf::lwe(&sv.add(&tv), chi)?);
                mismatches += usize::from(u.push_shift(&tv) != u);
            }
            for k in 0..p {
                cases += 1;
                let expect = if k == s { &a } else { &u };
                mismatches += usize::from(a.push_coordinate_transform(0, k) != *expect);
            }
        }
    }
    Ok(Measured::le(mismatches as f64, 0.0, format!("{cases} identities checked with rational arithmetic")))
}

fn decision_to_search(seed: u64) -> Result<Measured> {
    let (n, p, trials) = (3, 5, 50);
    let chi = discretized_psi(0.05, p)?;
    let solver = DecisionToSearch::new(LikelihoodDistinguisher::new(chi.clone(), 24), n, p)?;
    let mut hits = 0usize;
    for t in 0..trials {
        let mut r = rng::stream(seed, "decision-to-search", t);
        let s = ModVector::random(n, p, &mut r);
        let mut o = DiscreteOracle::with_noise(n, p, &chi, Some(s.clone()), r.random())?;
        if solver.solve(&mut o, &mut r).is_ok_and(|got| got == s) {
            hits += 1;
        }
    }
    Ok(Measured::ge(hits as f64, 49.0, format!("{hits}/{trials} secrets recovered")))
}

fn worstcase_cvp(seed: u64) -> Result<Measured> {
    let (p, r_width, alpha, targets) = (5, 10.0, 0.5, 25);
    let promise = alpha * p as f64 / (2f64.sqrt() * r_width);
    let solver = default_cvp_solver(p, alpha, 400)?;
    let mut oracle = ExactDgsOracle::new(z2());
    let mut r = rng::stream(seed, "worstcase-cvp", 0);
    let (mut tau_ok, mut both_ok) = (0usize, 0usize);
    for _ in 0..targets {
        let (x, _) = random_target(&z2(), promise, &mut r);
        let inst = CvpInstance::new(z2(), x.clone(), promise)?;
        let residues = cvp_mod_p(&inst, &mut oracle, r_width, p, alpha, &solver, Mode::Diagnostic, &mut r);
        let residues_ok = residues.is_ok_and(|s| tau(&inst, p).is_ok_and(|t| t == s));
        tau_ok += usize::from(residues_ok);
        let point = closest_dual_vector(&inst, &mut oracle, r_width, p, alpha, &solver, Mode::Diagnostic, &mut r);
        let exact = closest_vector_exact(&z2(), &x)?;
        both_ok += usize::from(residues_ok && point.is_ok_and(|o| o.point.coeffs == exact.coeffs));
    }
    Ok(Measured::ge(
        both_ok as f64,
        24.0,
        format!("promise radius {promise:.4}; tau correct {tau_ok}/{targets}, closest vector correct {both_ok}/{targets}; diagnostic mode"),
    ))
}

fn noise_width(seed: u64) -> Result<Measured> {
    let (p, r_width, alpha) = (5, 10.0, 0.5);
    let kappa = vec![1.0, 1.0];
    let x = vec![1.1, 0.92];
    let mut oracle = ExactDgsOracle::new(z2());
    let inst = CvpInstance::new(z2(), x.clone(), 0.2)?;
    let mut stream = EquationStream::new(&inst, &mut oracle, r_width, p, alpha, Mode::Diagnostic, seed)?;
    let noise = (0..100_000)
        .map(|_| stream.draw_with_noise(&kappa).map(|d| d.2))
        .collect::<Result<Vec<f64>>>()?;
    let (_, var) = mean_var(&noise);
    let expect = equation_noise_width(r_width, distance(&x, &kappa), p, alpha) / (2.0 * PI).sqrt();
    Ok(Measured::le(
        (var.sqrt() / expect - 1.0).abs(),
        0.05,
        format!("measured std {:.5}, predicted {expect:.5}", var.sqrt()),
    ))
}

fn leftover_hash(seed: u64) -> Result<Measured> {
    let out = subset_sum_distance(5, 2, 14, 50, seed)?;
    let max = out.distances.iter().cloned().fold(0.0, f64::max);
    Ok(Measured::le(out.mean, out.bound, format!("50 draws, max distance {max:.4}")))
}

fn givp(seed: u64) -> Result<Measured> {
    let eta = smoothing_parameter(&z2(), 0.1)?;
    let phi = 2f64.sqrt() * eta;
    let bound = 2.0 * 2f64.sqrt() * phi;
    let mut oracle = ExactDgsOracle::new(z2());
    let mut r = rng::stream(seed, "givp", 0);
    let mut ok = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        if let Ok(out) = givp_from_dgs(&z2(), &mut oracle, phi, &mut r) {
            worst = worst.max(out.max_norm);
            ok += usize::from(out.vectors.len() == 2 && out.max_norm <= bound);
        }
    }
    Ok(Measured::ge(ok as f64, 50.0, format!("phi = {phi:.4}, norm bound {bound:.4}, longest vector {worst:.4}")))
}

fn hyperplane(seed: u64) -> Result<Measured> {
    let eta = smoothing_parameter(&z2(), 0.1)?;
    let mut oracle = ExactDgsOracle::new(z2());
    let mut r = rng::stream(seed, "hyperplane", 0);
    let rep = hyperplane_escape_rate(&mut oracle, 2f64.sqrt() * eta, &[vec![1.0, 0.0]], 10_000, Mode::Strict, &mut r)?;
    Ok(Measured::ge(
        rep.frequency,
        0.1,
        format!("r = {:.4}, {} samples, binomial sigma {:.4}", 2f64.sqrt() * eta, rep.trials, rep.sigma),
    ))
}

fn bkw(seed: u64) -> Result<Measured> {
    let eps = 0.1;
    let params = BkwParams::new(16, 4, 1 << 18)?;
    let rate = bkw_success_rate(&params, eps, 100, seed)?;
    let grid: Vec<usize> = (8..=18).map(|k| 1usize << k).collect();
    let mins = [8, 12, 16]
        .iter()
        .map(|&n| bkw_min_budget(n, 4, eps, &grid, 0.9, 100, seed))
        .collect::<Result<Vec<_>>>()?;
    let monotone = mins.iter().all(Option::is_some) && mins.windows(2).all(|w| w[0] <= w[1]);
    let mut m = Measured::ge(
        rate * 100.0,
        90.0,
        format!("successes per 100 trials; minimal budgets for n = 8, 12, 16: {mins:?}; monotone: {monotone}"),
    );
    m.pass &= monotone;
    Ok(m)
}

fn bootstrap_dgs(seed: u64) -> Result<Measured> {
    let r_width = 64.0;
    let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(z2(), r_width)?)?;
    let sampler = BootstrapSampler::new(&z2(), r_width, Mode::Strict)?;
    let mut r = rng::stream(seed, "bootstrap-dgs", 0);
    let samples: Vec<Vec<f64>> = (0..100_000).map(|_| sampler.sample(&mut r).vector).collect();
    Ok(Measured::lt(binned_tv_to_pmf(&samples, &pmf, r_width), 0.05, "100000 draws, 64-cell grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_by_id_and_number() {
        assert_eq!(select(&["all".into()]).unwrap().len(), CHECKS.len());
        assert_eq!(select(&["banaszczyk".into(), "3".into(), "4".into()]).unwrap(), vec![2, 3]);
        assert!(select(&["nope".into()]).is_err());
        assert!(select(&["15".into()]).is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        let ids: Vec<String> = ["psi-distance", "banaszczyk", "shift-invariance", "reduction-exactness", "leftover-hash"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for res in run_checks(&ids, 7).unwrap() {
            assert!(res.pass, "{res:?}");
        }
    }
}
