//! Discrete Gaussian distributions `D_{L+u,r}`: exact pmf and inverse-CDF
//! sampler over a truncated support, the floor-of-continuous bootstrap
//! sampler, and numeric checks of the shift-invariance and convolution
//! statements behind the worst-case reduction.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{normal_std, psi_density, rho_norm2, sample_nu, simpson};
use crate::lattice::{
    enumerate_around, gaussian_mass, lll_with_transform, smoothing_parameter, successive_minima,
    LatticeBasis, LatticePoint, DEFAULT_LLL_DELTA,
};
use crate::stats::{torus_histogram, tv_counts_vs_probs, GridBinning};
use crate::Mode;

/// Largest dimension for the shift-invariance check.
pub const MAX_SHIFT_CHECK_DIM: usize = 4;

/// Total histogram cells for continuous comparisons.
pub const TV_BINS: usize = 64;

#[derive(Clone, Debug)]
pub struct DiscreteGaussianSpec {
    pub basis: LatticeBasis,
    pub offset: Vec<f64>,
    pub r: f64,
    pub radius: f64,
}

impl DiscreteGaussianSpec {
    /// `D_{L+u,r}` truncated at the default radius `2 r sqrt(n)`.
    pub fn new(basis: LatticeBasis, offset: Option<Vec<f64>>, r: f64) -> Result<Self> {
        let n = basis.dim();
        let radius = 2.0 * r * (n as f64).sqrt();
        Self::with_radius(basis, offset, r, radius)
    }

    pub fn lattice(basis: LatticeBasis, r: f64) -> Result<Self> {
        Self::new(basis, None, r)
    }

    pub fn with_radius(basis: LatticeBasis, offset: Option<Vec<f64>>, r: f64, radius: f64) -> Result<Self> {
        let n = basis.dim();
        if !(r > 0.0) {
            return Err(Error::Domain(format!("width must be positive, got {r}")));
        }
        if radius < 2.0 * r * (n as f64).sqrt() * (1.0 - 1e-12) {
            return Err(Error::Domain(format!(
                "truncation radius {radius} is below 2 r sqrt(n)"
            )));
        }
        let offset = offset.unwrap_or_else(|| vec![0.0; n]);
        if offset.len() != n {
            return Err(Error::Domain("coset offset has the wrong dimension".into()));
        }
        Ok(Self {
            basis,
            offset,
            r,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// The truncated pmf of `D_{L+u,r}`. Support entries carry the lattice part
/// `v`; the coset element is `v + u`.
#[derive(Clone, Debug)]
pub struct DgsPmf {
    support: Vec<LatticePoint>,
    vectors: Vec<Vec<f64>>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DgsPmf {
    pub fn support(&self) -> &[LatticePoint] {
        &self.support
    }

    /// Coset elements `v + u`, aligned with `support`.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, coeffs: &[i64]) -> f64 {
        self.support
            .iter()
            .position(|p| p.coeffs == coeffs)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1)
    }

    /// Lattice part of a draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &LatticePoint {
        &self.support[self.sample_index(rng)]
    }

    /// Coset element of a draw.
    pub fn sample_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        &self.vectors[self.sample_index(rng)]
    }
}

pub fn dgs_pmf(spec: &DiscreteGaussianSpec) -> Result<DgsPmf> {
    let center: Vec<f64> = spec.offset.iter().map(|v| -v).collect();
    let support = enumerate_around(&spec.basis, Some(&center), spec.radius)?;
    let vectors: Vec<Vec<f64>> = support
        .iter()
        .map(|p| p.vector.iter().zip(&spec.offset).map(|(v, u)| v + u).collect())
        .collect();
    let weights: Vec<f64> = vectors
        .iter()
        .map(|x| rho_norm2(x.iter().map(|v| v * v).sum(), spec.r))
        .collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut acc = 0.0;
    let cdf = probs
        .iter()
        .map(|q| {
            acc += q;
            acc
        })
        .collect();
    Ok(DgsPmf {
        support,
        vectors,
        probs,
        cdf,
    })
}

/// One exact draw; build a [`DgsPmf`] once when drawing repeatedly.
pub fn sample_dgs_exact<R: Rng + ?Sized>(spec: &DiscreteGaussianSpec, rng: &mut R) -> Result<Vec<f64>> {
    Ok(dgs_pmf(spec)?.sample_vector(rng).to_vec())
}

/// Draws `y ~ nu_r` and outputs `y - (y mod P(L))` over an LLL-reduced basis.
#[derive(Clone, Debug)]
pub struct BootstrapSampler {
    basis: LatticeBasis,
    reduced: LatticeBasis,
    transform: Vec<Vec<i64>>,
    r: f64,
}

impl BootstrapSampler {
    /// In strict mode, requires `r > 2^{2n} lambda_n(L)`.
    pub fn new(basis: &LatticeBasis, r: f64, mode: Mode) -> Result<Self> {
        let n = basis.dim();
        if mode == Mode::Strict {
            let (_, ln) = successive_minima(basis)?;
            let need = 4f64.powi(n as i32) * ln;
            if r <= need {
                return Err(Error::Precondition(format!(
                    "bootstrap sampling needs r > 2^(2n) lambda_n = {need}, got {r}"
                )));
            }
        }
        let (reduced, transform) = lll_with_transform(basis, DEFAULT_LLL_DELTA)?;
        Ok(Self {
            basis: basis.clone(),
            reduced,
            transform,
            r,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        let n = self.basis.dim();
        let y = sample_nu(self.r, n, rng);
        let c: Vec<i64> = self
            .reduced
            .coefficients(&y)
            .iter()
            .map(|v| v.floor() as i64)
            .collect();
        let coeffs: Vec<i64> = (0..n)
            .map(|i| (0..n).map(|j| self.transform[j][i] * c[j]).sum())
            .collect();
        self.basis.point(&coeffs)
    }
}

pub fn sample_dgs_bootstrap<R: Rng + ?Sized>(
    basis: &LatticeBasis,
    r: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<LatticePoint> {
    Ok(BootstrapSampler::new(basis, r, mode)?.sample(rng))
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftCheck {
    /// `rho_r(L + c) / (r^n det(L*))`.
    pub ratio: f64,
    pub eta: f64,
    pub precondition_met: bool,
}

pub fn check_shift_invariance(basis: &LatticeBasis, c: &[f64], r: f64, eps: f64) -> Result<ShiftCheck> {
    let n = basis.dim();
    if n > MAX_SHIFT_CHECK_DIM {
        return Err(Error::ResourceLimit(format!(
            "shift check limited to dimension {MAX_SHIFT_CHECK_DIM}"
        )));
    }
    let eta = smoothing_parameter(basis, eps)?;
    let mass = gaussian_mass(basis, r, Some(c), false, 1e-13)?;
    let dual_det = 1.0 / basis.det().abs();
    Ok(ShiftCheck {
        ratio: mass / (r.powi(n as i32) * dual_det),
        eta,
        precondition_met: r >= eta * (1.0 - 1e-6),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionCheck {
    pub tv: f64,
    /// `rho_{1/w}(L* \ {0})` at `w = rs / sqrt(r^2 + s^2)`: the `eps` for
    /// which the hypothesis `w >= eta_eps(L)` holds with equality.
    pub eps: f64,
    pub bound: f64,
    pub precondition_met: bool,
}

/// Samples `D_{L+u,r} + nu_s` and measures its binned distance to
/// `nu_t`, `t = sqrt(r^2 + s^2)`, on a 64-cell grid (`n <= 3`).
pub fn convolution_check<R: Rng + ?Sized>(
    basis: &LatticeBasis,
    u: Option<&[f64]>,
    r: f64,
    s: f64,
    trials: usize,
    rng: &mut R,
) -> Result<ConvolutionCheck> {
    let n = basis.dim();
    if n > 3 {
        return Err(Error::ResourceLimit("convolution check limited to n <= 3".into()));
    }
    let t = (r * r + s * s).sqrt();
    let w = r * s / t;
    let eps = gaussian_mass(&basis.dual()?, 1.0 / w, None, true, 1e-12)?;
    let spec = DiscreteGaussianSpec::new(basis.clone(), u.map(<[f64]>::to_vec), r)?;
    let pmf = dgs_pmf(&spec)?;
    let grid = GridBinning::with_total(n, TV_BINS, 4.0 * normal_std(t));
    let mut counts = vec![0u64; grid.cells()];
    for _ in 0..trials {
        let e = sample_nu(s, n, rng);
        let y: Vec<f64> = pmf.sample_vector(rng).iter().zip(&e).map(|(a, b)| a + b).collect();
        counts[grid.index(&y)] += 1;
    }
    let tv = tv_counts_vs_probs(&counts, &grid.masses_normal(normal_std(t)));
    Ok(ConvolutionCheck {
        tv,
        eps,
        bound: 4.0 * eps,
        precondition_met: eps < 0.5,
    })
}

/// One-dimensional projection: `<z, v> + e mod 1` with `v ~ D_{L,r}` and
/// `e ~ nu_alpha`, compared on 64 torus bins with `Psi_beta`,
/// `beta = sqrt((r |z|)^2 + alpha^2)`.
pub fn convolution_projection_check<R: Rng + ?Sized>(
    basis: &LatticeBasis,
    r: f64,
    z: &[f64],
    alpha: f64,
    trials: usize,
    rng: &mut R,
) -> Result<ConvolutionCheck> {
    let zn = crate::lattice::norm(z);
    let beta = ((r * zn).powi(2) + alpha * alpha).sqrt();
    let w = 1.0 / (1.0 / (r * r) + (zn / alpha).powi(2)).sqrt();
    let eps = gaussian_mass(&basis.dual()?, 1.0 / w, None, true, 1e-12)?;
    let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(basis.clone(), r)?)?;
    let xs: Vec<f64> = (0..trials)
        .map(|_| {
            let v = pmf.sample_vector(rng);
            let e = sample_nu(alpha, 1, rng)[0];
            v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + e
        })
        .collect();
    let counts = torus_histogram(&xs, TV_BINS);
    let width = 1.0 / TV_BINS as f64;
    let cells: Vec<f64> = (0..TV_BINS)
        .map(|i| {
            let lo = i as f64 * width;
            simpson(&|x| psi_density(x, beta), lo, lo + width, 64)
        })
        .collect();
    Ok(ConvolutionCheck {
        tv: tv_counts_vs_probs(&counts, &cells),
        eps,
        bound: 4.0 * eps,
        precondition_met: eps < 0.5,
    })
}

/// Binned distance between empirical lattice samples and a reference pmf on
/// a 64-cell grid of half-width `4 r / sqrt(2 pi)` per axis.
pub fn binned_tv_to_pmf(samples: &[Vec<f64>], pmf: &DgsPmf, r: f64) -> f64 {
    let n = samples.first().map_or(1, Vec::len);
    let grid = GridBinning::with_total(n, TV_BINS, 4.0 * normal_std(r));
    let counts = grid.counts(samples.iter().map(Vec::as_slice));
    tv_counts_vs_probs(&counts, &grid.masses_discrete(pmf.vectors(), pmf.probs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::normal_cdf;
    use crate::stats::residue_counts;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn pmf_of_z_at_zero() {
        let oracle = 1.0 / (-50i32..=50).map(|k| (-PI * (k * k) as f64).exp()).sum::<f64>();
        let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(LatticeBasis::identity(1), 1.0).unwrap()).unwrap();
        assert!((pmf.prob_of(&[0]) - oracle).abs() < 1e-6);
        assert!((pmf.prob_of(&[0]) - 0.92044).abs() < 1e-5);
    }

    #[test]
    fn pmf_symmetric_and_normalized() {
        let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(LatticeBasis::identity(2), 1.7).unwrap()).unwrap();
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for p in pmf.support() {
            let neg: Vec<i64> = p.coeffs.iter().map(|c| -c).collect();
            assert!((pmf.prob_of(&p.coeffs) - pmf.prob_of(&neg)).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_radius_insensitive() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.2], vec![0.3, 1.1]]).unwrap();
        let base = dgs_pmf(&DiscreteGaussianSpec::lattice(b.clone(), 2.0).unwrap()).unwrap();
        let wide = dgs_pmf(&DiscreteGaussianSpec::with_radius(b, None, 2.0, 2.0 * 2.0 * 2f64.sqrt() * 1.5).unwrap())
            .unwrap();
        for (p, &q) in base.support().iter().zip(base.probs()) {
            assert!((wide.prob_of(&p.coeffs) - q).abs() < 1e-9);
        }
        assert!(DiscreteGaussianSpec::with_radius(LatticeBasis::identity(2), None, 2.0, 1.0).is_err());
    }

    #[test]
    fn exact_sampler_frequencies() {
        let spec = DiscreteGaussianSpec::lattice(LatticeBasis::identity(2), 2.0).unwrap();
        let pmf = dgs_pmf(&spec).unwrap();
        let mut r = rng(1);
        let mut counts = vec![0u64; pmf.probs().len()];
        let draws = 100_000;
        let mut long = 0;
        for _ in 0..draws {
            let i = pmf.sample_index(&mut r);
            counts[i] += 1;
            if crate::lattice::norm(&pmf.vectors()[i]) > 2f64.sqrt() * 2.0 {
                long += 1;
            }
        }
        assert!(tv_counts_vs_probs(&counts, pmf.probs()) < 0.02);
        assert!(1.0 - long as f64 / draws as f64 >= 1.0 - 1.0 / 16.0);
        assert_eq!(pmf.sample(&mut rng(5)), pmf.sample(&mut rng(5)));
    }

    #[test]
    fn bootstrap_outputs_lattice_points() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.5], vec![0.2, 1.3]]).unwrap();
        let s = BootstrapSampler::new(&b, 3.0, Mode::Diagnostic).unwrap();
        let mut r = rng(2);
        for _ in 0..1000 {
            let p = s.sample(&mut r);
            assert!(b.contains(&p.vector, 1e-6));
        }
        assert!(matches!(
            BootstrapSampler::new(&b, 3.0, Mode::Strict),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bootstrap_on_z_matches_floor_law() {
        // The floor construction gives P(k) = Phi((k+1)/sd) - Phi(k/sd), a
        // half-unit shift of D_{Z,r}; compare against that law.
        let r_width = 16.0;
        let s = BootstrapSampler::new(&LatticeBasis::identity(1), r_width, Mode::Strict).unwrap();
        let sd = normal_std(r_width);
        let ks: Vec<i64> = (-60..60).collect();
        let floor_law: Vec<f64> = ks
            .iter()
            .map(|&k| normal_cdf((k + 1) as f64, sd) - normal_cdf(k as f64, sd))
            .collect();
        let mut counts = vec![0u64; ks.len()];
        let mut r = rng(3);
        for _ in 0..100_000 {
            let k = s.sample(&mut r).coeffs[0];
            counts[(k + 60) as usize] += 1;
        }
        assert!(tv_counts_vs_probs(&counts, &floor_law) < 0.02);

        // The bias against D_{Z,16} itself is about 2 * (1/2) / (sd sqrt(2 pi)).
        let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(LatticeBasis::identity(1), r_width).unwrap()).unwrap();
        let exact: Vec<f64> = ks.iter().map(|&k| pmf.prob_of(&[k])).collect();
        let bias: f64 = floor_law.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
        assert!((bias - 1.0 / (sd * (2.0 * PI).sqrt())).abs() < 0.01, "{bias}");
    }

    #[test]
    fn exact_and_bootstrap_agree_at_wide_r() {
        for n in 1..=2 {
            let b = LatticeBasis::identity(n);
            let r_width = 64.0;
            let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(b.clone(), r_width).unwrap()).unwrap();
            let s = BootstrapSampler::new(&b, r_width, Mode::Strict).unwrap();
            let mut r = rng(4 + n as u64);
            let samples: Vec<Vec<f64>> = (0..100_000).map(|_| s.sample(&mut r).vector).collect();
            let tv = binned_tv_to_pmf(&samples, &pmf, r_width);
            assert!(tv < 0.05, "n = {n}: {tv}");
        }
    }

    #[test]
    fn shift_invariance() {
        let z2 = LatticeBasis::identity(2);
        let eps = (-4i32..=4)
            .flat_map(|a| (-4i32..=4).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0))
            .map(|(a, b)| (-PI * 4.0 * (a * a + b * b) as f64).exp())
            .sum::<f64>();
        assert!((eps - 1.4e-5).abs() < 1e-6);
        let c0 = check_shift_invariance(&z2, &[0.0, 0.0], 2.0, eps).unwrap();
        assert!(c0.precondition_met);
        assert!((c0.ratio - 1.0).abs() <= eps * (1.0 + 1e-6));
        let mut r = rng(6);
        for _ in 0..20 {
            let c = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let chk = check_shift_invariance(&z2, &c, 2.0, eps).unwrap();
            assert!((chk.ratio - 1.0).abs() <= eps * (1.0 + 1e-6));
        }
        let c = [0.37, -0.21];
        let devs: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&rw| (check_shift_invariance(&z2, &c, rw, eps).unwrap().ratio - 1.0).abs())
            .collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
    }

    #[test]
    fn convolution_smooth_case() {
        let z = LatticeBasis::identity(1);
        let chk = convolution_check(&z, None, 2.0, 2.0, 100_000, &mut rng(7)).unwrap();
        assert!(chk.precondition_met);
        assert!(chk.tv <= 0.03, "{chk:?}");
    }

    #[test]
    fn convolution_below_smoothing() {
        let z = LatticeBasis::identity(1);
        // With r = s = 0.1 the lattice part is almost always 0, so the sum is
        // close to nu_0.1 against nu_0.141: L1 distance about 0.333.
        let a = normal_std(0.1);
        let b = normal_std(0.1 * 2f64.sqrt());
        let x = (2.0 * a * a * b * b * (b / a).ln() / (b * b - a * a)).sqrt();
        let oracle = 2.0 * ((normal_cdf(x, a) - normal_cdf(-x, a)) - (normal_cdf(x, b) - normal_cdf(-x, b)));
        let chk = convolution_check(&z, None, 0.1, 0.1, 100_000, &mut rng(8)).unwrap();
        assert!(!chk.precondition_met);
        assert!((chk.tv - oracle).abs() < 0.05, "{} vs {oracle}", chk.tv);

        let spiky = convolution_check(&z, None, 2.0, 0.1, 100_000, &mut rng(9)).unwrap();
        assert!(!spiky.precondition_met);
        assert!(spiky.tv > 0.5, "{spiky:?}");
    }

    #[test]
    fn convolution_projection() {
        let z = LatticeBasis::identity(1);
        let chk = convolution_projection_check(&z, 2.0, &[0.2], 0.5, 100_000, &mut rng(10)).unwrap();
        assert!(chk.precondition_met);
        assert!(chk.tv <= 0.03, "{chk:?}");
    }

    #[test]
    fn scaled_lattice_is_scaled_distribution() {
        let p = 5.0;
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.3], vec![-0.4, 1.2]]).unwrap();
        let big = dgs_pmf(&DiscreteGaussianSpec::lattice(b.clone(), 3.0).unwrap()).unwrap();
        let small = dgs_pmf(&DiscreteGaussianSpec::lattice(b.scaled(1.0 / p).unwrap(), 3.0 / p).unwrap()).unwrap();
        for (pt, &q) in small.support().iter().zip(small.probs()) {
            assert!((big.prob_of(&pt.coeffs) - q).abs() < 1e-12);
        }
        let mut r = rng(11);
        let scaled: Vec<Vec<f64>> = (0..100_000)
            .map(|_| big.sample_vector(&mut r).iter().map(|v| v / p).collect())
            .collect();
        assert!(binned_tv_to_pmf(&scaled, &small, 3.0 / p) < 0.03);
    }

    #[test]
    fn coset_marginal_uniform() {
        let p = 3u64;
        let pmf = dgs_pmf(&DiscreteGaussianSpec::lattice(LatticeBasis::identity(2), 6.0).unwrap()).unwrap();
        let mut r = rng(12);
        let cells = (0..100_000).map(|_| {
            let c = &pmf.sample(&mut r).coeffs;
            c[0].rem_euclid(p as i64) as u64 * p + c[1].rem_euclid(p as i64) as u64
        });
        let counts = residue_counts(cells, p * p);
        let tv = tv_counts_vs_probs(&counts, &vec![1.0 / 9.0; 9]);
        assert!(tv < 0.05, "{tv}");
    }
}
