//! Lattice bases, duals, LLL, Babai's nearest plane, and exact enumeration
//! oracles for small dimension (shortest vectors, successive minima, closest
//! vectors, Gaussian masses and the smoothing parameter).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::rho_norm2;
use crate::modring::round_nearest;

/// Largest dimension accepted by the enumeration oracles.
pub const MAX_ENUM_DIM: usize = 6;

/// Largest predicted enumeration size.
pub const MAX_ENUM_POINTS: f64 = 1e7;

pub const MAX_CONDITION: f64 = 1e12;

pub const DEFAULT_LLL_DELTA: f64 = 0.75;

const EPS: f64 = 1e-9;

/// Serialized form: `{"n": int, "columns": [[real]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisFile {
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

/// A full-rank lattice basis stored by columns, with inverse, determinant
/// and Gram-Schmidt data computed at construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BasisFile", into = "BasisFile")]
pub struct LatticeBasis {
    cols: DMatrix<f64>,
    inv: DMatrix<f64>,
    det: f64,
    /// Gram-Schmidt vectors `b*_j` as columns.
    gso: DMatrix<f64>,
    /// `mu[(i, j)] = <b_i, b*_j> / |b*_j|^2` for `j < i`.
    mu: DMatrix<f64>,
    gso_norm2: Vec<f64>,
}

impl TryFrom<BasisFile> for LatticeBasis {
    type Error = Error;

    fn try_from(file: BasisFile) -> Result<Self> {
        if file.columns.len() != file.n || file.columns.iter().any(|c| c.len() != file.n) {
            return Err(Error::Config(format!(
                "basis file declares n = {} but columns are not {0} x {0}",
                file.n
            )));
        }
        LatticeBasis::from_columns(&file.columns)
    }
}

impl From<LatticeBasis> for BasisFile {
    fn from(b: LatticeBasis) -> Self {
        BasisFile {
            n: b.dim(),
            columns: (0..b.dim()).map(|j| b.column(j)).collect(),
        }
    }
}

fn gram_schmidt(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let n = b.ncols();
    let mut gso = b.clone();
    let mut mu = DMatrix::<f64>::identity(n, n);
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let bi = b.column(i).clone_owned();
        let mut v = bi.clone();
        for j in 0..i {
            let m = bi.dot(&gso.column(j)) / norms[j];
            mu[(i, j)] = m;
            v -= gso.column(j) * m;
        }
        norms[i] = v.norm_squared();
        gso.set_column(i, &v);
    }
    (gso, mu, norms)
}

impl LatticeBasis {
    pub fn from_matrix(cols: DMatrix<f64>) -> Result<Self> {
        let n = cols.nrows();
        if n == 0 || cols.ncols() != n {
            return Err(Error::Domain("basis must be a non-empty square matrix".into()));
        }
        if cols.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("basis entries must be finite".into()));
        }
        let sv = cols.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if cond > MAX_CONDITION {
            return Err(Error::IllConditioned(cond));
        }
        let inv = cols
            .clone()
            .try_inverse()
            .ok_or(Error::IllConditioned(f64::INFINITY))?;
        let det = cols.determinant();
        let (gso, mu, gso_norm2) = gram_schmidt(&cols);
        Ok(Self {
            cols,
            inv,
            det,
            gso,
            mu,
            gso_norm2,
        })
    }

    /// Builds a basis from its column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("basis columns must all have length n".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(DMatrix::identity(n, n)).expect("identity is well conditioned")
    }

    pub fn dim(&self) -> usize {
        self.cols.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cols.column(j).iter().copied().collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.cols.column(j).norm()).collect()
    }

    pub fn gso_norms2(&self) -> &[f64] {
        &self.gso_norm2
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        self.mu[(i, j)]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(&self.cols * c)
    }

    /// `L* = (B^T)^{-1}`.
    pub fn dual(&self) -> Result<Self> {
        Self::from_matrix(self.inv.transpose())
    }

    /// Real coefficients `B^{-1} x`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        (&self.inv * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Integer coefficients of `x`, if `x` is a lattice point within `tol`.
    pub fn integer_coefficients(&self, x: &[f64], tol: f64) -> Option<Vec<i64>> {
        let c = self.coefficients(x);
        let k: Vec<i64> = c.iter().map(|&v| v.round() as i64).collect();
        c.iter()
            .zip(&k)
            .all(|(&v, &r)| (v - r as f64).abs() <= tol)
            .then_some(k)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.integer_coefficients(x, tol).is_some()
    }

    pub fn point(&self, coeffs: &[i64]) -> LatticePoint {
        let c = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&v| v as f64));
        LatticePoint {
            coeffs: coeffs.to_vec(),
            vector: (&self.cols * c).iter().copied().collect(),
        }
    }

    /// The basis `B U` for an integer matrix `U` given by columns.
    fn transform(&self, u: &[Vec<i64>]) -> Result<Self> {
        let n = self.dim();
        let um = DMatrix::from_fn(n, n, |i, j| u[j][i] as f64);
        Self::from_matrix(&self.cols * um)
    }
}

/// A lattice vector together with its integer coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub vector: Vec<f64>,
}

impl LatticePoint {
    pub fn norm(&self) -> f64 {
        norm(&self.vector)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn dual_basis(b: &LatticeBasis) -> Result<LatticeBasis> {
    b.dual()
}

/// The unique `y` in the fundamental parallelepiped with `y - x` in `L`.
pub fn reduce_mod_parallelepiped(x: &[f64], b: &LatticeBasis) -> Vec<f64> {
    let mut c = b.coefficients(x);
    for v in &mut c {
        *v -= v.floor();
        if *v >= 1.0 {
            *v = 0.0;
        }
    }
    (b.matrix() * DVector::from_vec(c)).iter().copied().collect()
}

/// LLL reduction together with the unimodular transform `U` (by columns),
/// so the reduced basis is exactly `B U`.
pub fn lll_with_transform(b: &LatticeBasis, delta: f64) -> Result<(LatticeBasis, Vec<Vec<i64>>)> {
    if !(delta > 0.25 && delta < 1.0) {
        return Err(Error::Domain(format!("LLL delta must lie in (1/4, 1), got {delta}")));
    }
    let n = b.dim();
    let mut cols: Vec<DVector<f64>> = (0..n).map(|j| b.matrix().column(j).clone_owned()).collect();
    let mut u: Vec<Vec<i64>> = (0..n)
        .map(|j| (0..n).map(|i| i64::from(i == j)).collect())
        .collect();

    let gso_of = |cols: &[DVector<f64>]| {
        let m = DMatrix::from_columns(cols);
        gram_schmidt(&m)
    };

    let (_, mut mu, mut norms) = gso_of(&cols);
    let mut k = 1;
    let mut iterations = 0usize;
    while k < n {
        iterations += 1;
        if iterations > 100_000 {
            return Err(Error::ResourceLimit("LLL did not converge".into()));
        }
        for j in (0..k).rev() {
            let q = round_nearest(mu[(k, j)]);
            if q != 0 {
                let bj = cols[j].clone();
                cols[k] -= bj * q as f64;
                for i in 0..n {
                    u[k][i] -= q * u[j][i];
                }
                for l in 0..=j {
                    let mjl = if l == j { 1.0 } else { mu[(j, l)] };
                    mu[(k, l)] -= q as f64 * mjl;
                }
            }
        }
        if norms[k] >= (delta - mu[(k, k - 1)] * mu[(k, k - 1)]) * norms[k - 1] {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            u.swap(k, k - 1);
            (_, mu, norms) = gso_of(&cols);
            k = (k - 1).max(1);
        }
    }
    Ok((b.transform(&u)?, u))
}

pub fn lll_reduce(b: &LatticeBasis, delta: f64) -> Result<LatticeBasis> {
    lll_with_transform(b, delta).map(|(r, _)| r)
}

/// Size reduction and the Lovasz condition, with a small float slack.
pub fn is_lll_reduced(b: &LatticeBasis, delta: f64) -> bool {
    let n = b.dim();
    let norms = b.gso_norms2();
    for i in 1..n {
        for j in 0..i {
            if b.mu(i, j).abs() > 0.5 + 1e-9 {
                return false;
            }
        }
        let m = b.mu(i, i - 1);
        if norms[i] < (delta - m * m) * norms[i - 1] * (1.0 - 1e-9) {
            return false;
        }
    }
    true
}

/// Babai's nearest plane algorithm. Exact on `Z^n`; within `2^{n/2}` of the
/// true distance on an LLL-reduced basis.
pub fn babai_nearest_plane(b: &LatticeBasis, x: &[f64]) -> LatticePoint {
    let n = b.dim();
    let mut residual = DVector::from_column_slice(x);
    let mut coeffs = vec![0i64; n];
    for j in (0..n).rev() {
        let c = round_nearest(residual.dot(&b.gso.column(j)) / b.gso_norm2[j]);
        coeffs[j] = c;
        residual -= b.cols.column(j) * c as f64;
    }
    b.point(&coeffs)
}

fn enum_guard(b: &LatticeBasis, radius: f64) -> Result<()> {
    let n = b.dim();
    if n > MAX_ENUM_DIM {
        return Err(Error::ResourceLimit(format!(
            "enumeration limited to dimension {MAX_ENUM_DIM}, got {n}"
        )));
    }
    let predicted: f64 = b
        .gso_norm2
        .iter()
        .map(|&g| 2.0 * radius / g.sqrt() + 1.0)
        .product();
    if predicted > MAX_ENUM_POINTS {
        return Err(Error::ResourceLimit(format!(
            "enumeration of radius {radius} would visit about {predicted:.2e} points"
        )));
    }
    Ok(())
}

/// Fincke-Pohst over the given basis: calls `visit(coeffs, dist2)` for every
/// coefficient vector with `|B c - center|^2 <= radius^2` (plus slack).
fn fincke_pohst<F: FnMut(&[i64], f64)>(b: &LatticeBasis, center: &[f64], radius: f64, visit: &mut F) {
    let n = b.dim();
    let t = DVector::from_column_slice(center);
    let tau: Vec<f64> = (0..n)
        .map(|j| t.dot(&b.gso.column(j)) / b.gso_norm2[j])
        .collect();
    let bound = radius * radius * (1.0 + EPS) + EPS;
    let mut x = vec![0i64; n];

    fn rec<F: FnMut(&[i64], f64)>(
        level: usize,
        partial: f64,
        b: &LatticeBasis,
        tau: &[f64],
        bound: f64,
        x: &mut Vec<i64>,
        visit: &mut F,
    ) {
        let n = x.len();
        let mut c = tau[level];
        for i in level + 1..n {
            c -= b.mu[(i, level)] * x[i] as f64;
        }
        let g = b.gso_norm2[level];
        let rem = bound - partial;
        if rem < 0.0 {
            return;
        }
        let half = (rem / g).sqrt();
        let lo = (c - half).ceil() as i64;
        let hi = (c + half).floor() as i64;
        for v in lo..=hi {
            let d = (v as f64 - c) * (v as f64 - c) * g + partial;
            if d > bound {
                continue;
            }
            x[level] = v;
            if level == 0 {
                visit(x, d);
            } else {
                rec(level - 1, d, b, tau, bound, x, visit);
            }
        }
        x[level] = 0;
    }

    rec(n - 1, 0.0, b, &tau, bound, &mut x, visit);
}

/// Exact enumeration of lattice points within `radius` of `center` (origin
/// when `None`). Coefficients refer to the input basis.
pub fn enumerate_around(
    b: &LatticeBasis,
    center: Option<&[f64]>,
    radius: f64,
) -> Result<Vec<LatticePoint>> {
    let n = b.dim();
    if n > MAX_ENUM_DIM {
        return Err(Error::ResourceLimit(format!(
            "enumeration limited to dimension {MAX_ENUM_DIM}, got {n}"
        )));
    }
    let (red, u) = lll_with_transform(b, DEFAULT_LLL_DELTA)?;
    enum_guard(&red, radius)?;
    let zero = vec![0.0; n];
    let center = center.unwrap_or(&zero);
    let mut out = Vec::new();
    fincke_pohst(&red, center, radius, &mut |c: &[i64], _| {
        let orig: Vec<i64> = (0..n)
            .map(|i| (0..n).map(|j| u[j][i] * c[j]).sum())
            .collect();
        let p = b.point(&orig);
        if distance(&p.vector, center) <= radius * (1.0 + EPS) + EPS {
            out.push(p);
        }
    });
    Ok(out)
}

/// Every lattice point of norm at most `radius`.
pub fn enumerate_points(b: &LatticeBasis, radius: f64) -> Result<Vec<LatticePoint>> {
    enumerate_around(b, None, radius)
}

/// Greedy shortest linearly independent set among `points` (sorted by norm).
pub fn greedy_independent(points: &[LatticePoint], n: usize) -> Vec<LatticePoint> {
    let mut sorted: Vec<&LatticePoint> = points.iter().filter(|p| !p.is_zero()).collect();
    sorted.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen = Vec::new();
    for p in sorted {
        let mut v = DVector::from_column_slice(&p.vector);
        let scale = v.norm();
        for q in &basis {
            let c = v.dot(q);
            v -= q * c;
        }
        if v.norm() > 1e-9 * scale.max(1.0) {
            basis.push(v.normalize());
            chosen.push(p.clone());
            if chosen.len() == n {
                break;
            }
        }
    }
    chosen
}

/// Rank of a set of real vectors, with relative tolerance.
pub fn rank(vectors: &[Vec<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1e-300)).count()
}

/// A shortest set of `n` independent lattice vectors and `lambda_1`.
pub fn shortest_independent(b: &LatticeBasis) -> Result<(f64, Vec<LatticePoint>)> {
    let red = lll_reduce(b, DEFAULT_LLL_DELTA)?;
    let radius = red.column_norms().into_iter().fold(0.0, f64::max);
    let pts = enumerate_points(b, radius)?;
    let lambda1 = pts
        .iter()
        .filter(|p| !p.is_zero())
        .map(LatticePoint::norm)
        .fold(f64::INFINITY, f64::min);
    let set = greedy_independent(&pts, b.dim());
    if set.len() < b.dim() {
        return Err(Error::NotFound("enumeration found no full-rank set".into()));
    }
    Ok((lambda1, set))
}

/// `(lambda_1, lambda_n)` by exact enumeration.
pub fn successive_minima(b: &LatticeBasis) -> Result<(f64, f64)> {
    let (l1, set) = shortest_independent(b)?;
    Ok((l1, set.last().map(LatticePoint::norm).unwrap_or(l1)))
}

/// The exact closest lattice point; a second point at the same distance is
/// reported as a tie.
pub fn closest_vector_exact(b: &LatticeBasis, x: &[f64]) -> Result<LatticePoint> {
    let red = lll_reduce(b, DEFAULT_LLL_DELTA)?;
    let upper = distance(&babai_nearest_plane(&red, x).vector, x);
    let pts = enumerate_around(b, Some(x), upper)?;
    let mut best: Option<(f64, LatticePoint)> = None;
    let mut second = f64::INFINITY;
    for p in pts {
        let d = distance(&p.vector, x);
        match &best {
            Some((bd, _)) if d >= *bd => second = second.min(d),
            _ => {
                if let Some((bd, _)) = best.take() {
                    second = second.min(bd);
                }
                best = Some((d, p));
            }
        }
    }
    let (d, p) = best.ok_or_else(|| Error::NotFound("empty enumeration".into()))?;
    if second - d <= 1e-9 * d.max(1.0) {
        return Err(Error::Tie(d));
    }
    Ok(p)
}

/// Enumeration radius capturing all but a `tol` fraction of a `rho_s` sum.
pub fn truncation_radius(s: f64, n: usize, tol: f64) -> f64 {
    (s * (n as f64 * (1.0 / tol).ln() / PI).sqrt()).ceil()
}

/// `rho_s(L + shift)` (or over `L \ {0}` when `exclude_zero`), by truncated
/// enumeration with relative tail tolerance `tol`.
pub fn gaussian_mass(
    b: &LatticeBasis,
    s: f64,
    shift: Option<&[f64]>,
    exclude_zero: bool,
    tol: f64,
) -> Result<f64> {
    let n = b.dim();
    let center: Option<Vec<f64>> = shift.map(|c| c.iter().map(|v| -v).collect());
    let radius = truncation_radius(s, n, tol);
    let pts = enumerate_around(b, center.as_deref(), radius)?;
    Ok(pts
        .iter()
        .filter(|p| !(exclude_zero && p.is_zero()))
        .map(|p| {
            let norm2: f64 = match shift {
                Some(c) => p.vector.iter().zip(c).map(|(v, c)| (v + c) * (v + c)).sum(),
                None => p.vector.iter().map(|v| v * v).sum(),
            };
            rho_norm2(norm2, s)
        })
        .sum())
}

/// `eta_eps(L)`: the smallest `s` with `rho_{1/s}(L* \ {0}) <= eps`, by
/// bisection between the dual-minimum lower bound and the `lambda_n` upper
/// bound, to relative precision 1e-6.
pub fn smoothing_parameter(b: &LatticeBasis, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = b.dim();
    let dual = b.dual()?;
    let (dual_l1, _) = successive_minima(&dual)?;
    let (_, ln) = successive_minima(b)?;
    let lower = ((1.0 / eps).ln() / PI).sqrt() / dual_l1;
    let upper = ((2.0 * n as f64 * (1.0 + 1.0 / eps)).ln() / PI).sqrt() * ln;

    // enumerate the dual once at the widest radius the bisection needs
    let radius = truncation_radius(1.0 / lower, n, eps * 1e-6);
    let norms2: Vec<f64> = enumerate_points(&dual, radius)?
        .into_iter()
        .filter(|p| !p.is_zero())
        .map(|p| p.vector.iter().map(|v| v * v).sum())
        .collect();
    let mass = |s: f64| norms2.iter().map(|&w| rho_norm2(w, 1.0 / s)).sum::<f64>();

    if mass(lower) <= eps {
        return Ok(lower);
    }
    let (mut lo, mut hi) = (lower, upper.max(lower));
    while mass(hi) > eps {
        hi *= 2.0;
    }
    while (hi - lo) > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
