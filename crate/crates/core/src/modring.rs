//! Exact arithmetic over `Z_p` and the torus `R/Z`, plus the small amount of
//! linear algebra over prime fields that the attacks and reductions need.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moduli are kept below 2^31 so that products of two residues fit in a `u64`.
pub const MAX_MODULUS: u64 = 1 << 31;

/// Absolute tolerance for torus equality after canonical reduction.
pub const TORUS_TOLERANCE: f64 = 1e-9;

pub fn check_modulus(p: u64) -> Result<()> {
    if !(2..MAX_MODULUS).contains(&p) {
        return Err(Error::Domain(format!("modulus {p} outside [2, 2^31)")));
    }
    Ok(())
}

/// `x mod y := x - floor(x / y) * y`, always in `[0, y)`.
pub fn mod_reduce(x: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("mod_reduce needs y > 0, got {y}")));
    }
    let r = x - (x / y).floor() * y;
    // floor can leave r == y when x is a hair below a multiple of y
    Ok(if r >= y || r < 0.0 { 0.0 } else { r })
}

/// Nearest integer; exact half-integers go to the smaller neighbour.
pub fn round_nearest(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// Least non-negative residue of a signed integer.
pub fn reduce_i64(x: i64, p: u64) -> u64 {
    x.rem_euclid(p as i64) as u64
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Multiplicative inverse modulo `p` via the extended Euclidean algorithm.
pub fn inv_mod(a: u64, p: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i64 % p as i64, p as i64);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(reduce_i64(old_s, p))
}

/// Distance from zero in `Z_p`: `min(x, p - x)`.
pub fn centered_abs(x: u64, p: u64) -> u64 {
    let x = x % p;
    x.min(p - x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModInt {
    value: u64,
    modulus: u64,
}

impl ModInt {
    pub fn new(value: u64, modulus: u64) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        Self {
            value: value % modulus,
            modulus,
        }
    }

    pub fn from_i64(value: i64, modulus: u64) -> Self {
        Self::new(reduce_i64(value, modulus), modulus)
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn inverse(self) -> Option<Self> {
        inv_mod(self.value, self.modulus).map(|v| Self::new(v, self.modulus))
    }

    /// Centred absolute value: distance to 0 around the cycle.
    pub fn centered_abs(self) -> u64 {
        centered_abs(self.value, self.modulus)
    }
}

impl fmt::Display for ModInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl Add for ModInt {
    type Output = ModInt;
    fn add(self, rhs: ModInt) -> ModInt {
        assert_eq!(self.modulus, rhs.modulus);
        ModInt::new(self.value + rhs.value, self.modulus)
    }
}

impl Sub for ModInt {
    type Output = ModInt;
    fn sub(self, rhs: ModInt) -> ModInt {
        assert_eq!(self.modulus, rhs.modulus);
        ModInt::new(self.value + self.modulus - rhs.value, self.modulus)
    }
}

impl Mul for ModInt {
    type Output = ModInt;
    fn mul(self, rhs: ModInt) -> ModInt {
        assert_eq!(self.modulus, rhs.modulus);
        ModInt::new(self.value * rhs.value, self.modulus)
    }
}

impl Neg for ModInt {
    type Output = ModInt;
    fn neg(self) -> ModInt {
        ModInt::new(self.modulus - self.value, self.modulus)
    }
}

/// A vector over `Z_p`. Entries are always reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModVector {
    entries: Vec<u64>,
    modulus: u64,
}

impl ModVector {
    pub fn new(entries: Vec<u64>, modulus: u64) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        let entries = entries.into_iter().map(|e| e % modulus).collect();
        Self { entries, modulus }
    }

    pub fn from_i64(entries: &[i64], modulus: u64) -> Self {
        Self::new(
            entries.iter().map(|&e| reduce_i64(e, modulus)).collect(),
            modulus,
        )
    }

    pub fn zero(n: usize, modulus: u64) -> Self {
        Self::new(vec![0; n], modulus)
    }

    pub fn unit(n: usize, j: usize, modulus: u64) -> Self {
        let mut v = vec![0; n];
        v[j] = 1;
        Self::new(v, modulus)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, modulus: u64, rng: &mut R) -> Self {
        Self {
            entries: (0..n).map(|_| rng.random_range(0..modulus)).collect(),
            modulus,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> ModInt {
        ModInt::new(self.entries[i], self.modulus)
    }

    pub fn set(&mut self, i: usize, value: u64) {
        self.entries[i] = value % self.modulus;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    /// Inner product reduced mod p.
    pub fn dot(&self, other: &ModVector) -> u64 {
        assert_eq!(self.modulus, other.modulus);
        assert_eq!(self.len(), other.len());
        let p = self.modulus;
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0u64, |acc, (&x, &y)| (acc + x * y) % p)
    }

    pub fn add(&self, other: &ModVector) -> ModVector {
        assert_eq!(self.modulus, other.modulus);
        let p = self.modulus;
        ModVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&x, &y)| (x + y) % p)
                .collect(),
            modulus: p,
        }
    }

    pub fn sub(&self, other: &ModVector) -> ModVector {
        assert_eq!(self.modulus, other.modulus);
        let p = self.modulus;
        ModVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&x, &y)| (x + p - y) % p)
                .collect(),
            modulus: p,
        }
    }

    pub fn scale(&self, k: u64) -> ModVector {
        let p = self.modulus;
        let k = k % p;
        ModVector {
            entries: self.entries.iter().map(|&x| x * k % p).collect(),
            modulus: p,
        }
    }
}

/// Dense row-major matrix over `Z_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
    modulus: u64,
}

impl ModMatrix {
    pub fn from_rows(rows: &[Vec<u64>], modulus: u64) -> Result<Self> {
        check_modulus(modulus)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().map(|&x| x % modulus).collect(),
            modulus,
        })
    }

    pub fn from_vectors(rows: &[ModVector]) -> Result<Self> {
        let p = rows
            .first()
            .map(ModVector::modulus)
            .ok_or_else(|| Error::Domain("empty matrix".into()))?;
        if rows.iter().any(|r| r.modulus() != p) {
            return Err(Error::Domain("rows use different moduli".into()));
        }
        let raw: Vec<Vec<u64>> = rows.iter().map(|r| r.entries().to_vec()).collect();
        Self::from_rows(&raw, p)
    }

    pub fn identity(n: usize, modulus: u64) -> Self {
        let mut data = vec![0; n * n];
        for i in 0..n {
            data[i * n + i] = 1;
        }
        Self {
            rows: n,
            cols: n,
            data,
            modulus,
        }
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, modulus: u64, rng: &mut R) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.random_range(0..modulus))
                .collect(),
            modulus,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> ModVector {
        ModVector::new(
            self.data[i * self.cols..(i + 1) * self.cols].to_vec(),
            self.modulus,
        )
    }

    pub fn transpose(&self) -> ModMatrix {
        let mut data = vec![0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        ModMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
            modulus: self.modulus,
        }
    }

    pub fn mul_vec(&self, v: &ModVector) -> ModVector {
        assert_eq!(v.len(), self.cols);
        assert_eq!(v.modulus(), self.modulus);
        let out = (0..self.rows).map(|i| self.row(i).dot(v)).collect();
        ModVector::new(out, self.modulus)
    }
}

/// Solves `A s = b (mod p)` for prime `p`.
///
/// Pivots on the first nonzero entry of each column, scanning columns left to
/// right. Returns `Ok(None)` when the system is inconsistent or does not pin
/// down every coordinate.
pub fn gauss_solve(a: &ModMatrix, b: &ModVector) -> Result<Option<ModVector>> {
    let p = a.modulus();
    if !is_prime(p) || p >= MAX_MODULUS {
        return Err(Error::UnsupportedModulus(p));
    }
    if b.modulus() != p || b.len() != a.rows() {
        return Err(Error::Domain(format!(
            "right-hand side has length {} mod {}, matrix is {}x{} mod {}",
            b.len(),
            b.modulus(),
            a.rows(),
            a.cols(),
            p
        )));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let width = cols + 1;
    let mut m: Vec<u64> = Vec::with_capacity(rows * width);
    for i in 0..rows {
        m.extend((0..cols).map(|j| a.get(i, j)));
        m.push(b.entries()[i]);
    }

    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| m[r * width + col] != 0) else {
            continue;
        };
        if pivot != rank {
            for j in 0..width {
                m.swap(pivot * width + j, rank * width + j);
            }
        }
        let inv = inv_mod(m[rank * width + col], p).expect("nonzero element of a prime field");
        for j in 0..width {
            m[rank * width + j] = m[rank * width + j] * inv % p;
        }
        for r in 0..rows {
            let factor = m[r * width + col];
            if r == rank || factor == 0 {
                continue;
            }
            for j in 0..width {
                let sub = factor * m[rank * width + j] % p;
                m[r * width + j] = (m[r * width + j] + p - sub) % p;
            }
        }
        rank += 1;
    }

    if (rank..rows).any(|r| m[r * width + cols] != 0) {
        return Ok(None);
    }
    if rank < cols {
        return Ok(None);
    }
    let s = (0..cols).map(|i| m[i * width + cols]).collect();
    Ok(Some(ModVector::new(s, p)))
}

/// A point of `T = R/Z`, stored as its representative in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Torus(f64);

impl Torus {
    pub fn new(x: f64) -> Self {
        let r = x - x.floor();
        Torus(if r >= 1.0 { 0.0 } else { r })
    }

    pub fn zero() -> Self {
        Torus(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Distance to 0 around the circle, in `[0, 1/2]`.
    pub fn abs(self) -> f64 {
        self.0.min(1.0 - self.0)
    }

    /// Centred representative in `[-1/2, 1/2)`.
    pub fn centered(self) -> f64 {
        if self.0 >= 0.5 {
            self.0 - 1.0
        } else {
            self.0
        }
    }

    pub fn approx_eq(self, other: Torus) -> bool {
        (self - other).abs() < TORUS_TOLERANCE
    }
}

impl Add for Torus {
    type Output = Torus;
    fn add(self, rhs: Torus) -> Torus {
        Torus::new(self.0 + rhs.0)
    }
}

impl Sub for Torus {
    type Output = Torus;
    fn sub(self, rhs: Torus) -> Torus {
        Torus::new(self.0 - rhs.0)
    }
}

impl Neg for Torus {
    type Output = Torus;
    fn neg(self) -> Torus {
        Torus::new(-self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn mod_reduce_examples() {
        assert_eq!(mod_reduce(7.0, 3.0).unwrap(), 1.0);
        assert_eq!(mod_reduce(-1.0, 3.0).unwrap(), 2.0);
        assert_eq!(mod_reduce(2.5, 1.0).unwrap(), 0.5);
        assert!(matches!(mod_reduce(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mod_reduce(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mod_reduce_is_periodic_on_grid() {
        for yi in 1..=12 {
            let y = yi as f64 * 0.25;
            for xi in -40..=40 {
                let x = xi as f64 * 0.125;
                let base = mod_reduce(x, y).unwrap();
                assert!((0.0..y).contains(&base));
                for k in -5i32..=5 {
                    let shifted = mod_reduce(x + k as f64 * y, y).unwrap();
                    assert!((shifted - base).abs() < 1e-12, "x={x} y={y} k={k}");
                }
            }
        }
    }

    #[test]
    fn round_nearest_ties_go_down() {
        assert_eq!(round_nearest(1.4), 1);
        assert_eq!(round_nearest(0.5), 0);
        assert_eq!(round_nearest(-0.5), -1);
        assert_eq!(round_nearest(1.5), 1);
        assert_eq!(round_nearest(1.51), 2);
        assert_eq!(round_nearest(-1.49), -1);
    }

    #[test]
    fn primes() {
        assert!(is_prime(2) && is_prime(3) && is_prime(1031) && is_prime(4099));
        assert!(!is_prime(1) && !is_prime(1024) && !is_prime(4097));
        assert_eq!(next_prime(1024), 1031);
        assert_eq!(next_prime(4096), 4099);
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(2, 4), None);
    }

    #[test]
    fn modint_arithmetic() {
        let a = ModInt::new(5, 7);
        let b = ModInt::new(4, 7);
        assert_eq!((a + b).value(), 2);
        assert_eq!((a - b).value(), 1);
        assert_eq!((b - a).value(), 6);
        assert_eq!((a * b).value(), 6);
        assert_eq!((-a).value(), 2);
        assert_eq!(ModInt::from_i64(-1, 7).value(), 6);
        assert_eq!(a.inverse().unwrap().value(), 3);
        assert_eq!(ModInt::new(6, 7).centered_abs(), 1);
    }

    #[test]
    fn gauss_identity() {
        let a = ModMatrix::identity(3, 7);
        let b = ModVector::new(vec![1, 2, 3], 7);
        assert_eq!(gauss_solve(&a, &b).unwrap(), Some(b));
    }

    #[test]
    fn gauss_inconsistent() {
        let a = ModMatrix::from_rows(&[vec![1, 2], vec![1, 2]], 7).unwrap();
        let b = ModVector::new(vec![3, 4], 7);
        assert_eq!(gauss_solve(&a, &b).unwrap(), None);
    }

    #[test]
    fn gauss_rank_deficient() {
        let a = ModMatrix::from_rows(&[vec![1, 2], vec![2, 4]], 7).unwrap();
        let b = ModVector::new(vec![3, 6], 7);
        assert_eq!(gauss_solve(&a, &b).unwrap(), None);
    }

    #[test]
    fn gauss_composite_modulus() {
        let a = ModMatrix::identity(2, 8);
        let b = ModVector::new(vec![1, 1], 8);
        assert!(matches!(
            gauss_solve(&a, &b),
            Err(Error::UnsupportedModulus(8))
        ));
    }

    #[test]
    fn gauss_planted_4x4_mod_13() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut solved = 0;
        while solved < 20 {
            let a = ModMatrix::random(4, 4, 13, &mut rng);
            let s = ModVector::random(4, 13, &mut rng);
            let b = a.mul_vec(&s);
            if let Some(found) = gauss_solve(&a, &b).unwrap() {
                // multiply back: the oracle for a planted solution
                assert_eq!(a.mul_vec(&found), b);
                assert_eq!(found, s);
                solved += 1;
            }
        }
    }

    #[test]
    fn gauss_overdetermined_consistent() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = ModMatrix::random(12, 5, 11, &mut rng);
        let s = ModVector::random(5, 11, &mut rng);
        let b = a.mul_vec(&s);
        assert_eq!(gauss_solve(&a, &b).unwrap(), Some(s));
    }

    #[test]
    fn gauss_solves_every_full_rank_system() {
        let mut rng = ChaCha20Rng::seed_from_u64(1000);
        let primes = [2u64, 3, 5, 7, 11, 13, 101, 65_537];
        let mut trials = 0;
        while trials < 1000 {
            let p = primes[rng.random_range(0..primes.len())];
            let n = rng.random_range(1..=8);
            let a = ModMatrix::random(n, n, p, &mut rng);
            let s = ModVector::random(n, p, &mut rng);
            let b = a.mul_vec(&s);
            match gauss_solve(&a, &b).unwrap() {
                Some(found) => {
                    assert_eq!(found, s);
                    trials += 1;
                }
                // singular draw: the zero right-hand side must then also be underdetermined
                None => {
                    let zero = ModVector::zero(n, p);
                    assert_eq!(gauss_solve(&a, &zero).unwrap(), None);
                }
            }
        }
    }

    #[test]
    fn torus_basics() {
        assert_eq!(Torus::new(1.25).value(), 0.25);
        assert_eq!(Torus::new(-0.25).value(), 0.75);
        assert!((Torus::new(0.75).abs() - 0.25).abs() < 1e-15);
        assert!((Torus::new(0.9) + Torus::new(0.2)).approx_eq(Torus::new(0.1)));
        assert!((Torus::new(0.1) - Torus::new(0.2)).approx_eq(Torus::new(0.9)));
        assert_eq!(Torus::new(-1e-18).value(), 0.0);
        assert!((Torus::new(0.7).centered() + 0.3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_nearest_residual_bounds(x in -1e6f64..1e6) {
            let d = round_nearest(x) as f64 - x;
            prop_assert!((-0.5..=0.5).contains(&d));
            if d == -0.5 {
                prop_assert_eq!(x.fract().abs(), 0.5);
            }
        }

        #[test]
        fn torus_abs_symmetric(x in 0.0f64..1.0) {
            let t = Torus::new(x);
            let mirrored = Torus::new(1.0 - x);
            prop_assert!((t.abs() - mirrored.abs()).abs() < 1e-12);
            prop_assert!(t.abs() <= 0.5);
        }

        #[test]
        fn mod_reduce_shift_invariant(x in -1e3f64..1e3, y in 0.01f64..50.0, k in -20i64..20) {
            let a = mod_reduce(x, y).unwrap();
            let b = mod_reduce(x + k as f64 * y, y).unwrap();
            let diff = (a - b).abs();
            prop_assert!(diff < 1e-9 || (y - diff).abs() < 1e-9);
        }
    }
}
