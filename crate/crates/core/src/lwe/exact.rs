//! Exact joint distributions on `Z_p^n x Z_p` with rational probabilities,
//! for checking the reduction maps by enumeration at tiny sizes.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::modring::{check_modulus, ModVector};

pub type Q = Ratio<i64>;

/// Cap on `p^(n+1)`.
pub const MAX_CELLS: u64 = 1 << 16;

/// Probability of each pair `(a, b)`, indexed by `a` read as a base-`p`
/// number (first coordinate most significant) times `p` plus `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointPmf {
    n: usize,
    p: u64,
    probs: Vec<Q>,
}

impl JointPmf {
    fn empty(n: usize, p: u64) -> Result<Self> {
        check_modulus(p)?;
        let cells = p
            .checked_pow(n as u32 + 1)
            .filter(|&c| c <= MAX_CELLS)
            .ok_or_else(|| Error::ResourceLimit(format!("p^(n+1) too large for n={n}, p={p}")))?;
        Ok(Self {
            n,
            p,
            probs: vec![Q::from_integer(0); cells as usize],
        })
    }

    pub fn uniform(n: usize, p: u64) -> Result<Self> {
        let mut out = Self::empty(n, p)?;
        let w = Q::new(1, out.probs.len() as i64);
        out.probs.iter_mut().for_each(|x| *x = w);
        Ok(out)
    }

    /// `A_{s,chi}` for a rational error pmf `chi` on `Z_p`.
    pub fn lwe(s: &ModVector, chi: &[Q]) -> Result<Self> {
        let (n, p) = (s.len(), s.modulus());
        if chi.len() as u64 != p {
            return Err(Error::Domain(format!("chi has {} entries, expected {p}", chi.len())));
        }
        if chi.iter().sum::<Q>() != Q::from_integer(1) || chi.iter().any(|x| *x < Q::from_integer(0)) {
            return Err(Error::Domain("chi is not a probability vector".into()));
        }
        let mut out = Self::empty(n, p)?;
        let wa = Q::new(1, p.pow(n as u32) as i64);
        for ai in 0..p.pow(n as u32) {
            let a = out.decode(ai);
            let mean = a.dot(s);
            for (e, pe) in chi.iter().enumerate() {
                let b = (mean + e as u64) % p;
                out.probs[(ai * p + b) as usize] += wa * pe;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn prob(&self, a: &ModVector, b: u64) -> Q {
        self.probs[self.index(a, b)]
    }

    pub fn total(&self) -> Q {
        self.probs.iter().sum()
    }

    fn decode(&self, mut ai: u64) -> ModVector {
        let mut v = vec![0; self.n];
        for slot in v.iter_mut().rev() {
            *slot = ai % self.p;
            ai /= self.p;
        }
        ModVector::new(v, self.p)
    }

    fn index(&self, a: &ModVector, b: u64) -> usize {
        let ai = a.entries().iter().fold(0u64, |acc, &x| acc * self.p + x);
        (ai * self.p + b) as usize
    }

    fn pushforward<F: Fn(&ModVector, u64) -> (ModVector, u64)>(&self, f: F) -> Self {
        let mut out = Self {
            n: self.n,
            p: self.p,
            probs: vec![Q::from_integer(0); self.probs.len()],
        };
        for (idx, w) in self.probs.iter().enumerate() {
            let idx = idx as u64;
            let (a, b) = f(&self.decode(idx / self.p), idx % self.p);
            let j = out.index(&a, b);
            out.probs[j] += w;
        }
        out
    }

    /// Image under `(a, b) -> (a, b + <a, t>)`.
    pub fn push_shift(&self, t: &ModVector) -> Self {
        let p = self.p;
        self.pushforward(|a, b| (a.clone(), (b + a.dot(t)) % p))
    }

    /// Image under `(a, b) -> (a + l e_i, b + l k)` with `l` uniform on `Z_p`.
    pub fn push_coordinate_transform(&self, i: usize, k: u64) -> Self {
        let p = self.p;
        let mut out = self.pushforward(|a, b| (a.clone(), b));
        out.probs.iter_mut().for_each(|x| *x = Q::from_integer(0));
        let wl = Q::new(1, p as i64);
        for l in 0..p {
            let part = self.pushforward(|a, b| {
                let mut a2 = a.clone();
                a2.set(i, (a.get(i).value() + l) % p);
                (a2, (b + l * k) % p)
            });
            for (o, x) in out.probs.iter_mut().zip(part.probs) {
                *o += wl * x;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chis(p: u64) -> Vec<Vec<Q>> {
        match p {
            2 => vec![
                vec![Q::new(3, 4), Q::new(1, 4)],
                vec![Q::new(9, 10), Q::new(1, 10)],
                vec![Q::from_integer(1), Q::from_integer(0)],
            ],
            3 => vec![
                vec![Q::new(1, 2), Q::new(1, 4), Q::new(1, 4)],
                vec![Q::new(4, 5), Q::new(1, 10), Q::new(1, 10)],
                vec![Q::new(2, 3), Q::new(1, 3), Q::from_integer(0)],
            ],
            _ => unreachable!(),
        }
    }

    #[test]
    fn shift_maps_secret_and_fixes_uniform() {
        for p in [2, 3] {
            let u = JointPmf::uniform(1, p).unwrap();
            for chi in chis(p) {
                for s in 0..p {
                    for t in 0..p {
                        let sv = ModVector::new(vec![s], p);
                        let tv = ModVector::new(vec![t], p);
                        let a = JointPmf::lwe(&sv, &chi).unwrap();
                        let expect = JointPmf::lwe(&sv.add(&tv), &chi).unwrap();
                        assert_eq!(a.push_shift(&tv), expect);
                        assert_eq!(u.push_shift(&tv), u);
                    }
                }
            }
        }
    }

    #[test]
    fn coordinate_transform_cases() {
        for p in [2, 3] {
            let u = JointPmf::uniform(1, p).unwrap();
            for chi in chis(p) {
                for s in 0..p {
                    let sv = ModVector::new(vec![s], p);
                    let a = JointPmf::lwe(&sv, &chi).unwrap();
                    for k in 0..p {
                        let image = a.push_coordinate_transform(0, k);
                        if k == s {
                            assert_eq!(image, a);
                        } else {
                            assert_eq!(image, u);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn two_dimensional_transform_and_mass() {
        let p = 3;
        let chi = chis(3)[0].clone();
        let s = ModVector::new(vec![2, 1], p);
        let a = JointPmf::lwe(&s, &chi).unwrap();
        assert_eq!(a.total(), Q::from_integer(1));
        assert_eq!(a.push_coordinate_transform(1, 1), a);
        assert_eq!(a.push_coordinate_transform(1, 0), JointPmf::uniform(2, p).unwrap());
        assert_eq!(a.prob(&ModVector::new(vec![1, 1], p), 0), Q::new(1, 18));
    }

    #[test]
    fn rejects_bad_chi() {
        let s = ModVector::new(vec![0], 3);
        assert!(JointPmf::lwe(&s, &[Q::new(1, 2), Q::new(1, 2)]).is_err());
        assert!(JointPmf::lwe(&s, &[Q::new(1, 2), Q::new(1, 4), Q::new(1, 2)]).is_err());
        assert!(JointPmf::uniform(20, 3).is_err());
    }
}
