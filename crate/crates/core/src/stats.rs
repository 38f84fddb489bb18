//! Empirical distribution helpers: histograms and total-variation gaps
//! between sample counts and reference cell probabilities.

/// Counts of torus samples in `bins` equal-width cells of `[0, 1)`.
pub fn torus_histogram(xs: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let r = x - x.floor();
        let i = ((r * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
}

/// Counts of residues in `Z_p`.
pub fn residue_counts(xs: impl IntoIterator<Item = u64>, p: u64) -> Vec<u64> {
    let mut counts = vec![0u64; p as usize];
    for x in xs {
        counts[(x % p) as usize] += 1;
    }
    counts
}

/// `sum |counts/N - probs|`: the L1 gap between an empirical law and a
/// reference law on the same cells.
pub fn tv_counts_vs_probs(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len(), "cell count mismatch");
    let total: u64 = counts.iter().sum();
    let n = total.max(1) as f64;
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &q)| (c as f64 / n - q).abs())
        .sum()
}

/// L1 gap between two empirical laws on the same cells.
pub fn tv_counts(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cell count mismatch");
    let na = a.iter().sum::<u64>().max(1) as f64;
    let nb = b.iter().sum::<u64>().max(1) as f64;
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .sum()
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// Binomial standard deviation of a frequency estimate.
pub fn binomial_sigma(q: f64, trials: usize) -> f64 {
    (q * (1.0 - q) / trials as f64).sqrt()
}

/// Equal-width grid on the cube `[-w, w]^dim` with the outermost cells
/// extended to infinity, so every point lands in some cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBinning {
    pub dim: usize,
    pub per_axis: usize,
    pub half_width: f64,
}

impl GridBinning {
    /// A grid with about `total` cells split evenly over the axes
    /// (64 cells: 64 for one dimension, 8 x 8 for two, 4 x 4 x 4 for three).
    pub fn with_total(dim: usize, total: usize, half_width: f64) -> Self {
        let per_axis = (total as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
        Self {
            dim,
            per_axis,
            half_width,
        }
    }

    pub fn cells(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    fn axis_index(&self, x: f64) -> usize {
        let t = (x + self.half_width) / (2.0 * self.half_width) * self.per_axis as f64;
        (t.floor().max(0.0) as usize).min(self.per_axis - 1)
    }

    pub fn index(&self, x: &[f64]) -> usize {
        x.iter()
            .rev()
            .fold(0, |acc, &v| acc * self.per_axis + self.axis_index(v))
    }

    pub fn counts<'a>(&self, xs: impl IntoIterator<Item = &'a [f64]>) -> Vec<u64> {
        let mut counts = vec![0u64; self.cells()];
        for x in xs {
            counts[self.index(x)] += 1;
        }
        counts
    }

    /// Cell masses of a discrete law given by support points and weights.
    pub fn masses_discrete(&self, points: &[Vec<f64>], probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells()];
        for (x, &q) in points.iter().zip(probs) {
            out[self.index(x)] += q;
        }
        out
    }

    /// Cell masses of a centred isotropic normal with standard deviation `std`.
    pub fn masses_normal(&self, std: f64) -> Vec<f64> {
        let k = self.per_axis;
        let axis: Vec<f64> = (0..k)
            .map(|i| {
                let edge = |j: usize| -self.half_width + 2.0 * self.half_width * j as f64 / k as f64;
                let hi = if i + 1 == k { 1.0 } else { crate::gaussian::normal_cdf(edge(i + 1), std) };
                let lo = if i == 0 { 0.0 } else { crate::gaussian::normal_cdf(edge(i), std) };
                hi - lo
            })
            .collect();
        (0..self.cells())
            .map(|mut c| {
                let mut m = 1.0;
                for _ in 0..self.dim {
                    m *= axis[c % k];
                    c /= k;
                }
                m
            })
            .collect()
    }
}
