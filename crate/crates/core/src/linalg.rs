//! Dense linear-algebra helpers shared by the spectral and solver code.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{KrrError, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in nonincreasing order.
#[derive(Clone, Debug)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition sorted by decreasing eigenvalue.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SortedEigen> {
    if a.nrows() != a.ncols() {
        return Err(KrrError::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(KrrError::NonFinite("symmetric eigendecomposition input"));
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(a.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SortedEigen { values, vectors })
}

/// Eigenvalues below this are treated as zero by [`apply_inverse`] at `shift = 0`.
pub fn pinv_cutoff(n: usize, sigma_max: f64) -> f64 {
    n as f64 * f64::EPSILON * sigma_max.abs()
}

/// Computes `(A + shift I)^+ b` from a sorted eigendecomposition of `A`.
///
/// Shifted eigenvalues at or below `n * eps * max|shifted|` are dropped, which
/// gives the minimum-norm solution when the shifted matrix is singular.
pub fn apply_inverse(eig: &SortedEigen, shift: f64, b: &DVector<f64>) -> DVector<f64> {
    let n = eig.values.len();
    let shifted: Vec<f64> = eig.values.iter().map(|v| v + shift).collect();
    let top = shifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = pinv_cutoff(n, top);
    let proj = eig.vectors.tr_mul(b);
    let scaled = DVector::from_iterator(
        n,
        proj.iter()
            .zip(&shifted)
            .map(|(p, s)| if *s > cut { p / s } else { 0.0 }),
    );
    &eig.vectors * scaled
}

/// Binomial coefficient with overflow checking.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Probabilists' Gauss–Hermite rule: nodes and weights with
/// `sum w_i f(x_i) ≈ E f(G)` for `G ~ N(0, 1)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch construction from the Hermite Jacobi matrix.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut jac = DMatrix::zeros(n, n);
        for i in 1..n {
            let off = (i as f64).sqrt();
            jac[(i - 1, i)] = off;
            jac[(i, i - 1)] = off;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrize to remove eigen-solver noise
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Shared 64-node rule.
    pub fn n64() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(64))
    }

    /// Shared 200-node rule.
    pub fn n200() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(200))
    }

    /// `E f(G)` for standard Gaussian `G`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

/// Ordinary least squares fit `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
