//! Kernel families, explicit feature maps and Gram matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{KrrError, Result};
use crate::linalg::binomial;
use crate::par::{map_blocks, map_range, Parallelism};
use crate::spectra::SpectrumModel;

/// Largest explicit polynomial feature dimension.
pub const POLY_FEATURE_CAP: u128 = 100_000;

const ROW_BLOCK: usize = 256;

/// A computable kernel with its ambient input dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `K(x, y) = h(<x, y> / d)` with `h(t) = Σ_i coeffs[i] t^i`.
    #[serde(rename = "poly")]
    InnerProductPoly { coeffs: Vec<f64>, d: usize },
    /// `K(x, y) = (1/m) <σ(Wx), σ(Wy)>` for an `m × d` weight matrix.
    Conjugate {
        #[serde(with = "matrix_rows")]
        weights: DMatrix<f64>,
        activation: Activation,
    },
    /// Plain inner product on spectral coordinates; the design carries the covariance.
    LinearCov { spectrum: SpectrumModel },
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("weight rows have unequal lengths"));
        }
        Ok(DMatrix::from_row_iterator(
            rows.len(),
            ncols,
            rows.into_iter().flatten(),
        ))
    }
}

impl KernelSpec {
    pub fn poly(coeffs: Vec<f64>, d: usize) -> Result<Self> {
        let k = KernelSpec::InnerProductPoly { coeffs, d };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::InnerProductPoly { coeffs, d } => {
                if coeffs.is_empty() {
                    return Err(KrrError::param("coeffs", "at least alpha_0 is required"));
                }
                if coeffs.iter().any(|a| !a.is_finite() || *a < 0.0) {
                    return Err(KrrError::param("coeffs", "coefficients must be finite and nonnegative"));
                }
                if *d == 0 {
                    return Err(KrrError::param("d", "dimension must be at least 1"));
                }
            }
            KernelSpec::Conjugate { weights, .. } => {
                if weights.nrows() == 0 || weights.ncols() == 0 {
                    return Err(KrrError::param("weights", "need m >= 1 rows and d >= 1 columns"));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(KrrError::NonFinite("conjugate weights"));
                }
            }
            KernelSpec::LinearCov { spectrum } => {
                if spectrum.total_rank().is_none() {
                    return Err(KrrError::param("spectrum", "linear kernel needs a finite-rank spectrum"));
                }
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            KernelSpec::InnerProductPoly { d, .. } => *d,
            KernelSpec::Conjugate { weights, .. } => weights.ncols(),
            KernelSpec::LinearCov { spectrum } => spectrum.total_rank().unwrap_or(0),
        }
    }

    /// Dimension of the explicit feature map.
    pub fn feature_dim(&self) -> Result<usize> {
        match self {
            KernelSpec::InnerProductPoly { coeffs, d } => {
                poly_feature_dim(*d, coeffs.len().saturating_sub(1))
            }
            KernelSpec::Conjugate { weights, .. } => Ok(weights.nrows()),
            KernelSpec::LinearCov { spectrum } => spectrum
                .total_rank()
                .ok_or_else(|| KrrError::param("spectrum", "unbounded rank")),
        }
    }

    /// Same kernel family at a different ambient dimension (polynomial only).
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        match self {
            KernelSpec::InnerProductPoly { coeffs, .. } => KernelSpec::poly(coeffs.clone(), dim),
            _ => Err(KrrError::param("kernel", "only polynomial kernels can be re-dimensioned")),
        }
    }

    /// `h(1)` for polynomial kernels.
    pub fn h_at_one(&self) -> Option<f64> {
        match self {
            KernelSpec::InnerProductPoly { coeffs, .. } => Some(coeffs.iter().sum()),
            _ => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(KrrError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Explicit features of a single point.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let m = DMatrix::from_row_slice(1, x.len(), x);
        let phi = self.feature_matrix(&m, Parallelism::Sequential)?;
        Ok(phi.row(0).iter().copied().collect())
    }

    /// Feature matrix `Φ` with one row per row of `x`.
    pub fn feature_matrix(&self, x: &DMatrix<f64>, par: Parallelism) -> Result<DMatrix<f64>> {
        if x.ncols() != self.ambient_dim() {
            return Err(KrrError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.ncols(),
            });
        }
        let n = x.nrows();
        let phi = match self {
            KernelSpec::InnerProductPoly { coeffs, d } => {
                let basis = MonomialBasis::new(*d, coeffs.len() - 1)?;
                let weights = basis.feature_weights(coeffs);
                let p = basis.len();
                let blocks = map_blocks(n, ROW_BLOCK, par, |_, rows| {
                    let mut out = DMatrix::zeros(rows.len(), p);
                    let mut mono = vec![0.0; p];
                    let mut xi = vec![0.0; *d];
                    for (r, i) in rows.enumerate() {
                        for (c, v) in xi.iter_mut().enumerate() {
                            *v = x[(i, c)];
                        }
                        basis.eval_monomials(&xi, &mut mono);
                        for j in 0..p {
                            out[(r, j)] = weights[j] * mono[j];
                        }
                    }
                    out
                });
                stack_rows(blocks, n, p)
            }
            KernelSpec::Conjugate { weights, activation } => {
                let m = weights.nrows();
                let scale = 1.0 / (m as f64).sqrt();
                let wt = weights.transpose();
                let blocks = map_blocks(n, ROW_BLOCK, par, |_, rows| {
                    let xb = x.rows(rows.start, rows.len());
                    let mut pre = xb * &wt;
                    pre.apply(|v| *v = activation.apply(*v) * scale);
                    pre
                });
                stack_rows(blocks, n, m)
            }
            KernelSpec::LinearCov { .. } => x.clone(),
        };
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(KrrError::NonFinite("feature map"));
        }
        Ok(phi)
    }
}

fn stack_rows(blocks: Vec<DMatrix<f64>>, n: usize, p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, p);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.nrows()).copy_from(&b);
        at += b.nrows();
    }
    out
}

/// `C(d + L, L)`, the number of monomials of degree at most `L` in `d` variables.
pub fn poly_feature_dim(d: usize, max_degree: usize) -> Result<usize> {
    let dim = binomial((d + max_degree) as u64, max_degree as u64).unwrap_or(u128::MAX);
    if dim > POLY_FEATURE_CAP {
        return Err(KrrError::FeatureCapExceeded {
            dim,
            cap: POLY_FEATURE_CAP,
        });
    }
    Ok(dim as usize)
}

/// Monomials of degree at most `L` in graded lexicographic order.
///
/// Each monomial is stored as its parent (the monomial with the last variable
/// removed) plus that variable, so all values follow from one product each.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    d: usize,
    parent: Vec<usize>,
    var: Vec<usize>,
    degree: Vec<usize>,
    multinomial: Vec<f64>,
}

impl MonomialBasis {
    pub fn new(d: usize, max_degree: usize) -> Result<Self> {
        let p = poly_feature_dim(d, max_degree)?;
        let mut basis = MonomialBasis {
            d,
            parent: Vec::with_capacity(p),
            var: Vec::with_capacity(p),
            degree: Vec::with_capacity(p),
            multinomial: Vec::with_capacity(p),
        };
        // run length of the last variable, needed for the multinomial update
        let mut run = Vec::with_capacity(p);
        basis.parent.push(0);
        basis.var.push(0);
        basis.degree.push(0);
        basis.multinomial.push(1.0);
        run.push(0usize);
        let mut prev = 0..1;
        for deg in 1..=max_degree {
            let start = basis.len();
            for par in prev.clone() {
                let first = if deg == 1 { 0 } else { basis.var[par] };
                for v in first..d {
                    let r = if deg > 1 && v == basis.var[par] { run[par] + 1 } else { 1 };
                    basis.parent.push(par);
                    basis.var.push(v);
                    basis.degree.push(deg);
                    basis
                        .multinomial
                        .push(basis.multinomial[par] * deg as f64 / r as f64);
                    run.push(r);
                }
            }
            prev = start..basis.len();
        }
        debug_assert_eq!(basis.len(), p);
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.degree[idx]
    }

    /// Multinomial coefficient `|I|! / Π I_k!`.
    pub fn multinomial(&self, idx: usize) -> f64 {
        self.multinomial[idx]
    }

    /// Exponent vector of monomial `idx`.
    pub fn exponents(&self, idx: usize) -> Vec<u32> {
        let mut e = vec![0u32; self.d];
        let mut i = idx;
        while self.degree[i] > 0 {
            e[self.var[i]] += 1;
            i = self.parent[i];
        }
        e
    }

    /// Writes `x^I` for every monomial into `out`.
    pub fn eval_monomials(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for i in 1..self.len() {
            out[i] = out[self.parent[i]] * x[self.var[i]];
        }
    }

    /// `√(α_{|I|} C_I / d^{|I|})` per monomial.
    pub fn feature_weights(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = self.d as f64;
        (0..self.len())
            .map(|i| {
                let deg = self.degree[i];
                (coeffs[deg] * self.multinomial[i] / d.powi(deg as i32)).sqrt()
            })
            .collect()
    }
}

/// Explicit polynomial feature vector of one point.
pub fn poly_feature_map(coeffs: &[f64], d: usize, x: &[f64]) -> Result<Vec<f64>> {
    KernelSpec::poly(coeffs.to_vec(), d)?.features(x)
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// Kernel value `K(x, y)`.
pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.check_point(x)?;
    kernel.check_point(y)?;
    let v = match kernel {
        KernelSpec::InnerProductPoly { coeffs, d } => {
            let t = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / *d as f64;
            horner(coeffs, t)
        }
        KernelSpec::Conjugate { weights, activation } => {
            let m = weights.nrows();
            let xv = DVector::from_column_slice(x);
            let yv = DVector::from_column_slice(y);
            let a = weights * xv;
            let b = weights * yv;
            a.iter()
                .zip(b.iter())
                .map(|(u, v)| activation.apply(*u) * activation.apply(*v))
                .sum::<f64>()
                / m as f64
        }
        KernelSpec::LinearCov { .. } => x.iter().zip(y).map(|(a, b)| a * b).sum(),
    };
    if !v.is_finite() {
        return Err(KrrError::NonFinite("kernel evaluation"));
    }
    Ok(v)
}

/// Gram matrix `(K(X_i, X_j))`, assembled from its upper triangle.
pub fn gram(kernel: &KernelSpec, x: &DMatrix<f64>, par: Parallelism) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 {
        return Err(KrrError::param("X", "need at least one row"));
    }
    if x.ncols() != kernel.ambient_dim() {
        return Err(KrrError::DimensionMismatch {
            expected: kernel.ambient_dim(),
            got: x.ncols(),
        });
    }
    let rows: Vec<Vec<f64>> = match kernel {
        KernelSpec::InnerProductPoly { coeffs, d } => {
            let xt = x.transpose();
            let dd = *d as f64;
            map_range(n, par, |i| {
                let xi = xt.column(i);
                (i..n)
                    .map(|j| horner(coeffs, xi.dot(&xt.column(j)) / dd))
                    .collect()
            })
        }
        _ => {
            let phi = kernel.feature_matrix(x, par)?.transpose();
            map_range(n, par, |i| {
                let fi = phi.column(i);
                (i..n).map(|j| fi.dot(&phi.column(j))).collect()
            })
        }
    };
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(KrrError::NonFinite("gram matrix"));
    }
    Ok(k)
}

/// Cross-kernel matrix `(K(A_i, B_j))`.
pub fn cross_gram(
    kernel: &KernelSpec,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    par: Parallelism,
) -> Result<DMatrix<f64>> {
    for m in [a, b] {
        if m.ncols() != kernel.ambient_dim() {
            return Err(KrrError::DimensionMismatch {
                expected: kernel.ambient_dim(),
                got: m.ncols(),
            });
        }
    }
    let out = match kernel {
        KernelSpec::InnerProductPoly { coeffs, d } => {
            let dot = a * b.transpose() / *d as f64;
            dot.map(|t| horner(coeffs, t))
        }
        _ => {
            let fa = kernel.feature_matrix(a, par)?;
            let fb = kernel.feature_matrix(b, par)?;
            fa * fb.transpose()
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(KrrError::NonFinite("cross kernel matrix"));
    }
    Ok(out)
}

/// `max_i |K(X_i, X_i) - reference| / reference`.
pub fn diag_concentration_stat(
    kernel: &KernelSpec,
    x: &DMatrix<f64>,
    reference: f64,
) -> Result<f64> {
    if !(reference.is_finite() && reference > 0.0) {
        return Err(KrrError::param("reference", "must be positive"));
    }
    let mut worst = 0.0f64;
    for row in x.row_iter() {
        let xi: Vec<f64> = row.iter().copied().collect();
        let kii = kernel_eval(kernel, &xi, &xi)?;
        worst = worst.max((kii - reference).abs() / reference);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn basis_order_and_counts() {
        let b = MonomialBasis::new(3, 2).unwrap();
        assert_eq!(b.len(), 10);
        let exps: Vec<Vec<u32>> = (0..b.len()).map(|i| b.exponents(i)).collect();
        assert_eq!(
            exps,
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
        assert_eq!(b.multinomial(4), 1.0);
        assert_eq!(b.multinomial(5), 2.0);
        let b = MonomialBasis::new(3, 4).unwrap();
        for i in 0..b.len() {
            let e = b.exponents(i);
            let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
            let direct = fact(e.iter().sum()) / e.iter().map(|&k| fact(k)).product::<f64>();
            assert_eq!(b.multinomial(i), direct);
        }
    }

    #[test]
    fn feature_map_examples() {
        assert_eq!(poly_feature_map(&[0.0, 1.0], 1, &[2.0]).unwrap(), vec![0.0, 2.0]);
        let phi = poly_feature_map(&[4.0, 0.0, 0.0], 3, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(phi[0], 2.0);
        assert!(phi[1..].iter().all(|v| *v == 0.0));
        assert!(matches!(
            poly_feature_map(&[1.0; 6], 60, &[0.0; 60]),
            Err(KrrError::FeatureCapExceeded { .. })
        ));
    }

    #[test]
    fn quadratic_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = [0.0, 0.0, 1.0];
        let x = [1.0, 1.0];
        let px = poly_feature_map(&coeffs, 2, &x).unwrap();
        for _ in 0..100 {
            let y = random_point(&mut rng, 2);
            let py = poly_feature_map(&coeffs, 2, &y).unwrap();
            let dot: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
            let t = (x[0] * y[0] + x[1] * y[1]) / 2.0;
            assert!((dot - t * t).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_examples() {
        let k = KernelSpec::poly(vec![0.0, 1.0], 4).unwrap();
        let e = [2.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(kernel_eval(&k, &e, &e).unwrap(), 1.0);
        let k = KernelSpec::poly(vec![1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(kernel_eval(&k, &[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        let c = KernelSpec::Conjugate {
            weights: DMatrix::identity(3, 3),
            activation: Activation::Identity,
        };
        let v = kernel_eval(&c, &[1.0, 2.0, 3.0], &[1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(v, 0.0);
        let v = kernel_eval(&c, &[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(v, 2.0);
        assert!(kernel_eval(&k, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let k = KernelSpec::poly(vec![1.0, 2.0, 0.5], 3).unwrap();
        let x = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 2.0]);
        let g = gram(&k, &x, Parallelism::Sequential).unwrap();
        assert_eq!(g[(0, 0)], kernel_eval(&k, &[1.0, -1.0, 2.0], &[1.0, -1.0, 2.0]).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(12, 4, |_, _| rng.random_range(-1.0..1.0));
        let spec = SpectrumModel::from_eigenvalues(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let lin = KernelSpec::LinearCov { spectrum: spec };
        let g = gram(&lin, &x, Parallelism::Parallel).unwrap();
        assert_relative_eq!(g, &x * x.transpose(), epsilon = 1e-14);

        let w = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let conj = KernelSpec::Conjugate { weights: w.clone(), activation: Activation::Tanh };
        let g = gram(&conj, &x, Parallelism::Parallel).unwrap();
        let mut s = &w * x.transpose();
        s.apply(|v| *v = v.tanh());
        let oracle = s.transpose() * &s / 5.0;
        assert_relative_eq!(g, oracle, epsilon = 1e-13);
    }

    #[test]
    fn gram_parallel_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(300, 5, |_, _| rng.random_range(-1.0..1.0));
        let k = KernelSpec::poly(vec![1.0, 1.0, 1.0], 5).unwrap();
        assert_eq!(
            gram(&k, &x, Parallelism::Sequential).unwrap(),
            gram(&k, &x, Parallelism::Parallel).unwrap()
        );
        assert_eq!(
            k.feature_matrix(&x, Parallelism::Sequential).unwrap(),
            k.feature_matrix(&x, Parallelism::Parallel).unwrap()
        );
    }

    #[test]
    fn diag_stat_examples() {
        let k = KernelSpec::poly(vec![0.0, 1.0], 4).unwrap();
        let rad = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0]);
        assert_eq!(diag_concentration_stat(&k, &rad, 1.0).unwrap(), 0.0);
        let k0 = KernelSpec::poly(vec![2.0, 1.0], 3).unwrap();
        assert_eq!(diag_concentration_stat(&k0, &DMatrix::zeros(3, 3), 2.0).unwrap(), 0.0);
        assert!(diag_concentration_stat(&k0, &DMatrix::zeros(3, 3), 0.0).is_err());
    }

    #[test]
    fn serde_tags() {
        let k = KernelSpec::poly(vec![1.0, 1.0], 3).unwrap();
        let js = serde_json::to_string(&k).unwrap();
        assert_eq!(js, r#"{"type":"poly","coeffs":[1.0,1.0],"d":3}"#);
        let c: KernelSpec = serde_json::from_str(
            r#"{"type":"conjugate","weights":[[1.0,0.0],[0.0,1.0],[1.0,1.0]],"activation":"tanh"}"#,
        )
        .unwrap();
        assert_eq!(c.feature_dim().unwrap(), 3);
        assert_eq!(c.ambient_dim(), 2);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"type":"poly","coeffs":[1.0],"d":3,"x":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn features_reproduce_kernel(
            coeffs in prop::collection::vec(0.0f64..2.0, 1..4),
            d in 1usize..6,
            seed in any::<u64>(),
        ) {
            let k = KernelSpec::poly(coeffs, d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let x = random_point(&mut rng, d);
                let y = random_point(&mut rng, d);
                let fx = k.features(&x).unwrap();
                let fy = k.features(&y).unwrap();
                let dot: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
                let kv = kernel_eval(&k, &x, &y).unwrap();
                prop_assert!((dot - kv).abs() <= 1e-10 * (1.0 + kv.abs()));
            }
        }

        #[test]
        fn gram_symmetric_psd(n in 1usize..25, d in 1usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5));
            let k = KernelSpec::poly(vec![0.5, 1.0, 0.3], d).unwrap();
            let g = gram(&k, &x, Parallelism::Parallel).unwrap();
            prop_assert_eq!(&g, &g.transpose());
            let maxdiag = g.diagonal().max();
            let eig = sym_eigen(&g).unwrap();
            prop_assert!(*eig.values.last().unwrap() >= -1e-8 * n as f64 * maxdiag);
        }

        #[test]
        fn diag_stat_permutation_invariant(seed in any::<u64>(), shift in 0usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-2.0..2.0));
            let k = KernelSpec::poly(vec![0.0, 0.0, 1.0], 3).unwrap();
            let perm = DMatrix::from_fn(10, 3, |i, j| x[((i + shift) % 10, j)]);
            prop_assert_eq!(
                diag_concentration_stat(&k, &x, 1.0).unwrap(),
                diag_concentration_stat(&k, &perm, 1.0).unwrap()
            );
        }
    }
}
