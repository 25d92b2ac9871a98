//! Seeded sampling of designs, targets and noise.
//!
//! Every draw comes from a ChaCha8 stream selected by `(seed, grid, trial, role)`.
//! Streams never overlap, so trials can run in any order or on any thread and
//! still see the same numbers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{KrrError, Result};
use crate::kernels::KernelSpec;
use crate::spectra::SpectrumModel;

/// What a stream is used for; part of the stream key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Design = 1,
    Noise = 2,
    Test = 3,
    Oracle = 4,
    Weights = 5,
}

/// Largest trial index representable in a stream key.
pub const MAX_TRIAL: u32 = (1 << 24) - 1;

/// Independent stream for one `(grid point, trial, role)` under a base seed.
pub fn stream(seed: u64, grid: u32, trial: u32, role: Role) -> ChaCha8Rng {
    assert!(trial <= MAX_TRIAL, "trial index {trial} exceeds the stream key width");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid as u64) << 32) | ((trial as u64) << 8) | role as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Rademacher,
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    UniformPm,
}

impl Marginal {
    fn draw(self, rng: &mut impl RngCore) -> f64 {
        match self {
            Marginal::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Marginal::Gaussian => rng.sample(StandardNormal),
            Marginal::UniformPm => {
                let r3 = 3f64.sqrt();
                rng.random_range(-r3..r3)
            }
        }
    }
}

/// Sampling law of the covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    IidCoordinates { marginal: Marginal, d: usize },
    /// Uniform on the sphere of radius `√d`.
    UniformSphere { d: usize },
    /// Independent Gaussian coordinates with variances from a finite spectrum.
    GaussianCov { spectrum: SpectrumModel },
}

impl DesignSpec {
    pub fn dim(&self) -> Result<usize> {
        match self {
            DesignSpec::IidCoordinates { d, .. } | DesignSpec::UniformSphere { d } => Ok(*d),
            DesignSpec::GaussianCov { spectrum } => spectrum.total_rank().ok_or_else(|| {
                KrrError::param("spectrum", "Gaussian design needs a finite-rank spectrum")
            }),
        }
    }

    /// Same law at a different dimension (coordinate and sphere designs only).
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        match self {
            DesignSpec::IidCoordinates { marginal, .. } => Ok(DesignSpec::IidCoordinates {
                marginal: *marginal,
                d: dim,
            }),
            DesignSpec::UniformSphere { .. } => Ok(DesignSpec::UniformSphere { d: dim }),
            DesignSpec::GaussianCov { .. } => Err(KrrError::param(
                "design",
                "Gaussian covariance designs cannot be re-dimensioned",
            )),
        }
    }
}

/// Draws `n` rows from `rng`, row by row.
pub fn sample_design_rng(spec: &DesignSpec, n: usize, rng: &mut impl RngCore) -> Result<DMatrix<f64>> {
    let d = spec.dim()?;
    if d == 0 {
        return Err(KrrError::param("d", "dimension must be at least 1"));
    }
    let mut x = DMatrix::zeros(n, d);
    match spec {
        DesignSpec::IidCoordinates { marginal, .. } => {
            for i in 0..n {
                for j in 0..d {
                    x[(i, j)] = marginal.draw(rng);
                }
            }
        }
        DesignSpec::UniformSphere { .. } => {
            let radius = (d as f64).sqrt();
            let mut row = vec![0.0; d];
            for i in 0..n {
                let norm = loop {
                    for v in row.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nrm > 0.0 {
                        break nrm;
                    }
                };
                for j in 0..d {
                    x[(i, j)] = row[j] * radius / norm;
                }
            }
        }
        DesignSpec::GaussianCov { spectrum } => {
            let sd: Vec<f64> = spectrum.eigenvalues(d).iter().map(|v| v.sqrt()).collect();
            for i in 0..n {
                for j in 0..d {
                    let g: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = sd[j] * g;
                }
            }
        }
    }
    Ok(x)
}

/// `n` design rows from the stream `(seed, 0, 0, Design)`.
pub fn sample_design(spec: &DesignSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(KrrError::param("N", "need at least one sample"));
    }
    sample_design_rng(spec, n, &mut stream(seed, 0, 0, Role::Design))
}

fn default_eps() -> f64 {
    0.01
}

fn default_truncation() -> usize {
    10_000
}

/// Regression function `f*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Coefficients on the feature coordinates; `f* = <c, φ(x)>`.
    EigenCoeffs { coeffs: Vec<f64> },
    /// `a_j = j^{-alpha (s-1)/2 - 1/2 - eps}` for `j ≤ truncation`, against `σ_j ∝ j^{-alpha}`.
    SourceCondition {
        s: f64,
        alpha: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    /// `f*(x) = a* σ(<w*, x>)` with unit `w*`.
    SingleNeuron {
        a_star: f64,
        w_star: Vec<f64>,
        activation: Activation,
    },
}

/// Coefficient profile of a source-condition target.
pub fn source_condition_coeffs(s: f64, alpha: f64, eps: f64, truncation: usize) -> Result<Vec<f64>> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(KrrError::param("s", "source exponent must be at least 1"));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(KrrError::param("alpha", "decay exponent must exceed 1"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(KrrError::param("eps", "must be positive"));
    }
    let expo = -alpha * (s - 1.0) / 2.0 - 0.5 - eps;
    let coeffs: Vec<f64> = (1..=truncation).map(|j| (j as f64).powf(expo)).collect();
    // Σ σ_j^{1-s} a_j² with σ_j = j^{-alpha}
    let weighted: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| ((i + 1) as f64).powf(alpha * (s - 1.0)) * a * a)
        .sum();
    if !weighted.is_finite() {
        return Err(KrrError::NonFinite("source condition norm"));
    }
    Ok(coeffs)
}

impl TargetSpec {
    /// Feature-coordinate coefficients, when the target has them.
    pub fn coefficients(&self) -> Result<Option<Vec<f64>>> {
        match self {
            TargetSpec::EigenCoeffs { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(KrrError::NonFinite("target coefficients"));
                }
                Ok(Some(coeffs.clone()))
            }
            TargetSpec::SourceCondition { s, alpha, eps, truncation } => {
                source_condition_coeffs(*s, *alpha, *eps, *truncation).map(Some)
            }
            TargetSpec::SingleNeuron { .. } => Ok(None),
        }
    }
}

/// `f*(X_i)` for every row.
pub fn eval_target(target: &TargetSpec, kernel: &KernelSpec, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    match target {
        TargetSpec::SingleNeuron { a_star, w_star, activation } => {
            if w_star.len() != x.ncols() {
                return Err(KrrError::DimensionMismatch {
                    expected: x.ncols(),
                    got: w_star.len(),
                });
            }
            let norm = w_star.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(KrrError::param("w_star", "must be a unit vector"));
            }
            let w = DVector::from_column_slice(w_star);
            Ok((x * w).map(|t| a_star * activation.apply(t)))
        }
        _ => {
            let mut c = target.coefficients()?.unwrap_or_default();
            let p = kernel.feature_dim()?;
            match target {
                TargetSpec::EigenCoeffs { .. } if c.len() > p => {
                    return Err(KrrError::DimensionMismatch {
                        expected: p,
                        got: c.len(),
                    })
                }
                _ => c.truncate(p),
            }
            c.resize(p, 0.0);
            let phi = kernel.feature_matrix(x, crate::Parallelism::Sequential)?;
            Ok(phi * DVector::from_vec(c))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    RademacherScaled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub law: NoiseLaw,
    #[serde(default)]
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec {
            law: NoiseLaw::Gaussian,
            sigma,
        }
    }
}

pub fn sample_noise_rng(spec: &NoiseSpec, n: usize, rng: &mut impl RngCore) -> DVector<f64> {
    DVector::from_fn(n, |_, _| match spec.law {
        NoiseLaw::Gaussian => {
            let g: f64 = rng.sample(StandardNormal);
            spec.sigma * g
        }
        NoiseLaw::RademacherScaled => {
            if rng.random::<bool>() {
                spec.sigma
            } else {
                -spec.sigma
            }
        }
    })
}

/// `n` noise values from the stream `(seed, 0, 0, Noise)`.
pub fn sample_noise(spec: &NoiseSpec, n: usize, seed: u64) -> DVector<f64> {
    sample_noise_rng(spec, n, &mut stream(seed, 0, 0, Role::Noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn design_examples() {
        let x = sample_design(&DesignSpec::IidCoordinates { marginal: Marginal::Rademacher, d: 4 }, 50, 1).unwrap();
        assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));
        let x = sample_design(&DesignSpec::UniformSphere { d: 7 }, 100, 2).unwrap();
        for row in x.row_iter() {
            assert!((row.norm_squared() - 7.0).abs() <= 1e-10 * 7.0);
            assert!((row.norm() - 7f64.sqrt()).abs() <= 1e-12);
        }
        let spec = SpectrumModel::from_eigenvalues(&[1.0, 1e-300]).unwrap();
        let x = sample_design(&DesignSpec::GaussianCov { spectrum: spec }, 20, 3).unwrap();
        assert!(x.column(1).iter().all(|v| v.abs() < 1e-140));
        let tail = SpectrumModel::power_law(2.0, 1.0).unwrap();
        assert!(sample_design(&DesignSpec::GaussianCov { spectrum: tail }, 5, 0).is_err());
    }

    #[test]
    fn uniform_marginal_unit_variance() {
        let spec = DesignSpec::IidCoordinates { marginal: Marginal::UniformPm, d: 1 };
        let x = sample_design(&spec, 100_000, 5).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((var - 1.0).abs() < 0.02);
        assert!(x.iter().all(|v| v.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn determinism_and_independence() {
        let spec = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 3 };
        assert_eq!(sample_design(&spec, 10, 7).unwrap(), sample_design(&spec, 10, 7).unwrap());
        assert_ne!(sample_design(&spec, 10, 7).unwrap(), sample_design(&spec, 10, 8).unwrap());
        let mut a = stream(7, 0, 1, Role::Design);
        let mut b = stream(7, 0, 2, Role::Design);
        let mut c = stream(7, 0, 1, Role::Noise);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert!(x != y && x != z && y != z);
    }

    #[test]
    fn noise_examples() {
        assert!(sample_noise(&NoiseSpec::gaussian(0.0), 10, 1).iter().all(|v| *v == 0.0));
        let g = sample_noise(&NoiseSpec::gaussian(1.0), 100_000, 2);
        let var = g.iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((0.98..=1.02).contains(&var));
        let r = sample_noise(&NoiseSpec { law: NoiseLaw::RademacherScaled, sigma: 0.3 }, 100, 3);
        assert!(r.iter().all(|v| v.abs() == 0.3));
    }

    #[test]
    fn target_examples() {
        let k = KernelSpec::poly(vec![4.0, 1.0], 2).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let t = TargetSpec::EigenCoeffs { coeffs: vec![0.5] };
        assert_eq!(eval_target(&t, &k, &x).unwrap().as_slice(), &[1.0, 1.0]);
        let t = TargetSpec::EigenCoeffs { coeffs: vec![1.0; 4] };
        assert!(eval_target(&t, &k, &x).is_err());

        let n = TargetSpec::SingleNeuron { a_star: 1.0, w_star: vec![0.6, 0.8], activation: Activation::Identity };
        let v = eval_target(&n, &k, &x).unwrap();
        assert_relative_eq!(v[0], 0.6 + 1.6);
        assert_relative_eq!(v[1], -1.8 + 0.4);
    }

    #[test]
    fn coefficient_target_matches_hand_polynomial() {
        // d = 2, L = 2: monomials 1, x1, x2, x1², x1x2, x2²
        let coeffs = vec![1.0, 2.0, 0.5];
        let k = KernelSpec::poly(coeffs.clone(), 2).unwrap();
        let c = vec![0.3, -1.0, 2.0, 0.7, 0.1, -0.4];
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.25, 3.0, -1.0]);
        let v = eval_target(&TargetSpec::EigenCoeffs { coeffs: c.clone() }, &k, &x).unwrap();
        for i in 0..3 {
            let (a, b) = (x[(i, 0)], x[(i, 1)]);
            let w1 = (2.0f64 / 2.0).sqrt();
            let w2 = (0.5f64 / 4.0).sqrt();
            let hand = c[0] * 1.0
                + w1 * (c[1] * a + c[2] * b)
                + w2 * (c[3] * a * a + c[4] * 2f64.sqrt() * a * b + c[5] * b * b);
            assert_relative_eq!(v[i], hand, epsilon = 1e-13);
        }
    }

    #[test]
    fn coefficient_target_l2_norm() {
        // ‖f*‖² over fresh samples vs c^T Γ̂ c with Γ̂ the sample second moment
        let k = KernelSpec::poly(vec![1.0, 1.0, 1.0], 3).unwrap();
        let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 3 };
        let c: Vec<f64> = (0..10).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let t = TargetSpec::EigenCoeffs { coeffs: c.clone() };
        let xa = sample_design(&design, 100_000, 11).unwrap();
        let fa = eval_target(&t, &k, &xa).unwrap();
        let l2 = fa.norm_squared() / 1e5;
        let xb = sample_design(&design, 100_000, 12).unwrap();
        let phi = k.feature_matrix(&xb, crate::Parallelism::Parallel).unwrap();
        let gamma = phi.tr_mul(&phi) / 1e5;
        let cv = DVector::from_vec(c);
        let quad = cv.dot(&(&gamma * &cv));
        assert!((l2 / quad - 1.0).abs() < 0.05);
    }

    #[test]
    fn source_condition_profile() {
        let a = source_condition_coeffs(1.0, 2.0, 0.01, 5).unwrap();
        assert_relative_eq!(a[1], 2f64.powf(-0.51));
        let b = source_condition_coeffs(2.0, 3.0, 0.01, 5).unwrap();
        assert_relative_eq!(b[1], 2f64.powf(-2.01));
        assert!(source_condition_coeffs(0.5, 2.0, 0.01, 5).is_err());
    }
}
