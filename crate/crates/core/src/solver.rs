//! Closed-form kernel ridge regression.
//!
//! `f̂_λ = Φ^T (K + λI)^{-1} y` with `K = ΦΦ^T`. Solves go through a symmetric
//! eigendecomposition so `λ = 0` yields the minimum-norm interpolant.

use nalgebra::{DMatrix, DVector};

use crate::error::{KrrError, Result};
use crate::kernels::{cross_gram, KernelSpec};
use crate::linalg::{apply_inverse, max_asymmetry, pinv_cutoff, sym_eigen};
use crate::par::{map_blocks, Parallelism};
use crate::sampler::{eval_target, sample_design_rng, stream, DesignSpec, Role, TargetSpec};
use crate::spectra::SpectrumModel;

/// Default number of fresh points for Monte Carlo risk.
pub const DEFAULT_N_TEST: usize = 10_000;

const RISK_BLOCK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitDiagnostics {
    /// `‖(K + λI)α - y‖ / ‖y‖`.
    pub residual_norm: f64,
    /// Largest over smallest eigenvalue of `K` (infinite when singular).
    pub gram_condition: f64,
    /// Eigenvalues of `K + λI` kept by the pseudo-inverse.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub dual: DVector<f64>,
    pub lambda: f64,
    /// Training responses.
    pub targets: DVector<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Solves `(K + λI)α = y`, with a pseudo-inverse when the system is singular.
pub fn fit(gram: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(KrrError::DimensionMismatch { expected: n, got: gram.ncols() });
    }
    if y.len() != n {
        return Err(KrrError::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(KrrError::param("lambda", "must be finite and nonnegative"));
    }
    let scale = gram.amax();
    let asym = max_asymmetry(gram);
    if asym > 1e-12 * scale {
        return Err(KrrError::NotSymmetric(asym));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(KrrError::NonFinite("responses"));
    }
    let eig = sym_eigen(gram)?;
    let dual = apply_inverse(&eig, lambda, y);
    let shifted_top = eig.values.iter().fold(0.0f64, |m, v| m.max((v + lambda).abs()));
    let cut = pinv_cutoff(n, shifted_top);
    let rank = eig.values.iter().filter(|v| *v + lambda > cut).count();
    let resid = gram * &dual + &dual * lambda - y;
    let ynorm = y.norm();
    let top = eig.values.first().copied().unwrap_or(0.0);
    let bottom = eig.values.last().copied().unwrap_or(0.0);
    Ok(FitResult {
        dual,
        lambda,
        targets: y.clone(),
        diagnostics: FitDiagnostics {
            residual_norm: if ynorm > 0.0 { resid.norm() / ynorm } else { resid.norm() },
            gram_condition: if bottom > 0.0 { top / bottom } else { f64::INFINITY },
            rank,
        },
    })
}

/// `f̂(x) = Σ_i α_i K(X_i, x)` at every row of `x_test`.
pub fn predict(
    kernel: &KernelSpec,
    x_train: &DMatrix<f64>,
    alpha: &DVector<f64>,
    x_test: &DMatrix<f64>,
    par: Parallelism,
) -> Result<DVector<f64>> {
    if alpha.len() != x_train.nrows() {
        return Err(KrrError::DimensionMismatch { expected: x_train.nrows(), got: alpha.len() });
    }
    Ok(cross_gram(kernel, x_test, x_train, par)? * alpha)
}

/// Primal ridge `(Φ^TΦ + λI)^+ Φ^T y`.
pub fn ridge_primal(features: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if y.len() != features.nrows() {
        return Err(KrrError::DimensionMismatch { expected: features.nrows(), got: y.len() });
    }
    let cov = features.tr_mul(features);
    let eig = sym_eigen(&cov)?;
    Ok(apply_inverse(&eig, lambda, &features.tr_mul(y)))
}

/// A fitted predictor in dual or primal form.
#[derive(Clone, Debug)]
pub enum Predictor {
    Dual {
        kernel: KernelSpec,
        train: DMatrix<f64>,
        dual: DVector<f64>,
    },
    /// `f̂(x) = <β, φ(x)>` for explicit-feature kernels.
    Primal { kernel: KernelSpec, beta: DVector<f64> },
}

impl Predictor {
    pub fn kernel(&self) -> &KernelSpec {
        match self {
            Predictor::Dual { kernel, .. } | Predictor::Primal { kernel, .. } => kernel,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>, par: Parallelism) -> Result<DVector<f64>> {
        match self {
            Predictor::Dual { kernel, train, dual } => predict(kernel, train, dual, x, par),
            Predictor::Primal { kernel, beta } => {
                let phi = kernel.feature_matrix(x, par)?;
                if phi.ncols() != beta.len() {
                    return Err(KrrError::DimensionMismatch { expected: phi.ncols(), got: beta.len() });
                }
                Ok(phi * beta)
            }
        }
    }

    /// Feature-coordinate coefficients `β = Φ^T α`.
    pub fn primal_coeffs(&self, par: Parallelism) -> Result<DVector<f64>> {
        match self {
            Predictor::Primal { beta, .. } => Ok(beta.clone()),
            Predictor::Dual { kernel, train, dual } => Ok(kernel.feature_matrix(train, par)?.tr_mul(dual)),
        }
    }
}

/// Head/tail split of the primal coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub head: DVector<f64>,
    pub tail: DVector<f64>,
    /// `‖tail - Φ_t^T (Φ_t Φ_t^T + λI)^+ (y - Φ_h head)‖ / ‖β‖`.
    pub fixed_point_residual: f64,
}

/// Splits `β = Φ^T α` after the first `k` feature coordinates and checks the
/// tail against its fixed-point characterization.
pub fn decompose(fit: &FitResult, features: &DMatrix<f64>, k: usize) -> Result<Decomposition> {
    let p = features.ncols();
    if k > p {
        return Err(KrrError::param("k", format!("head size {k} exceeds feature dimension {p}")));
    }
    if features.nrows() != fit.dual.len() {
        return Err(KrrError::DimensionMismatch { expected: fit.dual.len(), got: features.nrows() });
    }
    let beta = features.tr_mul(&fit.dual);
    let head = beta.rows(0, k).into_owned();
    let tail = beta.rows(k, p - k).into_owned();
    let phi_h = features.columns(0, k);
    let phi_t = features.columns(k, p - k).into_owned();
    let resid = &fit.targets - phi_h * &head;
    let inner = &phi_t * phi_t.transpose();
    let eig = sym_eigen(&inner)?;
    let fixed = phi_t.tr_mul(&apply_inverse(&eig, fit.lambda, &resid));
    let scale = beta.norm();
    let diff = (&fixed - &tail).norm();
    Ok(Decomposition {
        head,
        tail,
        fixed_point_residual: if scale > 0.0 { diff / scale } else { diff },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RiskMode {
    /// RMS error over fresh points drawn from the measure.
    MonteCarlo { n_test: usize, seed: u64 },
    /// `‖Γ^{1/2}(β̂ - β*)‖` for linear kernels.
    ExactLinear,
}

/// Monte Carlo risk estimate with the spread of the squared errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskEstimate {
    pub rms: f64,
    /// Sample standard deviation of the per-point squared errors.
    pub sq_err_std: f64,
    pub n_test: usize,
}

pub fn monte_carlo_risk(
    predictor: &Predictor,
    target: &TargetSpec,
    measure: &DesignSpec,
    n_test: usize,
    seed: u64,
    par: Parallelism,
) -> Result<RiskEstimate> {
    if n_test == 0 {
        return Err(KrrError::param("n_test", "need at least one test point"));
    }
    let kernel = predictor.kernel();
    let blocks = map_blocks(n_test, RISK_BLOCK, par, |b, range| -> Result<(f64, f64)> {
        let mut rng = stream(seed, 0, b as u32, Role::Test);
        let x = sample_design_rng(measure, range.len(), &mut rng)?;
        let diff = predictor.predict(&x, Parallelism::Sequential)? - eval_target(target, kernel, &x)?;
        let sq: Vec<f64> = diff.iter().map(|v| v * v).collect();
        Ok((sq.iter().sum(), sq.iter().map(|v| v * v).sum()))
    });
    let (mut s1, mut s2) = (0.0, 0.0);
    for b in blocks {
        let (a, c) = b?;
        s1 += a;
        s2 += c;
    }
    let n = n_test as f64;
    let mean = s1 / n;
    let var = if n_test > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(RiskEstimate { rms: mean.sqrt(), sq_err_std: var.sqrt(), n_test })
}

/// `‖f̂ - f*‖_{L2}` under the design measure.
pub fn excess_risk(
    predictor: &Predictor,
    target: &TargetSpec,
    measure: &DesignSpec,
    mode: RiskMode,
    par: Parallelism,
) -> Result<f64> {
    match mode {
        RiskMode::MonteCarlo { n_test, seed } => {
            Ok(monte_carlo_risk(predictor, target, measure, n_test, seed, par)?.rms)
        }
        RiskMode::ExactLinear => {
            let KernelSpec::LinearCov { spectrum } = predictor.kernel() else {
                return Err(KrrError::param("mode", "exact risk needs a linear covariance kernel"));
            };
            let beta = predictor.primal_coeffs(par)?;
            let star = target
                .coefficients()?
                .ok_or_else(|| KrrError::param("target", "exact risk needs coefficient targets"))?;
            if star.len() > beta.len() {
                return Err(KrrError::DimensionMismatch { expected: beta.len(), got: star.len() });
            }
            Ok(exact_linear_risk(spectrum, beta.as_slice(), &star))
        }
    }
}

/// `√(Σ σ_j (β_j - β*_j)²)`, with `β*` zero-padded.
pub fn exact_linear_risk(spectrum: &SpectrumModel, beta: &[f64], star: &[f64]) -> f64 {
    let sig = spectrum.eigenvalues(beta.len());
    beta.iter()
        .enumerate()
        .map(|(j, b)| {
            let d = b - star.get(j).copied().unwrap_or(0.0);
            sig.get(j).copied().unwrap_or(0.0) * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Root mean square of `a - b`.
pub fn rms_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    ((a - b).norm_squared() / a.len().max(1) as f64).sqrt()
}
