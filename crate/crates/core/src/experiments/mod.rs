//! Seeded Monte Carlo harnesses with one CSV table per experiment.
//!
//! Every random draw comes from `stream(seed, grid, trial, role)`, so results do
//! not depend on scheduling, and trial ranges can be split across runs.

pub mod config;
pub mod report;

use nalgebra::{DMatrix, DVector};

pub use config::{ExperimentConfig, ExperimentKind, LambdaPolicy, Params, Sweep};
pub use report::{fmt_f64, Cell, Table};

use crate::activation::Activation;
use crate::conjugate::{conjugate_spectrum, feature_learning_weights, ConjugateMethod};
use crate::error::{KrrError, Result};
use crate::kernels::{diag_concentration_stat, gram, poly_feature_dim, KernelSpec};
use crate::linalg::{linear_fit, quantile, sym_eigen, GaussHermite};
use crate::par::{map_range, Parallelism};
use crate::rates::{k_b_star, power_decay_prescription, rate_report, RateReport};
use crate::sampler::{
    eval_target, sample_design_rng, sample_noise_rng, stream, DesignSpec, Marginal, Role, TargetSpec,
};
use crate::solver::{exact_linear_risk, fit, predict, rms_diff};
use crate::spectra::{poly_plateau_spectrum, poly_spectral_order, SpectrumModel};

/// Grid-key bit separating the Gaussian arm's streams from the kernel arm's.
const GAUSSIAN_ARM: u32 = 1 << 31;

/// Median and quartiles over trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Summary {
            median: quantile(&v, 0.5),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
        }
    }
}

/// One sweep point of an error-vs-theory curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub k_used: usize,
    pub error: Summary,
    pub r_star: f64,
    /// `median / r_star`.
    pub ratio: f64,
    /// Per-trial errors in trial order.
    pub errors: Vec<f64>,
    /// Rate inputs and terms behind `r_star`.
    pub report: RateReport,
}

impl CurvePoint {
    fn new(d: usize, errors: Vec<f64>, report: RateReport) -> Self {
        let error = Summary::of(&errors);
        CurvePoint {
            n: report.n,
            d,
            lambda: report.lambda,
            k_used: report.k,
            error,
            r_star: report.r_star,
            ratio: error.median / report.r_star,
            errors,
            report,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationPoint {
    pub n: usize,
    pub d: usize,
    pub h1: f64,
    pub sigma_min: Summary,
    pub sigma_max: Summary,
    pub cond: Summary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagPoint {
    pub n: usize,
    pub d: usize,
    pub reference: f64,
    pub stat: Summary,
    pub stats: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GepPoint {
    /// Polynomial-kernel arm.
    pub kernel: CurvePoint,
    /// Gaussian linear arm on the same spectrum and coefficients.
    pub gaussian: CurvePoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothPoint {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub report: RateReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothResult {
    pub points: Vec<SmoothPoint>,
    /// Least-squares slope of `log r*` on `log N` (NaN when degenerate).
    pub slope: f64,
    pub intercept: f64,
    /// Fewer than two positive finite `r*` values.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugatePoint {
    pub n2: usize,
    pub m: usize,
    pub d: usize,
    pub delta: f64,
    pub alignment: f64,
    pub lambda: f64,
    /// `‖σ‖²_{L2(γ)}`.
    pub sigma_sq_norm: f64,
    pub head_eigenvalue: f64,
    pub second_eigenvalue: f64,
    pub error: Summary,
    pub errors: Vec<f64>,
    pub r_star: f64,
    /// `σ_ξ/√N₂ + σ_ξ√(N₂/m) + |a*|/(‖σ‖ N₂)`.
    pub rate_terms: f64,
    /// `|a*| Lip(σ) √(2(1 - alignment))`.
    pub approx_term: f64,
    /// `median / rate_terms`.
    pub ratio: f64,
}

/// Result of any experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentOutput {
    MultipleDescent(Vec<CurvePoint>),
    Linearization(Vec<LinearizationPoint>),
    DiagConcentration(Vec<DiagPoint>),
    GaussianEquivalence(Vec<GepPoint>),
    SmoothRate(SmoothResult),
    Conjugate(Vec<ConjugatePoint>),
}

pub fn run(cfg: &ExperimentConfig, par: Parallelism) -> Result<ExperimentOutput> {
    Ok(match cfg.experiment {
        ExperimentKind::MultipleDescent => ExperimentOutput::MultipleDescent(run_multiple_descent(cfg, par)?),
        ExperimentKind::Linearization => ExperimentOutput::Linearization(run_linearization(cfg, par)?),
        ExperimentKind::DiagConcentration => ExperimentOutput::DiagConcentration(run_diag_concentration(cfg, par)?),
        ExperimentKind::GaussianEquivalence => {
            ExperimentOutput::GaussianEquivalence(run_gaussian_equivalence(cfg, par)?)
        }
        ExperimentKind::SmoothRate => ExperimentOutput::SmoothRate(run_smooth_rate(cfg)?),
        ExperimentKind::Conjugate => ExperimentOutput::Conjugate(run_conjugate(cfg, par)?),
    })
}

impl ExperimentOutput {
    pub fn table(&self) -> Table {
        match self {
            ExperimentOutput::MultipleDescent(points) => {
                let mut t = Table::new(&[
                    "n", "d", "lambda", "k_used", "median", "q25", "q75", "r_star", "ratio",
                ]);
                for p in points {
                    t.push(vec![
                        p.n.into(),
                        p.d.into(),
                        p.lambda.into(),
                        p.k_used.into(),
                        p.error.median.into(),
                        p.error.q25.into(),
                        p.error.q75.into(),
                        p.r_star.into(),
                        p.ratio.into(),
                    ]);
                }
                t
            }
            ExperimentOutput::Linearization(points) => {
                let mut t = Table::new(&[
                    "n", "d", "h1", "sigma_min", "sigma_max", "cond_median", "cond_q25", "cond_q75",
                    "min_over_h1", "max_over_h1",
                ]);
                for p in points {
                    t.push(vec![
                        p.n.into(),
                        p.d.into(),
                        p.h1.into(),
                        p.sigma_min.median.into(),
                        p.sigma_max.median.into(),
                        p.cond.median.into(),
                        p.cond.q25.into(),
                        p.cond.q75.into(),
                        (p.sigma_min.median / p.h1).into(),
                        (p.sigma_max.median / p.h1).into(),
                    ]);
                }
                t
            }
            ExperimentOutput::DiagConcentration(points) => {
                let mut t = Table::new(&["n", "d", "reference", "median", "q25", "q75"]);
                for p in points {
                    t.push(vec![
                        p.n.into(),
                        p.d.into(),
                        p.reference.into(),
                        p.stat.median.into(),
                        p.stat.q25.into(),
                        p.stat.q75.into(),
                    ]);
                }
                t
            }
            ExperimentOutput::GaussianEquivalence(points) => {
                let mut t = Table::new(&[
                    "n", "d", "lambda", "k_star", "kernel_median", "kernel_q25", "kernel_q75",
                    "gaussian_median", "gaussian_q25", "gaussian_q75", "r_star", "kernel_ratio",
                    "gaussian_ratio",
                ]);
                for p in points {
                    let (a, b) = (&p.kernel, &p.gaussian);
                    t.push(vec![
                        a.n.into(),
                        a.d.into(),
                        a.lambda.into(),
                        a.k_used.into(),
                        a.error.median.into(),
                        a.error.q25.into(),
                        a.error.q75.into(),
                        b.error.median.into(),
                        b.error.q25.into(),
                        b.error.q75.into(),
                        a.r_star.into(),
                        a.ratio.into(),
                        b.ratio.into(),
                    ]);
                }
                t
            }
            ExperimentOutput::SmoothRate(res) => {
                let mut t = Table::new(&[
                    "n", "k", "lambda", "r_star", "regime", "slope", "intercept", "degenerate",
                ]);
                for p in &res.points {
                    t.push(vec![
                        p.n.into(),
                        p.k.into(),
                        p.lambda.into(),
                        p.report.r_star.into(),
                        p.report.regime.name().into(),
                        res.slope.into(),
                        res.intercept.into(),
                        res.degenerate.into(),
                    ]);
                }
                t
            }
            ExperimentOutput::Conjugate(points) => {
                let mut t = Table::new(&[
                    "n2", "m", "d", "delta", "alignment", "lambda", "sigma_sq_norm", "head_eigenvalue",
                    "second_eigenvalue", "median", "q25", "q75", "r_star", "rate_terms", "approx_term",
                    "ratio",
                ]);
                for p in points {
                    t.push(vec![
                        p.n2.into(),
                        p.m.into(),
                        p.d.into(),
                        p.delta.into(),
                        p.alignment.into(),
                        p.lambda.into(),
                        p.sigma_sq_norm.into(),
                        p.head_eigenvalue.into(),
                        p.second_eigenvalue.into(),
                        p.error.median.into(),
                        p.error.q25.into(),
                        p.error.q75.into(),
                        p.r_star.into(),
                        p.rate_terms.into(),
                        p.approx_term.into(),
                        p.ratio.into(),
                    ]);
                }
                t
            }
        }
    }
}

/// `(d, N)` pairs in sweep order.
fn grid(cfg: &ExperimentConfig, default_d: usize) -> Vec<(usize, usize)> {
    let ds = if cfg.sweep.d.is_empty() { vec![default_d] } else { cfg.sweep.d.clone() };
    ds.iter().flat_map(|&d| cfg.sweep.n.iter().map(move |&n| (d, n))).collect()
}

fn grid_key(g: usize) -> Result<u32> {
    u32::try_from(g)
        .ok()
        .filter(|v| v & GAUSSIAN_ARM == 0)
        .ok_or_else(|| KrrError::config("sweep", "too many grid points"))
}

fn fixed_lambda(cfg: &ExperimentConfig) -> f64 {
    match cfg.lambda {
        LambdaPolicy::Fixed(v) => v,
        _ => 0.0,
    }
}

/// Absolute trial indices of this run.
fn trial_ids(cfg: &ExperimentConfig) -> Vec<u32> {
    (0..cfg.trials as u32).map(|t| cfg.params.trial_offset + t).collect()
}

fn at_dim(cfg: &ExperimentConfig, d: usize) -> Result<(KernelSpec, DesignSpec)> {
    let kernel = cfg.kernel()?;
    let design = cfg.design()?;
    let kernel = if kernel.ambient_dim() == d { kernel.clone() } else { kernel.with_dim(d)? };
    let design = if design.dim()? == d { design.clone() } else { design.with_dim(d)? };
    Ok((kernel, design))
}

fn poly_coeffs(kernel: &KernelSpec) -> Result<&[f64]> {
    match kernel {
        KernelSpec::InnerProductPoly { coeffs, .. } => Ok(coeffs),
        _ => Err(KrrError::config("kernel", "must be a polynomial kernel")),
    }
}

/// Plateau spectrum and the target coefficients permuted into spectral order.
pub fn poly_rate_inputs(kernel: &KernelSpec, target: &TargetSpec) -> Result<(SpectrumModel, Vec<f64>)> {
    let coeffs = poly_coeffs(kernel)?;
    let d = kernel.ambient_dim();
    let spec = poly_plateau_spectrum(coeffs, d)?;
    let order = poly_spectral_order(coeffs, d)?;
    let c = target.coefficients()?.unwrap_or_default();
    if c.len() > order.len() {
        return Err(KrrError::DimensionMismatch { expected: order.len(), got: c.len() });
    }
    let spectral = order.iter().map(|&j| c.get(j).copied().unwrap_or(0.0)).collect();
    Ok((spec, spectral))
}

/// `max{i ≤ L : C d^i ≤ N}`, or `None` when even `i = 0` fails.
pub fn iota(d: usize, n: usize, c: f64, max_degree: usize) -> Option<usize> {
    (0..=max_degree)
        .take_while(|&i| c * (d as f64).powi(i as i32) <= n as f64)
        .last()
}

/// Head size `Σ_{l ≤ ι}` (multiplicity of degree `l`) used for multiple descent.
pub fn multiple_descent_k(d: usize, n: usize, c: f64, max_degree: usize) -> Result<usize> {
    match iota(d, n, c, max_degree) {
        Some(i) => poly_feature_dim(d, i),
        None => Ok(0),
    }
}

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Noisy responses from the trial's design and noise streams.
fn draw_training(
    cfg: &ExperimentConfig,
    kernel: &KernelSpec,
    design: &DesignSpec,
    target: &TargetSpec,
    n: usize,
    grid: u32,
    trial: u32,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let x = sample_design_rng(design, n, &mut stream(cfg.seed, grid, trial, Role::Design))?;
    let noise = sample_noise_rng(&cfg.noise, n, &mut stream(cfg.seed, grid, trial, Role::Noise));
    let y = eval_target(target, kernel, &x)? + noise;
    Ok((x, y))
}

pub fn run_multiple_descent(cfg: &ExperimentConfig, par: Parallelism) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let target = cfg.target()?;
    let lambda = fixed_lambda(cfg);
    let mut out = Vec::new();
    for (g, (d, n)) in grid(cfg, cfg.kernel()?.ambient_dim()).into_iter().enumerate() {
        let key = grid_key(g)?;
        let (kernel, design) = at_dim(cfg, d)?;
        let max_degree = poly_coeffs(&kernel)?.len() - 1;
        let (spec, coeffs) = poly_rate_inputs(&kernel, target)?;
        let k = multiple_descent_k(d, n, cfg.params.iota_c, max_degree)?;
        let report = rate_report(&spec, &coeffs, cfg.noise.sigma, n, lambda, k, &cfg.rate)?;

        let x_test = sample_design_rng(&design, cfg.params.n_test, &mut stream(cfg.seed, key, 0, Role::Test))?;
        let f_test = eval_target(target, &kernel, &x_test)?;
        let trials = trial_ids(cfg);
        let errors = collect(map_range(trials.len(), par, |i| -> Result<f64> {
            let (x, y) = draw_training(cfg, &kernel, &design, target, n, key, trials[i])?;
            let f = fit(&gram(&kernel, &x, Parallelism::Sequential)?, &y, lambda)?;
            let pred = predict(&kernel, &x, &f.dual, &x_test, Parallelism::Sequential)?;
            Ok(rms_diff(&pred, &f_test))
        }))?;
        out.push(CurvePoint::new(d, errors, report));
    }
    Ok(out)
}

pub fn run_linearization(cfg: &ExperimentConfig, par: Parallelism) -> Result<Vec<LinearizationPoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (g, (d, n)) in grid(cfg, cfg.kernel()?.ambient_dim()).into_iter().enumerate() {
        let key = grid_key(g)?;
        let (kernel, design) = at_dim(cfg, d)?;
        let h1 = kernel.h_at_one().unwrap_or(f64::NAN);
        let trials = trial_ids(cfg);
        let extremes = collect(map_range(trials.len(), par, |i| -> Result<(f64, f64)> {
            let x = sample_design_rng(&design, n, &mut stream(cfg.seed, key, trials[i], Role::Design))?;
            let eig = sym_eigen(&gram(&kernel, &x, Parallelism::Sequential)?)?;
            Ok((*eig.values.last().unwrap_or(&0.0), eig.values[0]))
        }))?;
        let lo: Vec<f64> = extremes.iter().map(|e| e.0).collect();
        let hi: Vec<f64> = extremes.iter().map(|e| e.1).collect();
        let cond: Vec<f64> = extremes
            .iter()
            .map(|&(a, b)| if a > 0.0 { b / a } else { f64::INFINITY })
            .collect();
        out.push(LinearizationPoint {
            n,
            d,
            h1,
            sigma_min: Summary::of(&lo),
            sigma_max: Summary::of(&hi),
            cond: Summary::of(&cond),
        });
    }
    Ok(out)
}

pub fn run_diag_concentration(cfg: &ExperimentConfig, par: Parallelism) -> Result<Vec<DiagPoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (g, (d, n)) in grid(cfg, cfg.kernel()?.ambient_dim()).into_iter().enumerate() {
        let key = grid_key(g)?;
        let (kernel, design) = at_dim(cfg, d)?;
        let reference = match cfg.params.reference {
            Some(r) => r,
            None => kernel.h_at_one().unwrap_or(f64::NAN),
        };
        let trials = trial_ids(cfg);
        let stats = collect(map_range(trials.len(), par, |i| -> Result<f64> {
            let x = sample_design_rng(&design, n, &mut stream(cfg.seed, key, trials[i], Role::Design))?;
            diag_concentration_stat(&kernel, &x, reference)
        }))?;
        out.push(DiagPoint {
            n,
            d,
            reference,
            stat: Summary::of(&stats),
            stats,
        });
    }
    Ok(out)
}

pub fn run_gaussian_equivalence(cfg: &ExperimentConfig, par: Parallelism) -> Result<Vec<GepPoint>> {
    cfg.validate()?;
    let target = cfg.target()?;
    let lambda = fixed_lambda(cfg);
    let mut out = Vec::new();
    for (g, (d, n)) in grid(cfg, cfg.kernel()?.ambient_dim()).into_iter().enumerate() {
        let key = grid_key(g)?;
        let (kernel, design) = at_dim(cfg, d)?;
        let (spec, coeffs) = poly_rate_inputs(&kernel, target)?;
        let k = k_b_star(&spec, lambda, cfg.params.b, n)?.ok_or(KrrError::InfiniteIndex { n, b: cfg.params.b })?;
        let report = rate_report(&spec, &coeffs, cfg.noise.sigma, n, lambda, k, &cfg.rate)?;
        let trials = trial_ids(cfg);

        let x_test = sample_design_rng(&design, cfg.params.n_test, &mut stream(cfg.seed, key, 0, Role::Test))?;
        let f_test = eval_target(target, &kernel, &x_test)?;
        let kernel_errors = collect(map_range(trials.len(), par, |i| -> Result<f64> {
            let (x, y) = draw_training(cfg, &kernel, &design, target, n, key, trials[i])?;
            let f = fit(&gram(&kernel, &x, Parallelism::Sequential)?, &y, lambda)?;
            let pred = predict(&kernel, &x, &f.dual, &x_test, Parallelism::Sequential)?;
            Ok(rms_diff(&pred, &f_test))
        }))?;

        let lin = KernelSpec::LinearCov { spectrum: spec.clone() };
        let lin_design = DesignSpec::GaussianCov { spectrum: spec.clone() };
        let lin_target = TargetSpec::EigenCoeffs { coeffs: coeffs.clone() };
        let gaussian_errors = collect(map_range(trials.len(), par, |i| -> Result<f64> {
            let (x, y) = draw_training(cfg, &lin, &lin_design, &lin_target, n, key | GAUSSIAN_ARM, trials[i])?;
            let f = fit(&(&x * x.transpose()), &y, lambda)?;
            let beta = x.tr_mul(&f.dual);
            Ok(exact_linear_risk(&spec, beta.as_slice(), &coeffs))
        }))?;

        out.push(GepPoint {
            kernel: CurvePoint::new(d, kernel_errors, report.clone()),
            gaussian: CurvePoint::new(d, gaussian_errors, report),
        });
    }
    Ok(out)
}

pub fn run_smooth_rate(cfg: &ExperimentConfig) -> Result<SmoothResult> {
    cfg.validate()?;
    let TargetSpec::SourceCondition { s, alpha, .. } = *cfg.target()? else {
        return Err(KrrError::config("target", "must be a source_condition target"));
    };
    let coeffs = cfg.target()?.coefficients()?.unwrap_or_default();
    let spec = SpectrumModel::power_law(alpha, 1.0)?;
    let mut points = Vec::new();
    for &n in &cfg.sweep.n {
        let (k, prescribed) = power_decay_prescription(alpha, s, n)?;
        let lambda = match cfg.lambda {
            LambdaPolicy::Prescription => prescribed,
            LambdaPolicy::Fixed(v) => v,
            LambdaPolicy::Zero => 0.0,
        };
        let report = rate_report(&spec, &coeffs, cfg.noise.sigma, n, lambda, k, &cfg.rate)?;
        points.push(SmoothPoint { n, k, lambda, report });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.report.r_star > 0.0 && p.report.r_star.is_finite())
        .map(|p| ((p.n as f64).ln(), p.report.r_star.ln()))
        .unzip();
    let fitted = linear_fit(&xs, &ys);
    Ok(SmoothResult {
        points,
        slope: fitted.map_or(f64::NAN, |f| f.0),
        intercept: fitted.map_or(f64::NAN, |f| f.1),
        degenerate: fitted.is_none(),
    })
}

/// `E σ(g) σ(ρ g + √(1-ρ²) g')` for independent standard Gaussians.
fn correlated_moment(act: Activation, rho: f64) -> f64 {
    let rule = GaussHermite::n64();
    let perp = (1.0 - rho * rho).max(0.0).sqrt();
    rule.expect(|a| act.apply(a) * rule.expect(|b| act.apply(rho * a + perp * b)))
}

pub fn run_conjugate(cfg: &ExperimentConfig, par: Parallelism) -> Result<Vec<ConjugatePoint>> {
    cfg.validate()?;
    let p = &cfg.params;
    let (m, act, rho) = (p.m, p.activation, p.alignment);
    let d = m + 1;
    let mut w_t = vec![0.0; d];
    w_t[0] = 1.0;
    let (weights, delta) = feature_learning_weights(&w_t, m, act)?;
    let spectrum = conjugate_spectrum(&weights, act, ConjugateMethod::ClosedForm, par)?;
    let head = spectrum.eigenvalues[0];
    let second = spectrum.eigenvalues.get(1).copied().unwrap_or(0.0);
    let sq_norm = act.gaussian_sq_norm(1.0);

    let mut w_star = vec![0.0; d];
    w_star[0] = rho;
    w_star[d - 1] = (1.0 - rho * rho).max(0.0).sqrt();
    let target = TargetSpec::SingleNeuron { a_star: p.a_star, w_star, activation: act };
    // projection of f* on the leading eigenfunction, in RKHS coordinates
    let c1 = p.a_star * correlated_moment(act, rho) * (m as f64).sqrt() / sq_norm;
    let kernel = KernelSpec::Conjugate { weights, activation: act };
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d };
    let lambda = fixed_lambda(cfg);
    let sx = cfg.noise.sigma;

    let mut out = Vec::new();
    for (g, &n2) in cfg.sweep.n.iter().enumerate() {
        let key = grid_key(g)?;
        let report = rate_report(&spectrum.model, &[c1], sx, n2, lambda, 1, &cfg.rate)?;
        let x_test = sample_design_rng(&design, p.n_test, &mut stream(cfg.seed, key, 0, Role::Test))?;
        let phi_test = kernel.feature_matrix(&x_test, par)?;
        let f_test = eval_target(&target, &kernel, &x_test)?;
        let trials = trial_ids(cfg);
        let errors = collect(map_range(trials.len(), par, |i| -> Result<f64> {
            let (x, y) = draw_training(cfg, &kernel, &design, &target, n2, key, trials[i])?;
            let phi = kernel.feature_matrix(&x, Parallelism::Sequential)?;
            let f = fit(&(&phi * phi.transpose()), &y, lambda)?;
            Ok(rms_diff(&(&phi_test * phi.tr_mul(&f.dual)), &f_test))
        }))?;
        let nf = n2 as f64;
        let rate_terms = sx / nf.sqrt() + sx * (nf / m as f64).sqrt() + p.a_star.abs() / (sq_norm.sqrt() * nf);
        let approx_term = p.a_star.abs() * act.lipschitz() * (2.0 * (1.0 - rho)).max(0.0).sqrt();
        let error = Summary::of(&errors);
        out.push(ConjugatePoint {
            n2,
            m,
            d,
            delta,
            alignment: rho,
            lambda,
            sigma_sq_norm: sq_norm,
            head_eigenvalue: head,
            second_eigenvalue: second,
            error,
            errors,
            r_star: report.r_star,
            rate_terms,
            approx_term,
            ratio: error.median / rate_terms,
        });
    }
    Ok(out)
}
