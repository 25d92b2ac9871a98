//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Lines go straight to stdout so they show up under the default test capture.

use std::io::Write;
use std::time::{Duration, Instant};

use krr_core::activation::Activation;
use krr_core::conjugate::{conjugate_spectrum, gram_schmidt_completion, ConjugateMethod};
use krr_core::experiments::{
    run, run_conjugate, run_diag_concentration, run_gaussian_equivalence, run_linearization,
    run_multiple_descent, run_smooth_rate, ExperimentConfig, ExperimentKind, LambdaPolicy,
};
use krr_core::kernels::{gram, KernelSpec};
use krr_core::rates::{admissible_k, optimal_k, rate_report, RateConfig, Regime};
use krr_core::sampler::{sample_design, DesignSpec, Marginal, NoiseSpec, TargetSpec};
use krr_core::solver::{decompose, fit, predict, ridge_primal};
use krr_core::spectra::{empirical_integral_operator, poly_plateau_spectrum, SpectrumModel};
use krr_core::Parallelism;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("{tag} [{id:>2}] {name}: {detail} ({:.2}s)\n", elapsed.as_secs_f64());
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn criterion_01_primal_dual_and_decomposition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut woodbury, mut recompose, mut fixed_point) = (0.0f64, 0.0f64, 0.0f64);
    for inst in 0..50u64 {
        let n = rng.random_range(1..=50);
        let d = rng.random_range(1..=4);
        let degree = rng.random_range(0..=2);
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(0.1..1.0)).collect();
        let lambda = [0.0, 0.1, 1.0][rng.random_range(0..3)];
        let kernel = KernelSpec::poly(coeffs, d).unwrap();
        let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d };
        let x = sample_design(&design, n, 1000 + inst).unwrap();
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let phi = kernel.feature_matrix(&x, Parallelism::Sequential).unwrap();
        let f = fit(&gram(&kernel, &x, Parallelism::Sequential).unwrap(), &y, lambda).unwrap();

        let dual = phi.tr_mul(&f.dual);
        let primal = ridge_primal(&phi, &y, lambda).unwrap();
        woodbury = woodbury.max((&dual - &primal).norm() / primal.norm().max(f64::MIN_POSITIVE));

        let x_test = sample_design(&design, 64, 5000 + inst).unwrap();
        let phi_test = kernel.feature_matrix(&x_test, Parallelism::Sequential).unwrap();
        let direct = predict(&kernel, &x, &f.dual, &x_test, Parallelism::Sequential).unwrap();
        let p = phi.ncols();
        for k in 0..=p {
            let dec = decompose(&f, &phi, k).unwrap();
            let recomposed = phi_test.columns(0, k) * &dec.head + phi_test.columns(k, p - k) * &dec.tail;
            recompose = recompose.max((&recomposed - &direct).norm() / direct.norm().max(f64::MIN_POSITIVE));
            fixed_point = fixed_point.max(dec.fixed_point_residual);
        }
    }
    let elapsed = start.elapsed();
    let pass = woodbury <= 1e-8 && recompose <= 1e-8 && fixed_point <= 1e-6 && elapsed.as_secs_f64() < 10.0;
    verdict(
        1,
        "primal/dual and decomposition identities",
        pass,
        &format!("woodbury {woodbury:.2e}, recomposition {recompose:.2e}, fixed point {fixed_point:.2e}"),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_02_spectrum_oracle() {
    let start = Instant::now();
    let coeffs = [1.0, 1.0];
    let model = poly_plateau_spectrum(&coeffs, 3).unwrap();
    let kernel = KernelSpec::poly(coeffs.to_vec(), 3).unwrap();
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 3 };
    let emp = empirical_integral_operator(&kernel, &design, 200_000, 7, Parallelism::Parallel).unwrap();
    let e = &emp.eigenvalues;
    let next = e.get(4).copied().unwrap_or(0.0);
    let group_tight = e[1] / e[3] <= 1.1;
    let gaps = e[0] >= 2.0 * e[1] && e[3] >= 2.0 * next;
    let multiplicities = model.head().iter().map(|l| l.1).collect::<Vec<_>>() == vec![1, 3];
    let heights = [(e[0], model.eigenvalue(1)), (e[2], model.eigenvalue(3))]
        .iter()
        .all(|(a, b)| a / b <= 8.0 && b / a <= 8.0);
    let elapsed = start.elapsed();
    let pass = group_tight && gaps && multiplicities && heights && elapsed.as_secs_f64() < 30.0;
    verdict(
        2,
        "spectrum oracle",
        pass,
        &format!(
            "empirical {:.4} | {:.4} {:.4} {:.4} | {:.2e} vs plateau {:.4} | {:.4} x3",
            e[0],
            e[1],
            e[2],
            e[3],
            next,
            model.eigenvalue(1),
            model.eigenvalue(2)
        ),
        elapsed,
    );
    assert!(pass);
}

/// Straight-line evaluation of the five rate terms for a finite spectrum.
fn rate_oracle(sig: &[f64], c: &[f64], sx: f64, n: usize, lam: f64, k: usize) -> [f64; 5] {
    let nf = n as f64;
    let at = |v: &[f64], j: usize| if j < v.len() { v[j] } else { 0.0 };
    let tr: f64 = sig[k..].iter().sum();
    let tr2: f64 = sig[k..].iter().map(|s| s * s).sum();
    let mut tail_bias = 0.0;
    for j in k..sig.len().max(c.len()) {
        tail_bias += at(sig, j) * at(c, j) * at(c, j);
    }
    let tail_bias = tail_bias.sqrt();
    let absorb = if lam + tr > 0.0 { sx * (nf * tr2).sqrt() / (lam + tr) } else { 0.0 };
    let denom = 4.0 * lam + tr;
    if sig[0] * nf <= denom {
        let head_trace: f64 = sig[..k].iter().sum();
        let head_norm: f64 = (0..k).map(|j| at(c, j) * at(c, j)).sum::<f64>().sqrt();
        return [
            sx * (head_trace / denom).sqrt(),
            0.0,
            (sig[0] * nf / denom).sqrt() * tail_bias,
            head_norm * (denom / nf).sqrt(),
            absorb,
        ];
    }
    let threshold = denom / nf;
    let big = sig[..k].iter().filter(|&&s| s >= threshold).count();
    let small: f64 = sig[..k].iter().filter(|&&s| s < threshold).sum();
    let head: f64 = (0..k).map(|j| at(c, j) * at(c, j) / sig[j].max(threshold)).sum();
    [
        sx * (big as f64 / nf).sqrt(),
        if small > 0.0 { sx * (small / denom).sqrt() } else { 0.0 },
        tail_bias,
        head.sqrt() * (2.0 * lam + 3.0 * tr) / nf,
        absorb,
    ]
}

#[test]
fn criterion_03_rate_engine_arithmetic() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = RateConfig::default();
    let (mut worst, mut k_mismatch, mut compared) = (0.0f64, 0usize, 0usize);
    for _ in 0..20 {
        let rank = rng.random_range(1..=20);
        let mut sig: Vec<f64> = (0..rank).map(|_| rng.random_range(0.001..1.0f64)).collect();
        sig.sort_by(|a, b| b.total_cmp(a));
        let c: Vec<f64> = (0..rank).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sx = rng.random_range(0.0..2.0);
        let n = rng.random_range(1..60);
        let lam = if rng.random::<bool>() { 0.0 } else { rng.random_range(0.0..2.0) };
        let spec = SpectrumModel::from_eigenvalues(&sig).unwrap();
        let sig = spec.eigenvalues(spec.total_rank().unwrap());
        let mut scan: Option<(usize, f64)> = None;
        let admission = admissible_k(&spec, n, lam, &cfg, None).unwrap();
        for k in 0..=sig.len() {
            let r = rate_report(&spec, &c, sx, n, lam, k, &cfg).unwrap();
            let oracle = rate_oracle(&sig, &c, sx, n, lam, k);
            assert_eq!(r.regime == Regime::LargeRegularization, sig[0] * n as f64 <= 4.0 * lam + sig[k..].iter().sum::<f64>());
            let got = [r.term_var_head, r.term_var_j2, r.term_bias_tail, r.term_bias_head, r.term_noise_absorb];
            for (g, o) in got.iter().zip(&oracle) {
                worst = worst.max(rel(*g, *o));
                compared += 1;
            }
            let r_oracle = oracle.iter().copied().fold(0.0, f64::max);
            worst = worst.max(rel(r.r_star, r_oracle));
            if admission[k].1.admitted() && scan.is_none_or(|(_, best)| r_oracle < best) {
                scan = Some((k, r_oracle));
            }
        }
        let engine = optimal_k(&spec, &c, sx, n, lam, &cfg).ok().map(|(k, _)| k);
        if engine != scan.map(|s| s.0) {
            k_mismatch += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && k_mismatch == 0;
    verdict(
        3,
        "rate-engine arithmetic",
        pass,
        &format!("{compared} terms, max relative deviation {worst:.2e}, optimal_k mismatches {k_mismatch}"),
        elapsed,
    );
    assert!(pass);
}

fn poly_cfg(kind: ExperimentKind, coeffs: &[f64], design: DesignSpec) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.kernel = Some(KernelSpec::poly(coeffs.to_vec(), design.dim().unwrap()).unwrap());
    cfg.design = Some(design);
    cfg
}

fn multiple_descent_cfg() -> ExperimentConfig {
    let d = 10;
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Rademacher, d };
    let mut cfg = poly_cfg(ExperimentKind::MultipleDescent, &[1.0, 1.0, 1.0], design);
    cfg.target = Some(TargetSpec::EigenCoeffs { coeffs: vec![1.0; 66] });
    cfg.noise = NoiseSpec::gaussian(0.5);
    cfg.sweep.n = vec![15, 20, 30, 45, 65, 90];
    cfg.trials = 20;
    cfg.lambda = LambdaPolicy::Zero;
    cfg.seed = 4;
    cfg
}

#[test]
fn criterion_04_multiple_descent() {
    let start = Instant::now();
    let pts = run_multiple_descent(&multiple_descent_cfg(), Parallelism::Parallel).unwrap();
    let ratios: Vec<f64> = pts.iter().map(|p| p.ratio).collect();
    let c = ratios.iter().copied().fold(0.0, f64::max);
    let spread = c / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let pass = c <= 20.0 && spread <= 20.0 && elapsed.as_secs_f64() < 300.0;
    let curve: Vec<String> = pts.iter().map(|p| format!("N={} k={} {:.3}", p.n, p.k_used, p.ratio)).collect();
    verdict(
        4,
        "multiple descent",
        pass,
        &format!("fitted C {c:.3}, max/min ratio {spread:.3}; {}", curve.join(", ")),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_05_linearization() {
    let start = Instant::now();
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Rademacher, d: 60 };
    let mut cfg = poly_cfg(ExperimentKind::Linearization, &[0.0, 1.0, 1.0], design);
    cfg.sweep.n = vec![200];
    cfg.sweep.d = vec![60, 120];
    cfg.trials = 10;
    cfg.seed = 5;
    let pts = run_linearization(&cfg, Parallelism::Parallel).unwrap();
    let p = &pts[0];
    let h1 = p.h1;
    let within = |v: f64| v >= h1 / 2.0 && v <= 2.0 * h1;
    let cond_ok = p.cond.median <= 3.0;
    let extremes_ok = within(p.sigma_min.median) && within(p.sigma_max.median);
    let shrinks = pts[1].cond.median < p.cond.median;
    let elapsed = start.elapsed();
    let pass = cond_ok && extremes_ok && shrinks && elapsed.as_secs_f64() < 60.0;
    verdict(
        5,
        "linearization",
        pass,
        &format!(
            "d=60: median cond {:.2} (<= 3: {cond_ok}), extremes {:.3}, {:.3} vs h(1)={h1} (within 2x: {extremes_ok}); d=120 median cond {:.2} (shrinks: {shrinks})",
            p.cond.median, p.sigma_min.median, p.sigma_max.median, pts[1].cond.median
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_06_diag_concentration() {
    let start = Instant::now();
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 50 };
    let mut cfg = poly_cfg(ExperimentKind::DiagConcentration, &[0.0, 0.0, 1.0], design);
    cfg.sweep.n = vec![100];
    cfg.sweep.d = vec![50, 200, 800];
    cfg.trials = 20;
    cfg.seed = 6;
    let pts = run_diag_concentration(&cfg, Parallelism::Parallel).unwrap();
    let medians: Vec<f64> = pts.iter().map(|p| p.stat.median).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let last = medians[2];
    let elapsed = start.elapsed();
    let pass = decreasing && last <= 0.5 && elapsed.as_secs_f64() < 60.0;
    verdict(
        6,
        "diagonal concentration",
        pass,
        &format!("medians d=50,200,800: {:.4}, {:.4}, {:.4}", medians[0], medians[1], medians[2]),
        elapsed,
    );
    assert!(pass);
}

fn smooth_cfg(alpha: f64, s: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::SmoothRate);
    cfg.target = Some(TargetSpec::SourceCondition { s, alpha, eps: 0.01, truncation: 10_000 });
    cfg.noise = NoiseSpec::gaussian(1.0);
    cfg.lambda = LambdaPolicy::Prescription;
    cfg.sweep.n = (8..=16).map(|e| 1usize << e).collect();
    cfg
}

#[test]
fn criterion_07_power_decay_exponent() {
    let start = Instant::now();
    let a = run_smooth_rate(&smooth_cfg(2.0, 1.0)).unwrap();
    let b = run_smooth_rate(&smooth_cfg(3.0, 2.0)).unwrap();
    let elapsed = start.elapsed();
    let ok_a = (a.slope + 1.0 / 3.0).abs() <= 0.05;
    let ok_b = (b.slope + 3.0 / 7.0).abs() <= 0.05;
    let pass = ok_a && ok_b && elapsed.as_secs_f64() < 5.0;
    verdict(
        7,
        "power-decay exponent",
        pass,
        &format!("alpha=2,s=1 slope {:.4} (target -0.3333); alpha=3,s=2 slope {:.4} (target -0.4286)", a.slope, b.slope),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_08_gaussian_equivalence() {
    let start = Instant::now();
    let design = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 8 };
    let mut cfg = poly_cfg(ExperimentKind::GaussianEquivalence, &[1.0, 1.0, 1.0], design);
    cfg.target = Some(TargetSpec::EigenCoeffs { coeffs: vec![1.0; 45] });
    cfg.noise = NoiseSpec::gaussian(0.5);
    cfg.sweep.n = vec![20, 40, 80];
    cfg.trials = 20;
    cfg.seed = 8;
    let pts = run_gaussian_equivalence(&cfg, Parallelism::Parallel).unwrap();
    let inside = |r: f64| (0.1..=10.0).contains(&r);
    let ok = pts.iter().all(|p| inside(p.kernel.ratio) && inside(p.gaussian.ratio));
    let elapsed = start.elapsed();
    let pass = ok && elapsed.as_secs_f64() < 180.0;
    let curve: Vec<String> = pts
        .iter()
        .map(|p| format!("N={} k*={} kernel {:.3} gaussian {:.3}", p.kernel.n, p.kernel.k_used, p.kernel.ratio, p.gaussian.ratio))
        .collect();
    verdict(8, "gaussian equivalence ratio", pass, &curve.join(", "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_09_conjugate_kernel() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let m = 64;
    let w_t: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = gram_schmidt_completion(&w_t, m).unwrap();
    let act = Activation::Tanh;
    let par = Parallelism::Parallel;
    let cf = conjugate_spectrum(&w, act, ConjugateMethod::ClosedForm, par).unwrap();
    let quad = conjugate_spectrum(&w, act, ConjugateMethod::Quadrature, par).unwrap();
    let mc = conjugate_spectrum(&w, act, ConjugateMethod::MonteCarlo { samples: 1_000_000, seed: 9 }, par).unwrap();
    let level = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l_cf, l_q, l_mc) = (level(&cf.eigenvalues), level(&quad.eigenvalues), level(&mc.eigenvalues));
    let plateau = rel(l_cf, l_q).max(rel(l_cf, l_mc));
    let per_eig = cf
        .eigenvalues
        .iter()
        .zip(&quad.eigenvalues)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);

    let mut cfg = ExperimentConfig::new(ExperimentKind::Conjugate);
    cfg.params.m = 2048;
    cfg.params.alignment = 1.0;
    cfg.params.a_star = 1.0;
    cfg.params.n_test = 2000;
    cfg.noise = NoiseSpec::gaussian(0.2);
    cfg.sweep.n = vec![128];
    cfg.trials = 20;
    cfg.seed = 9;
    let run = &run_conjugate(&cfg, par).unwrap()[0];
    let elapsed = start.elapsed();
    let pass = plateau <= 1e-3 && per_eig <= 1e-6 && run.ratio <= 20.0 && elapsed.as_secs_f64() < 120.0;
    verdict(
        9,
        "conjugate kernel closed form",
        pass,
        &format!(
            "plateau closed/quadrature/MC {l_cf:.6e}/{l_q:.6e}/{l_mc:.6e} (max rel {plateau:.2e}), closed vs quadrature per eigenvalue {per_eig:.2e}; m=2048 N2=128 error {:.4} vs rate terms {:.4}, C {:.3}",
            run.error.median, run.rate_terms, run.ratio
        ),
        elapsed,
    );
    assert!(pass);
}

fn small_configs() -> Vec<ExperimentConfig> {
    let mut md = multiple_descent_cfg();
    md.sweep.n = vec![15, 45];
    md.trials = 5;
    md.params.n_test = 1000;

    let rad = DesignSpec::IidCoordinates { marginal: Marginal::Rademacher, d: 20 };
    let mut lin = poly_cfg(ExperimentKind::Linearization, &[0.0, 1.0, 1.0], rad);
    lin.sweep.n = vec![50];
    lin.trials = 4;

    let gauss = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 20 };
    let mut diag = poly_cfg(ExperimentKind::DiagConcentration, &[0.0, 0.0, 1.0], gauss);
    diag.sweep.n = vec![50];
    diag.sweep.d = vec![20, 40];
    diag.trials = 4;

    let gauss8 = DesignSpec::IidCoordinates { marginal: Marginal::Gaussian, d: 8 };
    let mut geq = poly_cfg(ExperimentKind::GaussianEquivalence, &[1.0, 1.0, 1.0], gauss8);
    geq.target = Some(TargetSpec::EigenCoeffs { coeffs: vec![1.0; 45] });
    geq.noise = NoiseSpec::gaussian(0.5);
    geq.sweep.n = vec![20, 40];
    geq.trials = 4;
    geq.params.n_test = 1000;

    let smooth = smooth_cfg(2.0, 1.0);

    let mut conj = ExperimentConfig::new(ExperimentKind::Conjugate);
    conj.params.m = 128;
    conj.params.n_test = 500;
    conj.noise = NoiseSpec::gaussian(0.2);
    conj.sweep.n = vec![32];
    conj.trials = 4;

    vec![md, lin, diag, geq, smooth, conj]
}

#[test]
fn criterion_10_reproducibility() {
    let start = Instant::now();
    let mut differing = Vec::new();
    for cfg in small_configs() {
        let a = run(&cfg, Parallelism::Parallel).unwrap().table().to_csv();
        let b = run(&cfg, Parallelism::Parallel).unwrap().table().to_csv();
        let c = run(&cfg, Parallelism::Sequential).unwrap().table().to_csv();
        if a != b || a != c {
            differing.push(cfg.experiment.name());
        }
    }
    let elapsed = start.elapsed();
    let pass = differing.is_empty();
    verdict(
        10,
        "reproducibility",
        pass,
        &format!("6 experiments rerun 3x (parallel, parallel, sequential); differing: {differing:?}"),
        elapsed,
    );
    assert!(pass);
}
