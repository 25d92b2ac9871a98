//! Theoretical error rate `r*(λ, k)` and its admissibility diagnostics.
//!
//! Target coefficients `c_j` are coordinates on the scaled eigenbasis
//! `√σ_j f_j`, so `‖f‖²_{L2} = Σ σ_j c_j²` and `‖f‖²_H = Σ c_j²`.
//! Every absolute constant is 1 unless overridden in [`RateConfig`].

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{KrrError, Result};
use crate::spectra::{tail_stats, SpectrumModel, TailStats, POWER_TAIL_CUTOFF};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Embedding {
    pub theta: f64,
    pub c_emb: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    #[serde(default = "one")]
    pub kappa_dm: f64,
    #[serde(default = "one")]
    pub c_rip: f64,
    #[serde(default)]
    pub embedding: Option<Embedding>,
    #[serde(default = "one")]
    pub c_kappa_rip: f64,
    #[serde(default = "one")]
    pub c_kappa_dm: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            kappa_dm: 1.0,
            c_rip: 1.0,
            embedding: None,
            c_kappa_rip: 1.0,
            c_kappa_dm: 1.0,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.kappa_dm) {
            return Err(KrrError::param("kappa_dm", "must lie in (0, 1]"));
        }
        if !unit(self.c_rip) {
            return Err(KrrError::param("c_rip", "must lie in (0, 1]"));
        }
        if !(self.c_kappa_rip > 0.0 && self.c_kappa_rip.is_finite()) {
            return Err(KrrError::param("c_kappa_rip", "must be positive"));
        }
        if !(self.c_kappa_dm > 0.0 && self.c_kappa_dm.is_finite()) {
            return Err(KrrError::param("c_kappa_dm", "must be positive"));
        }
        if let Some(e) = &self.embedding {
            if !(0.0..=1.0).contains(&e.theta) {
                return Err(KrrError::param("theta", "must lie in [0, 1]"));
            }
            if !(e.c_emb > 0.0 && e.c_emb.is_finite()) {
                return Err(KrrError::param("c_emb", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Standard,
    LargeRegularization,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::LargeRegularization => "large_regularization",
        }
    }
}

/// Why a `k` was admitted or rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    /// DM condition holds and `k ≤ c_rip N`.
    SmallK,
    /// DM condition holds and the `k > N` extra and RIP conditions hold.
    ExtraCondition,
    /// `N > c κ_DM d*`.
    DmViolated,
    /// `k > c_rip N` and the case-split extra condition fails.
    ExtraConditionFailed,
    /// `k > c_rip N` and `κ_DM (4λ + Tr) < N R_N²`.
    RipConditionFailed,
    /// `k > c_rip N` but no `R_N` is available.
    RipUnknown,
}

impl Admission {
    pub fn admitted(self) -> bool {
        matches!(self, Admission::SmallK | Admission::ExtraCondition)
    }
}

fn ser_extended<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

/// All rate quantities at one `(N, λ, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub sigma_xi: f64,
    pub regime: Regime,
    pub threshold: f64,
    pub j1_size: usize,
    pub j2_sigma_sum: f64,
    pub tail_trace: f64,
    pub tail_trace_sq: f64,
    pub tail_op_norm: f64,
    pub term_var_head: f64,
    pub term_var_j2: f64,
    pub term_bias_tail: f64,
    pub term_bias_head: f64,
    pub term_noise_absorb: f64,
    pub r_star: f64,
    /// `None` when undefined (`σ_{k+1} = 0` and `λ = 0`).
    #[serde(serialize_with = "ser_extended")]
    pub dm_dimension: Option<f64>,
    pub admissible: bool,
    pub admission: Admission,
}

impl RateReport {
    pub const CSV_HEADER: &'static str = "n,k,lambda,sigma_xi,regime,threshold,j1_size,j2_sigma_sum,\
tail_trace,tail_trace_sq,tail_op_norm,term_var_head,term_var_j2,term_bias_tail,term_bias_head,\
term_noise_absorb,r_star,dm_dimension,admissible,admission";

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn csv_row(&self) -> String {
        use crate::experiments::report::fmt_f64;
        let regime = self.regime.name();
        let admission = serde_json::to_string(&self.admission).unwrap();
        [
            self.n.to_string(),
            self.k.to_string(),
            fmt_f64(self.lambda),
            fmt_f64(self.sigma_xi),
            regime.to_string(),
            fmt_f64(self.threshold),
            self.j1_size.to_string(),
            fmt_f64(self.j2_sigma_sum),
            fmt_f64(self.tail_trace),
            fmt_f64(self.tail_trace_sq),
            fmt_f64(self.tail_op_norm),
            fmt_f64(self.term_var_head),
            fmt_f64(self.term_var_j2),
            fmt_f64(self.term_bias_tail),
            fmt_f64(self.term_bias_head),
            fmt_f64(self.term_noise_absorb),
            fmt_f64(self.r_star),
            self.dm_dimension.map_or("undefined".to_string(), fmt_f64),
            self.admissible.to_string(),
            admission.trim_matches('"').to_string(),
        ]
        .join(",")
    }
}

/// Modified Dvoretzky–Milman dimension `(Tr Γ_{k+1:∞} + λ) / σ_{k+1}`.
pub fn dm_dimension(spec: &SpectrumModel, k: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    dm_from_stats(&tail_stats(spec, k), lambda)
}

fn dm_from_stats(t: &TailStats, lambda: f64) -> Result<f64> {
    if t.op_norm > 0.0 {
        Ok((t.trace + lambda) / t.op_norm)
    } else if lambda > 0.0 {
        Ok(f64::INFINITY)
    } else {
        Err(KrrError::Undefined(
            "DM dimension with an empty tail and lambda = 0".into(),
        ))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(KrrError::param("lambda", "must be finite and nonnegative"));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(KrrError::param("N", "must be at least 1"));
    }
    Ok(())
}

fn threshold(cfg: &RateConfig, lambda: f64, t: &TailStats, n: usize) -> f64 {
    cfg.kappa_dm * (4.0 * lambda + t.trace) / n as f64
}

/// `(|J1|, Σ_{j∈J2} σ_j)` with `J1 = {j ≤ k : σ_j ≥ κ_DM (4λ + Tr)/N}`.
pub fn partition_j(
    spec: &SpectrumModel,
    k: usize,
    lambda: f64,
    n: usize,
    cfg: &RateConfig,
) -> Result<(usize, f64)> {
    check_lambda(lambda)?;
    check_n(n)?;
    let ctx = RateContext::new(spec, &[], k)?;
    let t = tail_stats(spec, k);
    let thr = threshold(cfg, lambda, &t, n);
    let j1 = ctx.j1_size(k, thr);
    Ok((j1, ctx.range_sigma(j1, k)))
}

/// `√(Σ_{j≤k} c_j² / max(σ_j, κ_DM (4λ + Tr)/N))`.
pub fn thresholded_head_norm(
    spec: &SpectrumModel,
    coeffs: &[f64],
    k: usize,
    lambda: f64,
    n: usize,
    cfg: &RateConfig,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_n(n)?;
    let ctx = RateContext::new(spec, coeffs, k)?;
    let t = tail_stats(spec, k);
    let thr = threshold(cfg, lambda, &t, n);
    Ok(ctx.thresholded_head_sq(k, thr).sqrt())
}

/// Expanded eigenvalues and target coefficients with running sums.
///
/// Head sums accumulate upward from `j = 1` and tail sums downward from the
/// last coefficient, so a table built once evaluates every `k` with exactly
/// the arithmetic of a fresh single-`k` evaluation.
struct RateContext {
    sigma: Vec<f64>,
    c2: Vec<f64>,
    // pre_*[k] = Σ_{j ≤ k}
    pre_sigma: Vec<f64>,
    pre_c2: Vec<f64>,
    pre_c2_over_sigma: Vec<f64>,
    // suf_sigma_c2[k] = Σ_{j > k} σ_j c_j²
    suf_sigma_c2: Vec<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl RateContext {
    fn new(spec: &SpectrumModel, coeffs: &[f64], k_max: usize) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(KrrError::NonFinite("target coefficients"));
        }
        let len = k_max.max(coeffs.len());
        let mut sigma = spec.eigenvalues(len);
        sigma.resize(len, 0.0);
        let mut c2: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
        c2.resize(len, 0.0);
        let mut pre_sigma = vec![0.0; len + 1];
        let mut pre_c2 = vec![0.0; len + 1];
        let mut pre_c2_over_sigma = vec![0.0; len + 1];
        for j in 0..len {
            pre_sigma[j + 1] = pre_sigma[j] + sigma[j];
            pre_c2[j + 1] = pre_c2[j] + c2[j];
            pre_c2_over_sigma[j + 1] = pre_c2_over_sigma[j] + ratio(c2[j], sigma[j]);
        }
        let mut suf_sigma_c2 = vec![0.0; len + 1];
        for j in (0..len).rev() {
            suf_sigma_c2[j] = suf_sigma_c2[j + 1] + sigma[j] * c2[j];
        }
        Ok(RateContext {
            sigma,
            c2,
            pre_sigma,
            pre_c2,
            pre_c2_over_sigma,
            suf_sigma_c2,
        })
    }

    /// `|J1|`; `J1` is a prefix of `1..=k` because `σ` is nonincreasing.
    fn j1_size(&self, k: usize, thr: f64) -> usize {
        self.sigma[..k].partition_point(|s| *s >= thr)
    }

    fn range_sigma(&self, from: usize, to: usize) -> f64 {
        // an empty float sum is -0.0
        self.sigma[from..to].iter().sum::<f64>() + 0.0
    }

    fn thresholded_head_sq(&self, k: usize, thr: f64) -> f64 {
        let j1 = self.j1_size(k, thr);
        let rest: f64 = self.c2[j1..k].iter().sum();
        self.pre_c2_over_sigma[j1] + ratio(rest, thr)
    }
}

fn product(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

struct Terms {
    regime: Regime,
    threshold: f64,
    j1: usize,
    j2_sum: f64,
    var_head: f64,
    var_j2: f64,
    bias_tail: f64,
    bias_head: f64,
    noise_absorb: f64,
}

impl Terms {
    fn r_star(&self) -> f64 {
        [
            self.var_head,
            self.var_j2,
            self.bias_tail,
            self.bias_head,
            self.noise_absorb,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn compute_terms(
    ctx: &RateContext,
    t: &TailStats,
    sigma1: f64,
    sigma_xi: f64,
    n: usize,
    lambda: f64,
    k: usize,
    cfg: &RateConfig,
) -> Terms {
    let nf = n as f64;
    let thr = threshold(cfg, lambda, t, n);
    let j1 = ctx.j1_size(k, thr);
    let j2_sum = ctx.range_sigma(j1, k);
    let denom = 4.0 * lambda + t.trace;
    let bias_tail = ctx.suf_sigma_c2[k].sqrt();
    let noise_absorb = if lambda + t.trace > 0.0 {
        product(sigma_xi, (nf * t.trace_sq).sqrt()) / (lambda + t.trace)
    } else {
        0.0
    };
    if sigma1 * nf <= cfg.kappa_dm * denom {
        Terms {
            regime: Regime::LargeRegularization,
            threshold: thr,
            j1,
            j2_sum,
            var_head: product(sigma_xi, ratio(ctx.pre_sigma[k], denom).sqrt()),
            var_j2: 0.0,
            bias_tail: product(ratio(sigma1 * nf, denom).sqrt(), bias_tail),
            bias_head: product(ctx.pre_c2[k].sqrt(), (denom / nf).sqrt()),
            noise_absorb,
        }
    } else {
        Terms {
            regime: Regime::Standard,
            threshold: thr,
            j1,
            j2_sum,
            var_head: product(sigma_xi, (j1 as f64 / nf).sqrt()),
            var_j2: product(sigma_xi, ratio(j2_sum, denom).sqrt()),
            bias_tail,
            bias_head: product(
                ctx.thresholded_head_sq(k, thr).sqrt(),
                (2.0 * lambda + 3.0 * t.trace) / nf,
            ),
            noise_absorb,
        }
    }
}

struct Evaluator<'a> {
    spec: &'a SpectrumModel,
    ctx: RateContext,
    sigma_xi: f64,
    n: usize,
    lambda: f64,
    cfg: &'a RateConfig,
    r_n: Option<f64>,
}

impl Evaluator<'_> {
    fn admission(&self, k: usize, t: &TailStats, terms: &Terms) -> Result<Admission> {
        let nf = self.n as f64;
        let dm_ok = match dm_from_stats(t, self.lambda) {
            Ok(d) => nf <= self.cfg.c_kappa_dm * self.cfg.kappa_dm * d,
            Err(_) => false,
        };
        if !dm_ok {
            return Ok(Admission::DmViolated);
        }
        if k as f64 <= self.cfg.c_rip * nf {
            return Ok(Admission::SmallK);
        }
        let sigma1 = self.spec.top();
        let budget = self.cfg.kappa_dm * (4.0 * self.lambda + t.trace);
        let extra = if nf * sigma1 >= budget {
            terms.j2_sum <= budget * (1.0 - terms.j1 as f64 / nf)
        } else {
            self.ctx.pre_sigma[k] <= nf * sigma1
        };
        if !extra {
            return Ok(Admission::ExtraConditionFailed);
        }
        let r_n = match self.r_n {
            Some(r) => r,
            None if self.cfg.embedding.is_some() => rip_fixed_point(self.spec, k, self.n, self.cfg)?,
            None => return Ok(Admission::RipUnknown),
        };
        if budget >= nf * r_n * r_n {
            Ok(Admission::ExtraCondition)
        } else {
            Ok(Admission::RipConditionFailed)
        }
    }

    fn report(&self, k: usize) -> Result<RateReport> {
        let t = tail_stats(self.spec, k);
        let terms = compute_terms(
            &self.ctx,
            &t,
            self.spec.top(),
            self.sigma_xi,
            self.n,
            self.lambda,
            k,
            self.cfg,
        );
        let admission = self.admission(k, &t, &terms)?;
        Ok(RateReport {
            n: self.n,
            k,
            lambda: self.lambda,
            sigma_xi: self.sigma_xi,
            regime: terms.regime,
            threshold: terms.threshold,
            j1_size: terms.j1,
            j2_sigma_sum: terms.j2_sum,
            tail_trace: t.trace,
            tail_trace_sq: t.trace_sq,
            tail_op_norm: t.op_norm,
            term_var_head: terms.var_head,
            term_var_j2: terms.var_j2,
            term_bias_tail: terms.bias_tail,
            term_bias_head: terms.bias_head,
            term_noise_absorb: terms.noise_absorb,
            r_star: terms.r_star(),
            dm_dimension: dm_from_stats(&t, self.lambda).ok(),
            admissible: admission.admitted(),
            admission,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluator<'a>(
    spec: &'a SpectrumModel,
    coeffs: &[f64],
    sigma_xi: f64,
    n: usize,
    lambda: f64,
    k_max: usize,
    cfg: &'a RateConfig,
    r_n: Option<f64>,
) -> Result<Evaluator<'a>> {
    check_lambda(lambda)?;
    check_n(n)?;
    cfg.validate()?;
    if !(sigma_xi >= 0.0 && sigma_xi.is_finite()) {
        return Err(KrrError::param("sigma_xi", "must be finite and nonnegative"));
    }
    Ok(Evaluator {
        spec,
        ctx: RateContext::new(spec, coeffs, k_max)?,
        sigma_xi,
        n,
        lambda,
        cfg,
        r_n,
    })
}

/// Rate report at a single `k`.
pub fn rate_report(
    spec: &SpectrumModel,
    coeffs: &[f64],
    sigma_xi: f64,
    n: usize,
    lambda: f64,
    k: usize,
    cfg: &RateConfig,
) -> Result<RateReport> {
    evaluator(spec, coeffs, sigma_xi, n, lambda, k, cfg, None)?.report(k)
}

/// Largest `k` considered by exhaustive scans.
pub fn scan_limit(spec: &SpectrumModel, n: usize) -> usize {
    match spec.total_rank() {
        Some(r) => r,
        None => spec.head_len().max(4 * n).min(POWER_TAIL_CUTOFF),
    }
}

/// Admission status of every `k` in `0..=scan_limit`.
pub fn admissible_k(
    spec: &SpectrumModel,
    n: usize,
    lambda: f64,
    cfg: &RateConfig,
    r_n: Option<f64>,
) -> Result<Vec<(usize, Admission)>> {
    let limit = scan_limit(spec, n);
    let ev = evaluator(spec, &[], 0.0, n, lambda, limit, cfg, r_n)?;
    (0..=limit)
        .map(|k| {
            let t = tail_stats(spec, k);
            let terms = compute_terms(&ev.ctx, &t, spec.top(), 0.0, n, lambda, k, cfg);
            Ok((k, ev.admission(k, &t, &terms)?))
        })
        .collect()
}

/// Smallest admissible `k` minimizing `r*`.
pub fn optimal_k(
    spec: &SpectrumModel,
    coeffs: &[f64],
    sigma_xi: f64,
    n: usize,
    lambda: f64,
    cfg: &RateConfig,
) -> Result<(usize, RateReport)> {
    let limit = scan_limit(spec, n);
    let ev = evaluator(spec, coeffs, sigma_xi, n, lambda, limit, cfg, None)?;
    let mut best: Option<RateReport> = None;
    for k in 0..=limit {
        let r = ev.report(k)?;
        if !r.admissible {
            continue;
        }
        if best.as_ref().is_none_or(|b| r.r_star < b.r_star) {
            best = Some(r);
        }
    }
    best.map(|b| (b.k, b)).ok_or(KrrError::EmptyAdmissibleSet)
}

/// `min{k : (λ + Tr Γ_{k+1:∞}) / σ_{k+1} ≥ bN}`, or `None` when no scanned `k` qualifies.
pub fn k_b_star(spec: &SpectrumModel, lambda: f64, b: f64, n: usize) -> Result<Option<usize>> {
    check_lambda(lambda)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(KrrError::param("b", "must be positive"));
    }
    let goal = b * n as f64;
    let limit = match spec.total_rank() {
        Some(r) => r,
        None => POWER_TAIL_CUTOFF,
    };
    for k in 0..=limit {
        if let Ok(d) = dm_dimension(spec, k, lambda) {
            if d >= goal {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

/// Which estimate produced a RIP fixed-point value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RipCase {
    Zero,
    Plateau,
    Trace,
    Generic,
}

/// Upper estimate of the RIP fixed point `R_N` and the case that produced it.
pub fn rip_fixed_point_case(
    spec: &SpectrumModel,
    k: usize,
    n: usize,
    cfg: &RateConfig,
) -> Result<(f64, RipCase)> {
    let emb = cfg
        .embedding
        .ok_or_else(|| KrrError::param("embedding", "RIP estimate needs theta and C"))?;
    if n < 2 {
        return Err(KrrError::param("N", "RIP estimate needs N >= 2"));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let c = cfg.c_kappa_rip;
    let budget = c * c / emb.c_emb * nf / (ln * ln);
    let sigma = spec.eigenvalues(k);
    if sigma.len() < k {
        return Err(KrrError::param("k", "exceeds the spectrum rank"));
    }
    let theta = emb.theta;
    if theta == 0.0 {
        if k as f64 <= budget {
            return Ok((0.0, RipCase::Zero));
        }
        let trace: f64 = sigma.iter().sum();
        let by_trace = (emb.c_emb.sqrt() / c) * trace.sqrt() * ln / nf.sqrt();
        // Σ_{j ≤ k} min(σ_j, R²) ≤ budget R² holds at R² = σ_{k0} iff
        // Σ_{k0 ≤ j ≤ k} σ_j ≤ (budget - k0 + 1) σ_{k0}
        let mut suffix = vec![0.0; k + 1];
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] + sigma[j];
        }
        let mut k_star = None;
        for k0 in 1..=k {
            let room = budget - k0 as f64 + 1.0;
            if room <= 0.0 {
                break;
            }
            if suffix[k0 - 1] <= room * sigma[k0 - 1] {
                k_star = Some(k0);
            }
        }
        return Ok(match k_star {
            Some(k0) if sigma[k0 - 1].sqrt() <= by_trace => (sigma[k0 - 1].sqrt(), RipCase::Plateau),
            _ => (by_trace, RipCase::Trace),
        });
    }
    let inv_sum: f64 = sigma.iter().map(|s| s.powf(-theta)).sum();
    if inv_sum <= budget {
        return Ok((0.0, RipCase::Zero));
    }
    let generic = if theta < 1.0 {
        let s: f64 = sigma.iter().map(|s| s.powf(1.0 - theta)).sum();
        (emb.c_emb / (c * c) * s / nf).sqrt() * ln
    } else {
        emb.c_emb.sqrt() / c * ln * (k as f64).sqrt() / nf.sqrt()
    };
    Ok((generic, RipCase::Generic))
}

/// Upper estimate of the RIP fixed point `R_N`.
pub fn rip_fixed_point(spec: &SpectrumModel, k: usize, n: usize, cfg: &RateConfig) -> Result<f64> {
    rip_fixed_point_case(spec, k, n, cfg).map(|r| r.0)
}

/// Classical ridge bound `(1 + Tr Γ/λ)² · bias² + (σ_ξ²/N) · Σ σ_j/(σ_j + λ/N)`.
pub fn classical_bound(
    spec: &SpectrumModel,
    coeffs: &[f64],
    sigma_xi: f64,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    check_n(n)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(KrrError::param("lambda", "classical bound needs lambda > 0"));
    }
    let mu = lambda / n as f64;
    let trace = tail_stats(spec, 0).trace;
    let sig = spec.eigenvalues(coeffs.len());
    let bias: f64 = coeffs
        .iter()
        .zip(&sig)
        .map(|(c, s)| c * c * s * mu / (s + mu))
        .sum();
    let explicit = scan_limit(spec, n).max(spec.head_len()).min(POWER_TAIL_CUTOFF);
    let mut dof: f64 = spec
        .eigenvalues(explicit)
        .iter()
        .map(|s| s / (s + mu))
        .sum();
    if spec.total_rank().is_none() {
        // remaining terms satisfy σ/(σ+μ) ≤ σ/μ
        dof += tail_stats(spec, explicit).trace / mu;
    }
    let lead = 1.0 + trace / lambda;
    Ok(lead * lead * bias + sigma_xi * sigma_xi / n as f64 * dof)
}

/// `k = round(N^{1/(1+(s∧2)α)})`, `λ = N k^{-α}`.
pub fn power_decay_prescription(alpha: f64, s: f64, n: usize) -> Result<(usize, f64)> {
    let s2 = s.min(2.0);
    if !(s2 * alpha > 1.0) || !alpha.is_finite() {
        return Err(KrrError::param("alpha", "need (s ∧ 2) alpha > 1"));
    }
    check_n(n)?;
    let nf = n as f64;
    let k = (nf.powf(1.0 / (1.0 + s2 * alpha)).round() as usize).max(1);
    Ok((k, nf * (k as f64).powf(-alpha)))
}
