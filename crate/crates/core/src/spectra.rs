//! Analytic spectra of kernel integral operators.
//!
//! A [`SpectrumModel`] is a finite head of plateaus `(value, multiplicity)`
//! optionally followed by a power-law tail `σ_j = scale · j^{-alpha}`.
//! Indices are 1-based throughout, matching `σ_1 ≥ σ_2 ≥ …`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KrrError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{binomial, sym_eigen};
use crate::par::{map_blocks, Parallelism};
use crate::sampler::{sample_design_rng, stream, DesignSpec, Role};

/// Explicit summation cutoff for power tails.
pub const POWER_TAIL_CUTOFF: usize = 1_000_000;

/// Samples per block in the Monte Carlo oracle.
const ORACLE_BLOCK: usize = 4096;

/// Largest feature dimension the oracle accepts.
pub const ORACLE_MAX_FEATURES: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub alpha: f64,
    #[serde(rename = "start")]
    pub start_index: usize,
    pub scale: f64,
}

impl PowerTail {
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.scale * (j as f64).powf(-self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumDoc {
    head: Vec<(f64, usize)>,
    #[serde(default)]
    tail: Option<PowerTail>,
}

/// Ordered eigenvalue description of an integral operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumDoc", into = "SpectrumDoc")]
pub struct SpectrumModel {
    head: Vec<(f64, usize)>,
    tail: Option<PowerTail>,
    head_len: usize,
}

impl TryFrom<SpectrumDoc> for SpectrumModel {
    type Error = KrrError;
    fn try_from(doc: SpectrumDoc) -> Result<Self> {
        SpectrumModel::new(doc.head, doc.tail)
    }
}

impl From<SpectrumModel> for SpectrumDoc {
    fn from(s: SpectrumModel) -> Self {
        SpectrumDoc {
            head: s.head,
            tail: s.tail,
        }
    }
}

impl SpectrumModel {
    pub fn new(head: Vec<(f64, usize)>, tail: Option<PowerTail>) -> Result<Self> {
        if head.is_empty() && tail.is_none() {
            return Err(KrrError::EmptySpectrum);
        }
        let mut prev = f64::INFINITY;
        let mut head_len = 0usize;
        for &(v, m) in &head {
            if !(v.is_finite() && v > 0.0) {
                return Err(KrrError::InvalidSpectrum(format!(
                    "plateau value {v} must be finite and positive"
                )));
            }
            if m == 0 {
                return Err(KrrError::InvalidSpectrum("zero multiplicity".into()));
            }
            if v > prev {
                return Err(KrrError::InvalidSpectrum(format!(
                    "plateaus must be nonincreasing ({v} after {prev})"
                )));
            }
            prev = v;
            head_len = head_len
                .checked_add(m)
                .ok_or(KrrError::Overflow("head length"))?;
        }
        if let Some(t) = &tail {
            if !(t.alpha.is_finite() && t.alpha > 1.0) {
                return Err(KrrError::InvalidSpectrum(format!(
                    "tail exponent {} must exceed 1",
                    t.alpha
                )));
            }
            if !(t.scale.is_finite() && t.scale > 0.0) {
                return Err(KrrError::InvalidSpectrum("tail scale must be positive".into()));
            }
            if t.start_index != head_len + 1 {
                return Err(KrrError::InvalidSpectrum(format!(
                    "tail starts at {} but the head ends at {head_len}",
                    t.start_index
                )));
            }
            if t.eigenvalue(t.start_index) > prev {
                return Err(KrrError::InvalidSpectrum(
                    "first tail eigenvalue exceeds the smallest head eigenvalue".into(),
                ));
            }
        }
        Ok(SpectrumModel {
            head,
            tail,
            head_len,
        })
    }

    /// Finite spectrum from an explicit nonincreasing list, merging exact repeats.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        let mut head: Vec<(f64, usize)> = Vec::new();
        for &v in values {
            match head.last_mut() {
                Some((last, m)) if *last == v => *m += 1,
                _ => head.push((v, 1)),
            }
        }
        SpectrumModel::new(head, None)
    }

    /// Pure power law `σ_j = scale · j^{-alpha}` for `j ≥ 1`.
    pub fn power_law(alpha: f64, scale: f64) -> Result<Self> {
        SpectrumModel::new(
            Vec::new(),
            Some(PowerTail {
                alpha,
                start_index: 1,
                scale,
            }),
        )
    }

    pub fn head(&self) -> &[(f64, usize)] {
        &self.head
    }

    pub fn tail(&self) -> Option<&PowerTail> {
        self.tail.as_ref()
    }

    /// Sum of head multiplicities.
    pub fn head_len(&self) -> usize {
        self.head_len
    }

    /// Number of nonzero eigenvalues, `None` when a tail makes it unbounded.
    pub fn total_rank(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => Some(self.head_len),
        }
    }

    /// `σ_j` (1-based); zero beyond a finite rank.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        assert!(j >= 1, "eigenvalues are 1-indexed");
        if j <= self.head_len {
            let mut end = 0;
            for &(v, m) in &self.head {
                end += m;
                if j <= end {
                    return v;
                }
            }
        }
        self.tail.map_or(0.0, |t| t.eigenvalue(j))
    }

    /// `σ_1`.
    pub fn top(&self) -> f64 {
        self.eigenvalue(1)
    }

    /// The first `n` eigenvalues of the expanded sequence (shorter for finite rank).
    pub fn eigenvalues(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for &(v, m) in &self.head {
            let take = m.min(n - out.len());
            out.extend(std::iter::repeat_n(v, take));
            if out.len() == n {
                return out;
            }
        }
        if let Some(t) = &self.tail {
            let start = out.len() + 1;
            out.extend((start..=n).map(|j| t.eigenvalue(j)));
        }
        out
    }

    /// Finite truncation to the first `rank` eigenvalues.
    pub fn truncated(&self, rank: usize) -> Result<SpectrumModel> {
        SpectrumModel::from_eigenvalues(&self.eigenvalues(rank))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| KrrError::InvalidSpectrum(e.to_string()))
    }
}

/// Tail quantities `Tr Γ_{k+1:∞}`, `Tr Γ²_{k+1:∞}` and `σ_{k+1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TailStats {
    pub trace: f64,
    pub trace_sq: f64,
    pub op_norm: f64,
    /// Half-width of the integral bracket on the power-tail part of `trace`.
    pub remainder_bound: f64,
    /// Same for `trace_sq`.
    pub remainder_bound_sq: f64,
}

struct SuffixTable {
    // sums[a] = Σ_{j=a}^{M} j^{-p}, a in 1..=M; sums[M + 1] = 0
    sums: Vec<f64>,
}

fn suffix_table(p: f64) -> Arc<SuffixTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<SuffixTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&p.to_bits()) {
        return Arc::clone(t);
    }
    let m = POWER_TAIL_CUTOFF;
    let mut sums = vec![0.0; m + 2];
    for j in (1..=m).rev() {
        sums[j] = sums[j + 1] + (j as f64).powf(-p);
    }
    let table = Arc::new(SuffixTable { sums });
    cache
        .lock()
        .unwrap()
        .entry(p.to_bits())
        .or_insert(table)
        .clone()
}

/// `Σ_{j≥a} j^{-p}` as (midpoint, half-width) of the integral bracket.
fn power_sum_from(p: f64, a: usize) -> (f64, f64) {
    let m = POWER_TAIL_CUTOFF;
    let integral = |x: f64| x.powf(1.0 - p) / (p - 1.0);
    if a <= m {
        let explicit = suffix_table(p).sums[a];
        let (lo, hi) = (integral(m as f64 + 1.0), integral(m as f64));
        (explicit + 0.5 * (lo + hi), 0.5 * (hi - lo))
    } else {
        let (lo, hi) = (integral(a as f64), integral(a as f64 - 1.0));
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    }
}

/// Tail statistics after the first `k` eigenvalues.
pub fn tail_stats(spec: &SpectrumModel, k: usize) -> TailStats {
    let mut out = TailStats::default();
    if let Some(t) = &spec.tail {
        let a = (k + 1).max(t.start_index);
        let (s1, b1) = power_sum_from(t.alpha, a);
        let (s2, b2) = power_sum_from(2.0 * t.alpha, a);
        out.trace = t.scale * s1;
        out.trace_sq = t.scale * t.scale * s2;
        out.remainder_bound = t.scale * b1;
        out.remainder_bound_sq = t.scale * t.scale * b2;
    }
    // head plateaus from the smallest upward
    let mut end = spec.head_len;
    for &(v, m) in spec.head.iter().rev() {
        let start = end - m;
        if end > k {
            let count = (end - start.max(k)) as f64;
            out.trace += v * count;
            out.trace_sq += v * v * count;
        }
        end = start;
    }
    out.op_norm = if spec.total_rank().is_some_and(|r| k >= r) {
        0.0
    } else {
        spec.eigenvalue(k + 1)
    };
    out
}

/// One level of a plateau spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub degree: usize,
    pub value: f64,
    pub multiplicity: usize,
}

fn check_coeffs(coeffs: &[f64]) -> Result<()> {
    if coeffs.len() < 2 {
        return Err(KrrError::param("coeffs", "need alpha_0..alpha_L with L >= 1"));
    }
    if coeffs.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(KrrError::param("coeffs", "coefficients must be finite and nonnegative"));
    }
    if coeffs.iter().all(|a| *a == 0.0) {
        return Err(KrrError::EmptySpectrum);
    }
    Ok(())
}

fn to_usize(v: Option<u128>, what: &'static str) -> Result<usize> {
    v.and_then(|x| usize::try_from(x).ok())
        .ok_or(KrrError::Overflow(what))
}

fn sort_levels(mut levels: Vec<Level>) -> Vec<Level> {
    levels.sort_by(|a, b| b.value.total_cmp(&a.value));
    levels
}

fn levels_to_model(levels: &[Level]) -> Result<SpectrumModel> {
    SpectrumModel::new(levels.iter().map(|l| (l.value, l.multiplicity)).collect(), None)
}

/// Levels of the inner-product polynomial kernel under an i.i.d. design,
/// sorted by decreasing eigenvalue; zero-coefficient degrees are dropped.
pub fn poly_levels(coeffs: &[f64], d: usize) -> Result<Vec<Level>> {
    check_coeffs(coeffs)?;
    if d == 0 {
        return Err(KrrError::param("d", "dimension must be at least 1"));
    }
    let mut levels = Vec::new();
    for (i, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let mult = to_usize(binomial((d + i - 1) as u64, i as u64), "monomial count")?;
        levels.push(Level {
            degree: i,
            value: a / (d as f64).powi(i as i32),
            multiplicity: mult,
        });
    }
    Ok(sort_levels(levels))
}

/// Plateau spectrum `α_i / d^i` with multiplicity `C(d+i-1, i)`.
pub fn poly_plateau_spectrum(coeffs: &[f64], d: usize) -> Result<SpectrumModel> {
    levels_to_model(&poly_levels(coeffs, d)?)
}

/// Maps spectral position to graded-monomial feature index for the polynomial
/// kernel, so `result[j]` is the feature coordinate carrying `σ_{j+1}`.
pub fn poly_spectral_order(coeffs: &[f64], d: usize) -> Result<Vec<usize>> {
    let levels = poly_levels(coeffs, d)?;
    let mut offsets = Vec::with_capacity(coeffs.len());
    let mut acc = 0usize;
    for i in 0..coeffs.len() {
        offsets.push(acc);
        acc += to_usize(binomial((d + i - 1) as u64, i as u64), "monomial count")?;
    }
    let mut order = Vec::new();
    for l in levels {
        order.extend(offsets[l.degree]..offsets[l.degree] + l.multiplicity);
    }
    Ok(order)
}

/// Dimension of degree-`l` spherical harmonics in `d` variables.
pub fn sphere_harmonic_dim(d: usize, l: usize) -> Result<usize> {
    if d < 2 {
        return Err(KrrError::param("d", "sphere harmonics need d >= 2"));
    }
    let a = to_usize(binomial((d + l - 1) as u64, l as u64), "harmonic dimension")?;
    let b = if l < 2 {
        0
    } else {
        to_usize(binomial((d + l - 3) as u64, (l - 2) as u64), "harmonic dimension")?
    };
    Ok(a - b)
}

/// Sphere plateau spectrum plus whether the degree condition `L · L! ≤ d` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSpectrum {
    pub model: SpectrumModel,
    pub levels: Vec<Level>,
    pub degree_condition_holds: bool,
}

/// Plateau proxy `α_l / d^l` with harmonic multiplicities on `√d S^{d-1}`.
pub fn sphere_plateau_spectrum(coeffs: &[f64], d: usize) -> Result<SphereSpectrum> {
    check_coeffs(coeffs)?;
    if d < 3 {
        return Err(KrrError::param("d", "sphere plateau spectrum needs d >= 3"));
    }
    let mut levels = Vec::new();
    for (l, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        levels.push(Level {
            degree: l,
            value: a / (d as f64).powi(l as i32),
            multiplicity: sphere_harmonic_dim(d, l)?,
        });
    }
    let levels = sort_levels(levels);
    let big_l = coeffs.len() - 1;
    let fact: f64 = (1..=big_l).map(|i| i as f64).product();
    Ok(SphereSpectrum {
        model: levels_to_model(&levels)?,
        levels,
        degree_condition_holds: big_l as f64 * fact <= d as f64,
    })
}

/// Output of the Monte Carlo oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSpectrum {
    /// Eigenvalues of `(1/n) Σ φ(X_i) φ(X_i)^T`, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Set when `n` is below the feature dimension.
    pub undersampled: bool,
}

/// Brute-force estimate of the integral operator from `n` design samples.
pub fn empirical_integral_operator(
    kernel: &KernelSpec,
    design: &DesignSpec,
    n: usize,
    seed: u64,
    par: Parallelism,
) -> Result<EmpiricalSpectrum> {
    let p = kernel.feature_dim()?;
    if p > ORACLE_MAX_FEATURES {
        return Err(KrrError::FeatureCapExceeded {
            dim: p as u128,
            cap: ORACLE_MAX_FEATURES as u128,
        });
    }
    if n == 0 {
        return Err(KrrError::param("n", "need at least one sample"));
    }
    if design.dim()? != kernel.ambient_dim() {
        return Err(KrrError::DimensionMismatch {
            expected: kernel.ambient_dim(),
            got: design.dim()?,
        });
    }
    let partial = map_blocks(n, ORACLE_BLOCK, par, |b, range| -> Result<DMatrix<f64>> {
        let mut rng = stream(seed, 0, b as u32, Role::Oracle);
        let x = sample_design_rng(design, range.len(), &mut rng)?;
        let phi = kernel.feature_matrix(&x, Parallelism::Sequential)?;
        Ok(phi.tr_mul(&phi))
    });
    let mut acc = DMatrix::zeros(p, p);
    for block in partial {
        acc += block?;
    }
    acc /= n as f64;
    let eig = sym_eigen(&acc)?;
    Ok(EmpiricalSpectrum {
        eigenvalues: eig.values,
        undersampled: n < p,
    })
}
