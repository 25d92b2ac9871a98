//! Experiment configuration documents.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{KrrError, Result};
use crate::kernels::KernelSpec;
use crate::rates::RateConfig;
use crate::sampler::{DesignSpec, NoiseSpec, TargetSpec, MAX_TRIAL};
use crate::solver::DEFAULT_N_TEST;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MultipleDescent,
    Linearization,
    DiagConcentration,
    GaussianEquivalence,
    SmoothRate,
    Conjugate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MultipleDescent => "multiple_descent",
            ExperimentKind::Linearization => "linearization",
            ExperimentKind::DiagConcentration => "diag_concentration",
            ExperimentKind::GaussianEquivalence => "gaussian_equivalence",
            ExperimentKind::SmoothRate => "smooth_rate",
            ExperimentKind::Conjugate => "conjugate",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// Minimum-norm interpolation.
    #[default]
    Zero,
    Fixed(f64),
    /// `λ = N k^{-α}` from the power-decay prescription.
    Prescription,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub n: Vec<usize>,
    /// Ambient dimensions; empty means the kernel's own.
    #[serde(default)]
    pub d: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `C` in `ι = max{i : C d^i ≤ N}`.
    #[serde(default = "default_iota_c")]
    pub iota_c: f64,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Constant in `k*_b`.
    #[serde(default = "default_b")]
    pub b: f64,
    /// Conjugate-kernel width.
    #[serde(default = "default_width")]
    pub m: usize,
    /// `<W(T), w*>`.
    #[serde(default = "one")]
    pub alignment: f64,
    #[serde(default = "one")]
    pub a_star: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Diagonal reference value, `h(1)` when absent.
    #[serde(default)]
    pub reference: Option<f64>,
    /// First absolute trial index.
    #[serde(default)]
    pub trial_offset: u32,
}

fn default_iota_c() -> f64 {
    4.0
}
fn default_n_test() -> usize {
    DEFAULT_N_TEST
}
fn default_b() -> f64 {
    0.25
}
fn default_width() -> usize {
    2048
}
fn one() -> f64 {
    1.0
}
fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_trials() -> usize {
    20
}

impl Default for Params {
    fn default() -> Self {
        Params {
            iota_c: default_iota_c(),
            n_test: default_n_test(),
            b: default_b(),
            m: default_width(),
            alignment: 1.0,
            a_star: 1.0,
            activation: default_activation(),
            reference: None,
            trial_offset: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub lambda: LambdaPolicy,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            kernel: None,
            design: None,
            target: None,
            noise: NoiseSpec::default(),
            sweep: Sweep::default(),
            trials: default_trials(),
            lambda: LambdaPolicy::Zero,
            rate: RateConfig::default(),
            seed: 0,
            output: None,
            params: Params::default(),
        }
    }

    pub fn kernel(&self) -> Result<&KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| KrrError::config("kernel", format!("required by {}", self.experiment.name())))
    }

    pub fn design(&self) -> Result<&DesignSpec> {
        self.design
            .as_ref()
            .ok_or_else(|| KrrError::config("design", format!("required by {}", self.experiment.name())))
    }

    pub fn target(&self) -> Result<&TargetSpec> {
        self.target
            .as_ref()
            .ok_or_else(|| KrrError::config("target", format!("required by {}", self.experiment.name())))
    }

    /// Checks the fields the chosen experiment needs.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        if self.trials == 0 {
            return Err(KrrError::config("trials", "must be at least 1"));
        }
        let last = self.params.trial_offset as u64 + self.trials as u64 - 1;
        if last > MAX_TRIAL as u64 {
            return Err(KrrError::config("trials", format!("trial indices must stay below {}", MAX_TRIAL as u64 + 1)));
        }
        if self.sweep.n.is_empty() {
            return Err(KrrError::config("sweep.n", "grid is empty"));
        }
        if self.sweep.n.contains(&0) {
            return Err(KrrError::config("sweep.n", "sample sizes must be positive"));
        }
        if self.sweep.d.contains(&0) {
            return Err(KrrError::config("sweep.d", "dimensions must be positive"));
        }
        self.rate.validate()?;
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(KrrError::config("noise.sigma", "must be finite and nonnegative"));
        }
        match self.lambda {
            LambdaPolicy::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                return Err(KrrError::config("lambda", "must be finite and nonnegative"));
            }
            LambdaPolicy::Prescription if self.experiment != SmoothRate => {
                return Err(KrrError::config("lambda", "prescription applies only to smooth_rate"));
            }
            _ => {}
        }
        if self.params.n_test == 0 {
            return Err(KrrError::config("params.n_test", "must be positive"));
        }
        if !(self.params.iota_c > 0.0 && self.params.iota_c.is_finite()) {
            return Err(KrrError::config("params.iota_c", "must be positive"));
        }
        match self.experiment {
            MultipleDescent | GaussianEquivalence => {
                if !matches!(self.kernel()?, KernelSpec::InnerProductPoly { .. }) {
                    return Err(KrrError::config("kernel", "must be a polynomial kernel"));
                }
                self.kernel()?.validate()?;
                self.design()?;
                self.target()?.coefficients()?;
                if self.experiment == GaussianEquivalence && !(self.params.b > 0.0 && self.params.b.is_finite()) {
                    return Err(KrrError::config("params.b", "must be positive"));
                }
            }
            Linearization | DiagConcentration => {
                if !matches!(self.kernel()?, KernelSpec::InnerProductPoly { .. }) {
                    return Err(KrrError::config("kernel", "must be a polynomial kernel"));
                }
                self.kernel()?.validate()?;
                self.design()?;
            }
            SmoothRate => match self.target()? {
                TargetSpec::SourceCondition { .. } => {
                    self.target()?.coefficients()?;
                }
                _ => return Err(KrrError::config("target", "must be a source_condition target")),
            },
            Conjugate => {
                if self.params.m < 2 {
                    return Err(KrrError::config("params.m", "width must be at least 2"));
                }
                let a = self.params.alignment;
                if !(-1.0..=1.0).contains(&a) {
                    return Err(KrrError::config("params.alignment", "must lie in [-1, 1]"));
                }
                if !self.params.a_star.is_finite() {
                    return Err(KrrError::config("params.a_star", "must be finite"));
                }
            }
        }
        Ok(())
    }
}
