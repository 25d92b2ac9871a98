//! Config loading, dispatch and result persistence for the `krr` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use krr_core::experiments::{run, Cell, ExperimentConfig, ExperimentKind, Table};
use krr_core::kernels::{gram, KernelSpec};
use krr_core::rates::{optimal_k, rate_report, RateConfig, RateReport};
use krr_core::sampler::{eval_target, sample_design, sample_noise, DesignSpec, NoiseSpec, Role, TargetSpec};
use krr_core::solver::{decompose, fit, monte_carlo_risk, Predictor, DEFAULT_N_TEST};
use krr_core::spectra::{empirical_integral_operator, poly_plateau_spectrum, sphere_plateau_spectrum, SpectrumModel};
use krr_core::conjugate::{conjugate_spectrum, ConjugateMethod};
use krr_core::{KrrError, Parallelism};

#[derive(Debug, Parser)]
#[command(name = "krr", version, about = "Kernel ridge regression rates and seeded experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config document (.toml or .json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV and manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (1 runs sequentially).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Rate report for a spectrum and target coefficients.
    Rate,
    /// Analytic eigenvalues of a kernel's integral operator.
    Spectrum {
        /// Add Monte Carlo eigenvalues next to the analytic ones.
        #[arg(long)]
        oracle: bool,
    },
    /// One KRR fit with diagnostics and excess risk.
    Fit,
    /// Multiple-descent sweep.
    Md,
    /// Gram-matrix eigenvalue extremes.
    Linearize,
    /// Diagonal concentration statistic.
    Diagconc,
    /// Kernel arm against a Gaussian linear arm.
    Geq,
    /// Rate exponent under the power-decay prescription.
    Smooth,
    /// Conjugate kernel after feature learning.
    Conjugate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Rate => "rate",
            Command::Spectrum { .. } => "spectrum",
            Command::Fit => "fit",
            Command::Md => "md",
            Command::Linearize => "linearize",
            Command::Diagconc => "diagconc",
            Command::Geq => "geq",
            Command::Smooth => "smooth",
            Command::Conjugate => "conjugate",
        }
    }

    fn experiment(self) -> Option<ExperimentKind> {
        match self {
            Command::Md => Some(ExperimentKind::MultipleDescent),
            Command::Linearize => Some(ExperimentKind::Linearization),
            Command::Diagconc => Some(ExperimentKind::DiagConcentration),
            Command::Geq => Some(ExperimentKind::GaussianEquivalence),
            Command::Smooth => Some(ExperimentKind::SmoothRate),
            Command::Conjugate => Some(ExperimentKind::Conjugate),
            _ => None,
        }
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad input: exit 2.
    Validation(String),
    /// Numerical breakdown or I/O failure while producing results: exit 3.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Failure(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Failure(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<KrrError> for CliError {
    fn from(e: KrrError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses a TOML or JSON document by file extension.
pub fn parse_document<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))),
        Some("json") => {
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        }
        _ => Err(CliError::Validation(format!(
            "{}: config must end in .toml or .json",
            path.display()
        ))),
    }
}

/// Reads and validates an experiment config; unknown keys are rejected.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let cfg: ExperimentConfig = parse_document(path)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `<name>.csv` and `manifest.json` into `out`.
pub fn persist(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    seed: u64,
    name: &str,
    csv: &str,
) -> CliResult<RunManifest> {
    let io = |e: std::io::Error| CliError::Failure(format!("writing to {}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    let file = format!("{name}.csv");
    fs::write(out.join(&file), csv).map_err(io)?;
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seed,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files: vec![FileEntry {
            path: file,
            sha256: sha256_hex(csv.as_bytes()),
        }],
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join("manifest.json"), text + "\n").map_err(io)?;
    Ok(manifest)
}

/// Rate query document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRequest {
    pub spectrum: SpectrumModel,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub sigma_xi: f64,
    pub n: usize,
    #[serde(default)]
    pub lambda: f64,
    /// Head size; the rate-minimizing admissible `k` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub rate: RateConfig,
}

/// Spectrum query document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRequest {
    pub kernel: KernelSpec,
    /// Needed for the Monte Carlo oracle and for sphere spectra.
    #[serde(default)]
    pub design: Option<DesignSpec>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of leading eigenvalues to print.
    #[serde(default = "default_top")]
    pub top: usize,
}

fn default_samples() -> usize {
    200_000
}
fn default_top() -> usize {
    20
}
fn default_n_test() -> usize {
    DEFAULT_N_TEST
}

/// Single-fit document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub kernel: KernelSpec,
    pub design: DesignSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub n: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Head size for the primal decomposition check.
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub n: usize,
    pub lambda: f64,
    pub residual_norm: f64,
    pub gram_condition: f64,
    pub rank: usize,
    pub excess_risk: f64,
    pub fixed_point_residual: Option<f64>,
}

fn config_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Printed to stdout.
    pub stdout: String,
    pub manifest: Option<RunManifest>,
}

fn rate_table(r: &RateReport) -> String {
    format!("{}\n{}\n", RateReport::CSV_HEADER, r.csv_row())
}

fn run_rate(cli: &Cli, path: &Path) -> CliResult<Outcome> {
    let req: RateRequest = parse_document(path)?;
    req.rate.validate()?;
    let report = match req.k {
        Some(k) => rate_report(&req.spectrum, &req.coeffs, req.sigma_xi, req.n, req.lambda, k, &req.rate)?,
        None => optimal_k(&req.spectrum, &req.coeffs, req.sigma_xi, req.n, req.lambda, &req.rate)?.1,
    };
    let manifest = match &cli.out {
        Some(out) => Some(persist(out, "rate", config_value(&req), 0, "rate", &rate_table(&report))?),
        None => None,
    };
    Ok(Outcome {
        stdout: report.to_json() + "\n",
        manifest,
    })
}

fn analytic_spectrum(req: &SpectrumRequest, par: Parallelism) -> CliResult<Vec<f64>> {
    let model = match &req.kernel {
        KernelSpec::InnerProductPoly { coeffs, d } => match req.design {
            Some(DesignSpec::UniformSphere { .. }) => sphere_plateau_spectrum(coeffs, *d)?.model,
            _ => poly_plateau_spectrum(coeffs, *d)?,
        },
        KernelSpec::LinearCov { spectrum } => spectrum.clone(),
        KernelSpec::Conjugate { weights, activation } => {
            conjugate_spectrum(weights, *activation, ConjugateMethod::ClosedForm, par)?.model
        }
    };
    let len = model.total_rank().map_or(req.top, |r| r.min(req.top));
    Ok(model.eigenvalues(len))
}

fn run_spectrum(cli: &Cli, path: &Path, oracle: bool, par: Parallelism) -> CliResult<Outcome> {
    let mut req: SpectrumRequest = parse_document(path)?;
    if let Some(seed) = cli.seed {
        req.seed = seed;
    }
    req.kernel.validate()?;
    let analytic = analytic_spectrum(&req, par)?;
    let empirical = if oracle {
        let design = req
            .design
            .as_ref()
            .ok_or_else(|| CliError::Validation("`design` is required with --oracle".into()))?;
        Some(empirical_integral_operator(&req.kernel, design, req.samples, req.seed, par)?.eigenvalues)
    } else {
        None
    };
    let header: &[&'static str] = if oracle { &["index", "analytic", "empirical"] } else { &["index", "analytic"] };
    let mut table = Table::new(header);
    for (i, a) in analytic.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(i + 1).into(), (*a).into()];
        if let Some(e) = &empirical {
            row.push(e.get(i).copied().unwrap_or(0.0).into());
        }
        table.push(row);
    }
    let csv = table.to_csv();
    let manifest = match &cli.out {
        Some(out) => Some(persist(out, "spectrum", config_value(&req), req.seed, "spectrum", &csv)?),
        None => None,
    };
    Ok(Outcome { stdout: csv, manifest })
}

fn run_fit(cli: &Cli, path: &Path, par: Parallelism) -> CliResult<Outcome> {
    let mut req: FitRequest = parse_document(path)?;
    if let Some(seed) = cli.seed {
        req.seed = seed;
    }
    req.kernel.validate()?;
    if req.n == 0 || req.n_test == 0 {
        return Err(CliError::Validation("`n` and `n_test` must be positive".into()));
    }
    let x = sample_design(&req.design, req.n, req.seed)?;
    let y = eval_target(&req.target, &req.kernel, &x)? + sample_noise(&req.noise, req.n, req.seed);
    let f = fit(&gram(&req.kernel, &x, par)?, &y, req.lambda)?;
    let fixed_point_residual = match req.k {
        Some(k) => Some(decompose(&f, &req.kernel.feature_matrix(&x, par)?, k)?.fixed_point_residual),
        None => None,
    };
    let predictor = Predictor::Dual {
        kernel: req.kernel.clone(),
        train: x,
        dual: f.dual.clone(),
    };
    let risk_seed = req.seed ^ Role::Test as u64;
    let risk = monte_carlo_risk(&predictor, &req.target, &req.design, req.n_test, risk_seed, par)?;
    let summary = FitSummary {
        n: req.n,
        lambda: req.lambda,
        residual_norm: f.diagnostics.residual_norm,
        gram_condition: f.diagnostics.gram_condition,
        rank: f.diagnostics.rank,
        excess_risk: risk.rms,
        fixed_point_residual,
    };
    let mut table = Table::new(&[
        "n", "lambda", "residual_norm", "gram_condition", "rank", "excess_risk", "fixed_point_residual",
    ]);
    table.push(vec![
        summary.n.into(),
        summary.lambda.into(),
        summary.residual_norm.into(),
        summary.gram_condition.into(),
        summary.rank.into(),
        summary.excess_risk.into(),
        summary.fixed_point_residual.unwrap_or(f64::NAN).into(),
    ]);
    let manifest = match &cli.out {
        Some(out) => Some(persist(out, "fit", config_value(&req), req.seed, "fit", &table.to_csv())?),
        None => None,
    };
    let stdout = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    Ok(Outcome { stdout, manifest })
}

fn run_experiment(cli: &Cli, path: &Path, kind: ExperimentKind, par: Parallelism) -> CliResult<Outcome> {
    let mut cfg = load_config(path)?;
    if cfg.experiment != kind {
        return Err(CliError::Validation(format!(
            "config describes `{}` but the subcommand runs `{}`",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let csv = run(&cfg, par)?.table().to_csv();
    let manifest = persist(&out, cli.command.name(), config_value(&cfg), cfg.seed, kind.name(), &csv)?;
    Ok(Outcome {
        stdout: format!("wrote {}\n", out.join(format!("{}.csv", kind.name())).display()),
        manifest: Some(manifest),
    })
}

/// Runs the parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let par = match cli.threads {
        Some(t) => krr_core::par::with_threads(t)?,
        None => Parallelism::Parallel,
    };
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    match cli.command {
        Command::Rate => run_rate(cli, path),
        Command::Spectrum { oracle } => run_spectrum(cli, path, oracle, par),
        Command::Fit => run_fit(cli, path, par),
        other => run_experiment(cli, path, other.experiment().expect("experiment subcommand"), par),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    const MINIMAL: &str = r#"
experiment = "multiple_descent"
[kernel]
type = "poly"
coeffs = [1.0, 1.0, 1.0]
d = 10
[design]
type = "iid_coordinates"
marginal = "rademacher"
d = 10
[target]
type = "eigen_coeffs"
coeffs = [1.0, 1.0]
[sweep]
n = [15, 45]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = load_config(&write(dir.path(), "md.toml", MINIMAL)).unwrap();
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.lambda, krr_core::experiments::LambdaPolicy::Zero);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn missing_kernel_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("[kernel]\ntype = \"poly\"\ncoeffs = [1.0, 1.0, 1.0]\nd = 10\n", "");
        let err = load_config(&write(dir.path(), "md.toml", &text)).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("`kernel`")), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_info() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_config(&write(dir.path(), "bad.toml", "experiment = \"md\"\nseed = [\n")).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let err = load_config(&write(dir.path(), "bad.json", "{\n\"experiment\": 3\n}")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = load_config(&write(dir.path(), "extra.toml", &format!("{MINIMAL}\nbogus = 1\n"))).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(load_config(&dir.path().join("absent.toml")).is_err());
        assert!(load_config(&write(dir.path(), "cfg.yaml", "")).is_err());
    }

    #[test]
    fn config_echo_is_a_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = load_config(&write(dir.path(), "md.toml", MINIMAL)).unwrap();
        cfg.lambda = krr_core::experiments::LambdaPolicy::Fixed(0.125);
        cfg.rate.kappa_dm = 0.3;
        let once = serde_json::to_string_pretty(&config_value(&cfg)).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&once).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(serde_json::to_string_pretty(&config_value(&back)).unwrap(), once);
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = persist(dir.path(), "md", serde_json::json!({"a": 1}), 7, "md", "n\n1\n").unwrap();
        let bytes = fs::read(dir.path().join(&m.files[0].path)).unwrap();
        assert_eq!(m.files[0].sha256, sha256_hex(&bytes));
        let back: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(KrrError::EmptySpectrum).exit_code(), 2);
        assert_eq!(CliError::from(KrrError::NonFinite("x")).exit_code(), 3);
    }
}
