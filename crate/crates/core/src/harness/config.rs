use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::bounds::{BoundConstants, BoundFamily};
use crate::hidim::{CopulaFamily, EstimatorKind};
use crate::kernels::{KernelSpec, StateTable, TableFile};
use crate::mixing::{CoefficientKind, Observation};
use crate::processes::{FiniteMarkovChain, ProcessKind, ProcessSpec};

/// Version accepted in the `schema_version` field.
pub const SCHEMA_VERSION: u32 = 1;
/// Kernel-evaluation cap used when the config gives none.
pub const DEFAULT_BUDGET: f64 = 1e12;
/// Draws used by the iid oracle for `θ(h)` of continuous processes.
pub const DEFAULT_ORACLE_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Tail,
    Scaling,
    DecomposeCheck,
    MixingProfile,
    BiasCurve,
    MgfCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::DecomposeCheck => "decompose-check",
            ExperimentKind::MixingProfile => "mixing-profile",
            ExperimentKind::BiasCurve => "bias-curve",
            ExperimentKind::MgfCheck => "mgf-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel selection by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Mean {
        bound: f64,
    },
    SignProduct,
    SpearmanSym,
    /// Table kernel, inline or loaded from a file (paths are relative to the
    /// config file).
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<TableFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

impl KernelConfig {
    pub fn build(&self, base_dir: &Path) -> Result<KernelSpec> {
        Ok(match self {
            KernelConfig::Mean { bound } => KernelSpec::mean(*bound)?,
            KernelConfig::SignProduct => KernelSpec::sign_product(),
            KernelConfig::SpearmanSym => KernelSpec::spearman_sym(),
            KernelConfig::Table { path, table, bound } => {
                let t = match (path, table) {
                    (Some(p), None) => StateTable::from_file(&base_dir.join(p))?,
                    (None, Some(t)) => t.clone().into_table()?,
                    _ => return Err(HarnessError::Config("table kernel needs exactly one of `path` or `table`".into())),
                };
                KernelSpec::table(t, *bound)?
            }
        })
    }
}

/// Grid of summands for the Bernstein-combination check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgfSettings {
    /// Numbers of summands to test.
    #[serde(default = "default_summands")]
    pub summands: Vec<usize>,
    /// Per-summand κ used in the envelope.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eta_points")]
    pub eta_points: usize,
}

fn default_summands() -> Vec<usize> {
    vec![10, 20, 30, 40, 50]
}

fn default_kappa() -> f64 {
    0.1
}

fn default_eta_points() -> usize {
    50
}

impl Default for MgfSettings {
    fn default() -> Self {
        Self {
            summands: default_summands(),
            kappa: default_kappa(),
            eta_points: default_eta_points(),
        }
    }
}

/// A harness experiment read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Must match the subcommand when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub t_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_grid: Vec<usize>,
    /// Number of replications; 0 runs a dry run that validates and emits an
    /// empty result.
    #[serde(default)]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_grid: Vec<f64>,
    #[serde(default)]
    pub constants: BoundConstants,
    #[serde(default = "default_family")]
    pub bound_family: BoundFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default = "default_oracle_draws")]
    pub oracle_draws: usize,
    /// Copula family for `scaling`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<CopulaFamily>,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Lags for `mixing-profile`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lags: Vec<usize>,
    #[serde(default = "default_coefficients")]
    pub coefficients: Vec<CoefficientKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditioning: Vec<Observation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gap_grid: Vec<usize>,
    #[serde(default)]
    pub mgf: MgfSettings,
    /// Directory table-kernel paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_family() -> BoundFamily {
    BoundFamily::Theorem1
}

fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

fn default_oracle_draws() -> usize {
    DEFAULT_ORACLE_DRAWS
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Kendall
}

fn default_coefficients() -> Vec<CoefficientKind> {
    vec![CoefficientKind::Alpha, CoefficientKind::Beta, CoefficientKind::Phi]
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: Some(experiment),
            seed,
            process: None,
            kernel: None,
            t_grid: Vec::new(),
            p_grid: Vec::new(),
            replications: 0,
            x_grid: Vec::new(),
            constants: BoundConstants::default(),
            bound_family: default_family(),
            output_dir: None,
            budget: DEFAULT_BUDGET,
            oracle_draws: DEFAULT_ORACLE_DRAWS,
            family: None,
            estimator: default_estimator(),
            lags: Vec::new(),
            coefficients: default_coefficients(),
            conditioning: Vec::new(),
            gap_grid: Vec::new(),
            mgf: MgfSettings::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Resolves the experiment kind against an explicitly requested one.
    pub fn resolve_kind(&self, requested: Option<ExperimentKind>) -> Result<ExperimentKind> {
        match (self.experiment, requested) {
            (Some(a), Some(b)) if a != b => Err(HarnessError::Config(format!(
                "config describes a `{a}` experiment but `{b}` was requested"
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(HarnessError::Config("no experiment kind given".into())),
        }
    }

    pub fn process_spec(&self) -> Result<ProcessSpec> {
        let kind = self
            .process
            .clone()
            .ok_or_else(|| HarnessError::Config("`process` is required".into()))?;
        let spec = ProcessSpec::new(kind, self.seed);
        spec.validate()?;
        Ok(spec)
    }

    pub fn chain(&self) -> Result<FiniteMarkovChain> {
        match &self.process {
            Some(ProcessKind::MarkovChain { chain, .. }) => Ok(chain.clone()),
            _ => Err(HarnessError::Config("this experiment needs a `markov_chain` process".into())),
        }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| HarnessError::Config("`kernel` is required".into()))?
            .build(&self.base_dir)
    }

    pub(crate) fn require_t_grid(&self, min: usize) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(HarnessError::Config("`t_grid` must be non-empty".into()));
        }
        if let Some(&t) = self.t_grid.iter().find(|&&t| t < min) {
            return Err(HarnessError::Config(format!("T = {t} is below the minimum {min}")));
        }
        Ok(())
    }

    /// Checks everything that does not depend on the experiment kind.
    pub fn validate_common(&self) -> Result<()> {
        self.constants
            .validate()
            .map_err(|e| HarnessError::Config(format!("constants: {e}")))?;
        if !(self.budget > 0.0) {
            return Err(HarnessError::Config("budget must be positive".into()));
        }
        if self.x_grid.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(HarnessError::Config("x grid values must be finite and non-negative".into()));
        }
        Ok(())
    }
}
