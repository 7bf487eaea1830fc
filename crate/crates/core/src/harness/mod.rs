//! Experiment engine: JSON configs, seeded parallel Monte Carlo runs and
//! plot-ready outputs.
//!
//! Replication `i` of grid cell `c` always draws from the random stream
//! `(seed, i, GRID_BASE + c)`, and per-replication results are reduced in
//! replication order, so outputs do not depend on the worker count.

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    ExperimentConfig, ExperimentKind, KernelConfig, MgfSettings, DEFAULT_BUDGET, DEFAULT_ORACLE_DRAWS, SCHEMA_VERSION,
};
pub use experiments::{
    estimated_kernel_evaluations, run_bias_curve, run_decompose_check, run_mgf_check, run_mixing_profile,
    run_scaling, run_simulate, run_tail_experiment, BiasPoint, BiasReport, DecomposeCell, DecomposeSummary,
    MgfCell, MgfReport, MixingReport, SimulateReport, TailCell, TailCurvePoint, TailExperiment,
};
pub use output::{emit_outputs, ResultFile};

use crate::bounds::BoundsError;
use crate::hidim::{HidimError, ScalingReport};
use crate::kernels::KernelError;
use crate::mixing::MixingError;
use crate::processes::ProcessError;
use crate::ustat::UstatError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("estimated work {estimated:.3e} exceeds the budget {budget:.3e}")]
    BudgetExceeded { estimated: f64, budget: f64 },
    #[error("oracle standard error {stderr:.3e} exceeds the required {required:.3e}")]
    OraclePrecision { stderr: f64, required: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Ustat(#[from] UstatError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Hidim(#[from] HidimError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for errors caused by an infeasible problem size.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            HarnessError::BudgetExceeded { .. }
                | HarnessError::Ustat(UstatError::TooLarge { .. })
                | HarnessError::Hidim(HidimError::BudgetExceeded { .. })
                | HarnessError::Hidim(HidimError::Ustat(UstatError::TooLarge { .. }))
        )
    }
}

pub(crate) fn check_budget(estimated: f64, budget: f64) -> Result<()> {
    if estimated > budget {
        Err(HarnessError::BudgetExceeded { estimated, budget })
    } else {
        Ok(())
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentResult {
    Simulate(SimulateReport),
    Tail(TailExperiment),
    Scaling(ScalingReport),
    DecomposeCheck(DecomposeSummary),
    MixingProfile(MixingReport),
    BiasCurve(BiasReport),
    MgfCheck(MgfReport),
}

/// Timing metadata, kept apart from the numerical results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_ms: u128,
    pub elapsed_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
    pub checks: Vec<PropertyCheck>,
    pub wall_clock: WallClock,
}

impl RunOutput {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Validates `config` and runs the experiment of kind `kind`.
pub fn run(config: &ExperimentConfig, kind: ExperimentKind) -> Result<RunOutput> {
    config.validate_common()?;
    let started_unix_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let clock = Instant::now();
    let (result, checks) = match kind {
        ExperimentKind::Simulate => (ExperimentResult::Simulate(run_simulate(config)?), Vec::new()),
        ExperimentKind::Tail => (ExperimentResult::Tail(run_tail_experiment(config)?), Vec::new()),
        ExperimentKind::Scaling => (ExperimentResult::Scaling(run_scaling(config)?), Vec::new()),
        ExperimentKind::DecomposeCheck => {
            let s = run_decompose_check(config)?;
            let checks = s.checks();
            (ExperimentResult::DecomposeCheck(s), checks)
        }
        ExperimentKind::MixingProfile => {
            let m = run_mixing_profile(config)?;
            let checks = m.checks.clone();
            (ExperimentResult::MixingProfile(m), checks)
        }
        ExperimentKind::BiasCurve => (ExperimentResult::BiasCurve(run_bias_curve(config)?), Vec::new()),
        ExperimentKind::MgfCheck => {
            let m = run_mgf_check(config)?;
            let checks = m.checks();
            (ExperimentResult::MgfCheck(m), checks)
        }
    };
    let mut snapshot = config.clone();
    snapshot.experiment = Some(kind);
    Ok(RunOutput {
        kind,
        config: snapshot,
        result,
        checks,
        wall_clock: WallClock {
            started_unix_ms,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    })
}
