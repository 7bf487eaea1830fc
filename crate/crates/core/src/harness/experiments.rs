use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{check_budget, HarnessError, PropertyCheck, Result};
use crate::bounds::{
    calibrate_constants, combine_bernstein_params, empirical_log_mgf, hoeffding_bound, merlevede_tail_bound,
    theorem1_bound, BernsteinParams, BoundConstants, BoundFamily, Calibration, CalibrationOptions, TailPoint,
};
use crate::hidim::{scaling_experiment, ScalingConfig, ScalingReport};
use crate::kernels::{KernelKind, KernelSpec};
use crate::mixing::{conditional_profile, mixing_profile, CoefficientKind, MixingProfile};
use crate::processes::{generate_stream, ProcessKind, ProcessSpec, SeriesPath};
use crate::rng::{stream_rng, streams};
use crate::stats::{binomial, binomial_stderr, least_squares, log_log_slope};
use crate::ustat::{
    decompose, kendall_tau, spearman_rho, theta_independent, theta_independent_mc, theta_star, u_statistic,
};

/// `N · Σ_T C(T, r)`.
pub fn estimated_kernel_evaluations(replications: usize, t_grid: &[usize], order: usize) -> f64 {
    replications as f64 * t_grid.iter().map(|&t| binomial(t, order)).sum::<f64>()
}

fn grid_stream(cell: usize) -> u64 {
    streams::GRID_BASE + cell as u64
}

/// Paths written by `simulate` (replication 0 for each `T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub process: String,
    pub lengths: Vec<usize>,
    pub dim: usize,
    #[serde(skip)]
    pub paths: Vec<SeriesPath>,
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateReport> {
    let spec = cfg.process_spec()?;
    cfg.require_t_grid(1)?;
    let paths = cfg
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| generate_stream(&spec, t, 0, grid_stream(i)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SimulateReport {
        process: spec.kind.name().to_string(),
        lengths: cfg.t_grid.clone(),
        dim: spec.kind.dim(),
        paths,
    })
}

/// One `(T, x)` point of an empirical tail curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurvePoint {
    pub x: f64,
    /// Replications with `|U − θ| ≥ x`.
    pub exceed: usize,
    pub empirical: f64,
    pub stderr: f64,
    /// Bound family value at `x` with the configured constants.
    pub bound: f64,
    /// `empirical ≤ bound + 3·stderr`.
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCell {
    pub t: usize,
    pub replications: usize,
    pub rms_deviation: f64,
    pub mean_deviation: f64,
    /// `c4·M/√T`.
    pub threshold: f64,
    pub points: Vec<TailCurvePoint>,
    /// False when some grid point is not dominated.
    pub bound_dominates: bool,
}

/// Results of a Monte Carlo concentration experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperiment {
    pub kernel: String,
    pub kernel_bound: f64,
    pub replications: usize,
    pub theta: Option<f64>,
    pub theta_stderr: Option<f64>,
    pub theta_source: String,
    pub bound_family: BoundFamily,
    pub constants: BoundConstants,
    pub cells: Vec<TailCell>,
    /// Slope of log RMS deviation against log T.
    pub rms_slope: Option<f64>,
    pub calibration: Option<Calibration>,
}

impl TailExperiment {
    /// Every `(x, T)` point as calibration input.
    pub fn tail_points(&self) -> Vec<TailPoint> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.points.iter().map(move |p| TailPoint {
                    x: p.x,
                    t: c.t,
                    m: self.kernel_bound,
                    tail: p.empirical,
                })
            })
            .collect()
    }

    /// Offset constant `c4` read off the cells with `T` in `lengths` (all
    /// cells when empty): the largest `√T·E|U − θ|/M`, so that `c4·M/√T`
    /// sits at the typical deviation scale.
    pub fn offset_estimate(&self, lengths: &[usize]) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| lengths.is_empty() || lengths.contains(&c.t))
            .map(|c| (c.t as f64).sqrt() * c.mean_deviation / self.kernel_bound)
            .reduce(f64::max)
    }
}

/// Tail bound of `family` at deviation `x`; the `Theorem1` family is offset
/// by `c4·M/√T`.
pub(crate) fn family_bound(family: BoundFamily, x: f64, t: usize, m: f64, c: &BoundConstants) -> Result<f64> {
    Ok(match family {
        BoundFamily::Hoeffding => hoeffding_bound(x, t, m, c.c0)?,
        BoundFamily::Merlevede => merlevede_tail_bound(x, t, m, c.c3)?,
        BoundFamily::Theorem1 => {
            let shifted = x - c.c4 * m / (t as f64).sqrt();
            if shifted <= 0.0 {
                2.0
            } else {
                theorem1_bound(shifted, t, m, c.c5)?
            }
        }
    })
}

/// The U-statistic, through the rank fast paths when they apply.
fn statistic(path: &SeriesPath, kernel: &KernelSpec) -> Result<f64> {
    let real_pair = !path.is_states() && path.dim() == 2;
    Ok(match kernel.kind() {
        KernelKind::SignProduct if real_pair => kendall_tau(path)?,
        KernelKind::SpearmanSym if real_pair => match spearman_rho(path) {
            Ok(r) => r.rho3,
            Err(_) => u_statistic(path, kernel)?,
        },
        _ => u_statistic(path, kernel)?,
    })
}

/// `θ(h)` exactly for chains, otherwise from the iid oracle.
fn theta_for(cfg: &ExperimentConfig, spec: &ProcessSpec, kernel: &KernelSpec) -> Result<(f64, f64, String)> {
    match &spec.kind {
        ProcessKind::MarkovChain { chain, .. } => Ok((theta_independent(chain, kernel)?, 0.0, "exact".into())),
        kind => {
            let mut rng = stream_rng(cfg.seed, 0, streams::ORACLE);
            let est = theta_independent_mc(kind, kernel, cfg.oracle_draws, &mut rng)?;
            Ok((
                est.value,
                est.stderr,
                format!("iid oracle over {} draws", cfg.oracle_draws),
            ))
        }
    }
}

fn min_grid_step(grid: &[f64]) -> f64 {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return sorted.first().copied().unwrap_or(0.0);
    }
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

pub fn run_tail_experiment(cfg: &ExperimentConfig) -> Result<TailExperiment> {
    let spec = cfg.process_spec()?;
    let kernel = cfg.kernel_spec()?;
    kernel.check_point_dim(spec.kind.dim())?;
    let r = kernel.order();
    cfg.require_t_grid(r.max(2))?;
    if cfg.x_grid.is_empty() {
        return Err(HarnessError::Config("`x_grid` must be non-empty".into()));
    }
    check_budget(estimated_kernel_evaluations(cfg.replications, &cfg.t_grid, r), cfg.budget)?;
    let m = kernel.bound();
    let mut report = TailExperiment {
        kernel: kernel.kind().name().to_string(),
        kernel_bound: m,
        replications: cfg.replications,
        theta: None,
        theta_stderr: None,
        theta_source: "not computed (dry run)".into(),
        bound_family: cfg.bound_family,
        constants: cfg.constants,
        cells: Vec::new(),
        rms_slope: None,
        calibration: None,
    };
    if cfg.replications == 0 {
        return Ok(report);
    }
    let (theta, theta_se, source) = theta_for(cfg, &spec, &kernel)?;
    let required = 0.1 * min_grid_step(&cfg.x_grid);
    if theta_se > required {
        return Err(HarnessError::OraclePrecision {
            stderr: theta_se,
            required,
        });
    }
    report.theta = Some(theta);
    report.theta_stderr = Some(theta_se);
    report.theta_source = source;

    let n = cfg.replications;
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let deviations: Vec<f64> = (0..n as u64)
            .into_par_iter()
            .map(|rep| {
                let path = generate_stream(&spec, t, rep, grid_stream(ti))?;
                Ok((statistic(&path, &kernel)? - theta).abs())
            })
            .collect::<Result<_>>()?;
        let mean_sq = deviations.iter().map(|d| d * d).sum::<f64>() / n as f64;
        let mean_dev = deviations.iter().sum::<f64>() / n as f64;
        let mut points = Vec::with_capacity(cfg.x_grid.len());
        for &x in &cfg.x_grid {
            let exceed = deviations.iter().filter(|&&d| d >= x).count();
            let empirical = exceed as f64 / n as f64;
            let stderr = binomial_stderr(empirical, n);
            let bound = family_bound(cfg.bound_family, x, t, m, &cfg.constants)?;
            points.push(TailCurvePoint {
                x,
                exceed,
                empirical,
                stderr,
                bound,
                dominated: empirical <= bound + 3.0 * stderr,
            });
        }
        report.cells.push(TailCell {
            t,
            replications: n,
            rms_deviation: mean_sq.sqrt(),
            mean_deviation: mean_dev,
            threshold: cfg.constants.c4 * m / (t as f64).sqrt(),
            bound_dominates: points.iter().all(|p| p.dominated),
            points,
        });
    }
    let ts: Vec<f64> = report.cells.iter().map(|c| c.t as f64).collect();
    let rms: Vec<f64> = report.cells.iter().map(|c| c.rms_deviation).collect();
    if ts.len() >= 2 && rms.iter().all(|&v| v > 0.0) {
        report.rms_slope = log_log_slope(&ts, &rms);
    }
    let options = CalibrationOptions {
        family: cfg.bound_family,
        c4: if cfg.bound_family == BoundFamily::Theorem1 {
            cfg.constants.c4
        } else {
            0.0
        },
        ..CalibrationOptions::default()
    };
    report.calibration = calibrate_constants(&report.tail_points(), &options, &cfg.constants).ok();
    Ok(report)
}

pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    let family = cfg
        .family
        .ok_or_else(|| HarnessError::Config("`family` is required for scaling".into()))?;
    let scaling = ScalingConfig {
        family,
        kind: cfg.estimator,
        t_grid: cfg.t_grid.clone(),
        p_grid: cfg.p_grid.clone(),
        replications: cfg.replications.max(1),
        oracle_draws: cfg.oracle_draws,
        seed: cfg.seed,
        budget: cfg.budget,
    };
    if cfg.replications == 0 {
        scaling.validate()?;
        return Ok(ScalingReport {
            config: ScalingConfig {
                replications: 0,
                ..scaling
            },
            cells: Vec::new(),
            slopes: Vec::new(),
            ratio_spread: None,
        });
    }
    Ok(scaling_experiment(&scaling)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeCell {
    pub t: usize,
    pub theta_star: Option<f64>,
    pub max_residual: f64,
    /// Largest `|B| / (2M)`.
    pub max_b_ratio: f64,
    /// Largest `|E(B | history)|`.
    pub max_p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeSummary {
    pub order: usize,
    pub state_count: usize,
    pub replications: usize,
    pub cells: Vec<DecomposeCell>,
    pub max_residual: f64,
    pub max_b_ratio: f64,
    pub max_p1: f64,
}

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const P1_TOL: f64 = 1e-10;

impl DecomposeSummary {
    pub fn checks(&self) -> Vec<PropertyCheck> {
        vec![
            PropertyCheck::new(
                "telescoping",
                self.max_residual <= RESIDUAL_TOL,
                format!("max |U − θ* − ΣS_k| = {:.3e}", self.max_residual),
            ),
            PropertyCheck::new(
                "conditional_mean_zero",
                self.max_p1 <= P1_TOL,
                format!("max |E(B | history)| = {:.3e}", self.max_p1),
            ),
            PropertyCheck::new(
                "b_term_bound",
                self.max_b_ratio <= 1.0 + 1e-12,
                format!("max |B|/(2M) = {:.6}", self.max_b_ratio),
            ),
        ]
    }
}

pub fn run_decompose_check(cfg: &ExperimentConfig) -> Result<DecomposeSummary> {
    let chain = cfg.chain()?;
    let spec = cfg.process_spec()?;
    let kernel = cfg.kernel_spec()?;
    let r = kernel.order();
    if !(2..=3).contains(&r) {
        return Err(HarnessError::Config(format!("decompose-check needs r ∈ {{2, 3}}, got {r}")));
    }
    cfg.require_t_grid(r)?;
    check_budget(estimated_kernel_evaluations(cfg.replications, &cfg.t_grid, r), cfg.budget)?;
    let two_m = 2.0 * kernel.bound();
    let mut cells = Vec::new();
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let reports = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|rep| {
                let path = generate_stream(&spec, t, rep, grid_stream(ti))?;
                Ok(decompose(&path, &chain, &kernel)?)
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(DecomposeCell {
            t,
            theta_star: reports.first().map(|r| r.theta_star),
            max_residual: reports.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
            max_b_ratio: reports.iter().map(|r| r.b_term_max_abs / two_m).fold(0.0, f64::max),
            max_p1: reports.iter().map(|r| r.p1_max_abs).fold(0.0, f64::max),
        });
    }
    Ok(DecomposeSummary {
        order: r,
        state_count: chain.state_count(),
        replications: cfg.replications,
        max_residual: cells.iter().map(|c| c.max_residual).fold(0.0, f64::max),
        max_b_ratio: cells.iter().map(|c| c.max_b_ratio).fold(0.0, f64::max),
        max_p1: cells.iter().map(|c| c.max_p1).fold(0.0, f64::max),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub profiles: Vec<MixingProfile>,
    pub checks: Vec<PropertyCheck>,
}

pub fn run_mixing_profile(cfg: &ExperimentConfig) -> Result<MixingReport> {
    let chain = cfg.chain()?;
    if cfg.coefficients.is_empty() {
        return Err(HarnessError::Config("`coefficients` must be non-empty".into()));
    }
    let lags: Vec<usize> = if cfg.lags.is_empty() {
        (1..=10).collect()
    } else {
        cfg.lags.clone()
    };
    let gaps: Vec<usize> = if cfg.gap_grid.is_empty() { vec![1] } else { cfg.gap_grid.clone() };
    let mut profiles = Vec::new();
    for &kind in &cfg.coefficients {
        let profile = match kind {
            CoefficientKind::ConditionalPhi | CoefficientKind::ConditionalAlpha => {
                if cfg.conditioning.is_empty() {
                    return Err(HarnessError::Config("conditional coefficients need `conditioning`".into()));
                }
                conditional_profile(&chain, kind, &cfg.conditioning, &gaps, &lags)?
            }
            _ => mixing_profile(&chain, kind, &lags)?,
        };
        profiles.push(profile);
    }
    let find = |k: CoefficientKind| profiles.iter().find(|p| p.kind == k);
    let mut checks = Vec::new();
    if let (Some(a), Some(b), Some(f)) = (
        find(CoefficientKind::Alpha),
        find(CoefficientKind::Beta),
        find(CoefficientKind::Phi),
    ) {
        let worst = (0..lags.len())
            .map(|i| (a.values[i] - b.values[i]).max(b.values[i] - f.values[i]))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(PropertyCheck::new(
            "alpha_le_beta_le_phi",
            worst <= 1e-12,
            format!("largest ordering violation {worst:.3e}"),
        ));
    }
    Ok(MixingReport { profiles, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub t: usize,
    pub theta_star: f64,
    /// `|θ* − θ|`.
    pub bias: f64,
    /// `√T·|θ* − θ|`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub theta: f64,
    pub kernel_bound: f64,
    pub points: Vec<BiasPoint>,
    pub max_scaled: f64,
    /// Log-log slope of the scaled bias against T; `None` for a single
    /// point or a vanishing bias.
    pub slope: Option<f64>,
}

pub fn run_bias_curve(cfg: &ExperimentConfig) -> Result<BiasReport> {
    let chain = cfg.chain()?;
    let kernel = cfg.kernel_spec()?;
    cfg.require_t_grid(kernel.order())?;
    let theta = theta_independent(&chain, &kernel)?;
    let points = cfg
        .t_grid
        .par_iter()
        .map(|&t| {
            let ts = theta_star(&chain, &kernel, t)?;
            let bias = (ts - theta).abs();
            Ok(BiasPoint {
                t,
                theta_star: ts,
                bias,
                scaled: (t as f64).sqrt() * bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let negligible = 1e-12 * kernel.bound();
    let slope = if points.len() >= 2 && points.iter().all(|p| p.scaled > negligible) {
        let xs: Vec<f64> = points.iter().map(|p| (p.t as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.scaled.ln()).collect();
        least_squares(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    Ok(BiasReport {
        theta,
        kernel_bound: kernel.bound(),
        max_scaled: points.iter().map(|p| p.scaled).fold(0.0, f64::max),
        points,
        slope,
    })
}

/// Dominance of the combined Bernstein envelope for one number of summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfCell {
    pub summands: usize,
    pub samples: usize,
    pub combined: BernsteinParams,
    pub eta_max: f64,
    /// `max_η (empirical log-MGF − envelope)` over the grid.
    pub max_excess: f64,
    /// Same for each summand's exact log-MGF against its own envelope.
    pub max_summand_excess: f64,
}

impl MgfCell {
    pub fn dominated(&self) -> bool {
        self.max_excess <= 0.0 && self.max_summand_excess <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    pub kappa: f64,
    pub eta_points: usize,
    pub cells: Vec<MgfCell>,
}

impl MgfReport {
    pub fn checks(&self) -> Vec<PropertyCheck> {
        let worst = self.cells.iter().map(|c| c.max_excess.max(c.max_summand_excess)).fold(f64::NEG_INFINITY, f64::max);
        vec![PropertyCheck::new(
            "bernstein_combination_dominates",
            self.cells.iter().all(MgfCell::dominated),
            format!("largest excess over the envelope {worst:.3e}"),
        )]
    }
}

/// A centered summand supported on `[−scale, scale]`.
#[derive(Debug, Clone, Copy)]
enum Summand {
    Rademacher(f64),
    Uniform(f64),
}

impl Summand {
    fn scale(&self) -> f64 {
        match *self {
            Summand::Rademacher(b) | Summand::Uniform(b) => b,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Summand::Rademacher(b) => {
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            }
            Summand::Uniform(b) => rng.random_range(-b..=b),
        }
    }

    /// Exact `log E exp(ηZ)`.
    fn log_mgf(&self, eta: f64) -> f64 {
        match *self {
            Summand::Rademacher(b) => (eta * b).cosh().ln(),
            Summand::Uniform(b) => {
                let u = eta * b;
                if u.abs() < 1e-8 {
                    u * u / 6.0
                } else {
                    (u.sinh() / u).ln()
                }
            }
        }
    }
}

fn envelope_excess(summand: &Summand, params: &BernsteinParams, points: usize) -> Result<f64> {
    let limit = 0.99 * params.eta_limit();
    let top = if limit.is_finite() { limit } else { 1.0 / summand.scale() };
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=points {
        let eta = top * k as f64 / points as f64;
        worst = worst.max(summand.log_mgf(eta) - params.log_mgf_bound(eta)?);
    }
    Ok(worst)
}

pub fn run_mgf_check(cfg: &ExperimentConfig) -> Result<MgfReport> {
    let settings = &cfg.mgf;
    if settings.summands.is_empty() || settings.summands.contains(&0) {
        return Err(HarnessError::Config("`mgf.summands` must be non-empty and positive".into()));
    }
    if settings.eta_points == 0 || !(settings.kappa >= 0.0) {
        return Err(HarnessError::Config("`mgf.eta_points` must be positive and `mgf.kappa` ≥ 0".into()));
    }
    let mut report = MgfReport {
        kappa: settings.kappa,
        eta_points: settings.eta_points,
        cells: Vec::new(),
    };
    if cfg.replications == 0 {
        return Ok(report);
    }
    for (ci, &n) in settings.summands.iter().enumerate() {
        let mut setup = stream_rng(cfg.seed, ci as u64, streams::MGF);
        let summands: Vec<Summand> = (0..n)
            .map(|i| {
                let b = setup.random_range(0.5..1.5);
                if i % 2 == 0 {
                    Summand::Rademacher(b)
                } else {
                    Summand::Uniform(b)
                }
            })
            .collect();
        // Hoeffding's lemma: log E e^{ηZ} ≤ η²b²/2 ≤ (bη)²/(1 − κη)
        let params: Vec<BernsteinParams> = summands
            .iter()
            .map(|s| BernsteinParams::new(s.scale(), settings.kappa))
            .collect::<std::result::Result<_, _>>()?;
        let combined = combine_bernstein_params(&params)?;
        let mut max_summand_excess = f64::NEG_INFINITY;
        for (s, p) in summands.iter().zip(&params) {
            max_summand_excess = max_summand_excess.max(envelope_excess(s, p, settings.eta_points)?);
        }
        // antithetic pairs (S, −S) keep the sample exactly centered
        let sums: Vec<f64> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(cfg.seed, rep, grid_stream(ci));
                summands.iter().map(|s| s.draw(&mut rng)).sum::<f64>()
            })
            .collect();
        let samples: Vec<f64> = sums.iter().flat_map(|&s| [s, -s]).collect();
        let max_abs = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let limit = 0.99 * combined.eta_limit();
        let guard = if max_abs > 0.0 { 700.0 / max_abs } else { f64::INFINITY };
        let eta_max = limit.min(guard);
        let eta_max = if eta_max.is_finite() { eta_max } else { 1.0 };
        let mut max_excess = f64::NEG_INFINITY;
        for k in 1..=settings.eta_points {
            let eta = eta_max * k as f64 / settings.eta_points as f64;
            let emp = empirical_log_mgf(&samples, eta)?;
            max_excess = max_excess.max(emp - combined.log_mgf_bound(eta)?);
        }
        report.cells.push(MgfCell {
            summands: n,
            samples: samples.len(),
            combined,
            eta_max,
            max_excess,
            max_summand_excess,
        });
    }
    Ok(report)
}
