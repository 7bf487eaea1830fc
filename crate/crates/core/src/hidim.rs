//! Kendall's τ and Spearman's ρ correlation matrices of p-dimensional
//! series, their population counterparts under temporal independence and
//! max-norm deviation experiments.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::processes::{
    correlation_root, equi_correlation, generate_stream, sample_stationary_marginal, toeplitz_correlation,
    ProcessError, ProcessKind, ProcessSpec, SeriesPath,
};
use crate::rng::{stream_rng, streams};
use crate::stats::{log_log_slope, mean_stderr, normal_cdf, quantile_sorted};
use crate::ustat::{kendall_tau_columns, ranks, spearman_from_ranks, UstatError};

/// Smallest accepted number of population-oracle draws.
pub const MIN_ORACLE_DRAWS: usize = 10_000;
/// Batches used for the oracle's standard errors.
pub const ORACLE_BATCHES: usize = 20;

#[derive(Debug, Error)]
pub enum HidimError {
    #[error("need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("need at least 2 coordinates, got {0}")]
    TooFewCoordinates(usize),
    #[error("coordinate {0} is constant")]
    Degenerate(usize),
    #[error("coordinate {0} has ties")]
    Ties(usize),
    #[error("shape or kind mismatch: {0}")]
    Mismatch(String),
    #[error("oracle needs at least {MIN_ORACLE_DRAWS} draws, got {0}")]
    TooFewDraws(usize),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("estimated work {estimated:.3e} exceeds the budget {budget:.3e}")]
    BudgetExceeded { estimated: f64, budget: f64 },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Ustat(#[from] UstatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HidimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Kendall,
    Spearman,
}

/// A `p × p` rank-correlation matrix (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub kind: EstimatorKind,
    pub p: usize,
    /// Path length the estimate was computed from.
    pub t: usize,
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.p + k]
    }

    fn from_upper(kind: EstimatorKind, p: usize, t: usize, upper: &[((usize, usize), f64)]) -> Self {
        let mut values = vec![0.0; p * p];
        for j in 0..p {
            values[j * p + j] = 1.0;
        }
        for &((j, k), v) in upper {
            values[j * p + k] = v;
            values[k * p + j] = v;
        }
        Self { kind, p, t, values }
    }

    /// Dense CSV without a header, one matrix row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.p) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (j + 1..p).map(move |k| (j, k))).collect()
}

fn columns_of(data: &SeriesPath) -> Result<Vec<Vec<f64>>> {
    let p = data.dim();
    if p < 2 || data.is_states() {
        return Err(HidimError::TooFewCoordinates(p));
    }
    if data.len() < 3 {
        return Err(HidimError::TooShort { min: 3, got: data.len() });
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| data.column(j)).collect();
    if let Some(j) = cols.iter().position(|c| c.iter().all(|&v| v == c[0])) {
        return Err(HidimError::Degenerate(j));
    }
    Ok(cols)
}

/// Kendall's τ for every coordinate pair (parallel over pairs).
pub fn kendall_matrix(data: &SeriesPath) -> Result<CorrelationMatrix> {
    let cols = columns_of(data)?;
    let p = cols.len();
    let upper: Vec<((usize, usize), f64)> = upper_pairs(p)
        .into_par_iter()
        .map(|(j, k)| kendall_tau_columns(&cols[j], &cols[k]).map(|v| ((j, k), v)))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CorrelationMatrix::from_upper(EstimatorKind::Kendall, p, data.len(), &upper))
}

/// Spearman's ρ for every coordinate pair; ranks are computed once per
/// coordinate.
pub fn spearman_matrix(data: &SeriesPath) -> Result<CorrelationMatrix> {
    let cols = columns_of(data)?;
    let p = cols.len();
    let rk: Vec<Vec<usize>> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| ranks(c).ok_or(HidimError::Ties(j)))
        .collect::<Result<_>>()?;
    let upper: Vec<((usize, usize), f64)> = upper_pairs(p)
        .into_par_iter()
        .map(|(j, k)| ((j, k), spearman_from_ranks(&rk[j], &rk[k])))
        .collect();
    Ok(CorrelationMatrix::from_upper(EstimatorKind::Spearman, p, data.len(), &upper))
}

pub fn estimate_matrix(data: &SeriesPath, kind: EstimatorKind) -> Result<CorrelationMatrix> {
    match kind {
        EstimatorKind::Kendall => kendall_matrix(data),
        EstimatorKind::Spearman => spearman_matrix(data),
    }
}

/// Population matrix with per-entry Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMatrix {
    pub matrix: CorrelationMatrix,
    pub stderr: Vec<f64>,
    pub oracle: String,
    pub draws: usize,
}

fn pair_estimate(x: &[f64], y: &[f64], kind: EstimatorKind) -> Result<f64> {
    Ok(match kind {
        EstimatorKind::Kendall => kendall_tau_columns(x, y)?,
        EstimatorKind::Spearman => {
            let rx = ranks(x).ok_or(HidimError::Ties(0))?;
            let ry = ranks(y).ok_or(HidimError::Ties(1))?;
            spearman_from_ranks(&rx, &ry)
        }
    })
}

/// Full-sample estimate and the batch-means standard error.
fn batched_estimate(x: &[f64], y: &[f64], kind: EstimatorKind) -> Result<(f64, f64)> {
    let value = pair_estimate(x, y, kind)?;
    let size = x.len() / ORACLE_BATCHES;
    let batch: Vec<f64> = (0..ORACLE_BATCHES)
        .map(|b| pair_estimate(&x[b * size..(b + 1) * size], &y[b * size..(b + 1) * size], kind))
        .collect::<Result<_>>()?;
    // the batch estimates have variance ≈ ORACLE_BATCHES × that of the full one
    let (_, se_of_batch_mean) = mean_stderr(&batch);
    Ok((value, se_of_batch_mean))
}

/// Draws `n` iid pairs from a bivariate Gaussian copula with latent
/// correlation `c`.
fn copula_pair<R: Rng + ?Sized>(c: f64, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let s = (1.0 - c * c).max(0.0).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        x.push(normal_cdf(z1));
        y.push(normal_cdf(c * z1 + s * e));
    }
    (x, y)
}

/// Population counterpart of the estimator: its value on `draws` iid draws
/// from the stationary cross-sectional marginal (temporal dependence
/// removed). For copula processes each pair's law depends only on its latent
/// correlation, so pairs sharing a correlation share one simulation.
pub fn population_matrix_oracle(spec: &ProcessSpec, kind: EstimatorKind, draws: usize) -> Result<PopulationMatrix> {
    if draws < MIN_ORACLE_DRAWS {
        return Err(HidimError::TooFewDraws(draws));
    }
    spec.validate()?;
    let p = spec.kind.dim();
    if p < 2 {
        return Err(HidimError::TooFewCoordinates(p));
    }
    let pairs = upper_pairs(p);
    let (entries, oracle): (Vec<((usize, usize), (f64, f64))>, String) = match &spec.kind {
        ProcessKind::GaussianCopulaVector { correlation, .. } => {
            correlation_root(correlation)?;
            let mut groups: Vec<u64> = pairs.iter().map(|&(j, k)| correlation[j][k].to_bits()).collect();
            groups.sort_unstable();
            groups.dedup();
            let results: HashMap<u64, (f64, f64)> = groups
                .par_iter()
                .enumerate()
                .map(|(g, &bits)| {
                    let mut rng = stream_rng(spec.seed, g as u64, streams::POPULATION);
                    let (x, y) = copula_pair(f64::from_bits(bits), draws, &mut rng);
                    batched_estimate(&x, &y, kind).map(|r| (bits, r))
                })
                .collect::<Result<_>>()?;
            (
                pairs
                    .iter()
                    .map(|&(j, k)| ((j, k), results[&correlation[j][k].to_bits()]))
                    .collect(),
                format!("iid bivariate copula draws per distinct latent correlation ({})", results.len()),
            )
        }
        other => {
            let mut rng = stream_rng(spec.seed, 0, streams::POPULATION);
            let rows = sample_stationary_marginal(other, draws, &mut rng)?;
            let path = SeriesPath::from_rows(p, rows)?;
            let cols: Vec<Vec<f64>> = (0..p).map(|j| path.column(j)).collect();
            let entries = pairs
                .par_iter()
                .map(|&(j, k)| batched_estimate(&cols[j], &cols[k], kind).map(|r| ((j, k), r)))
                .collect::<Result<_>>()?;
            (entries, "iid draws from the stationary marginal".to_string())
        }
    };
    let upper: Vec<((usize, usize), f64)> = entries.iter().map(|&(jk, (v, _))| (jk, v)).collect();
    let mut stderr = vec![0.0; p * p];
    for &((j, k), (_, se)) in &entries {
        stderr[j * p + k] = se;
        stderr[k * p + j] = se;
    }
    Ok(PopulationMatrix {
        matrix: CorrelationMatrix::from_upper(kind, p, draws, &upper),
        stderr,
        oracle,
        draws,
    })
}

/// `max_{j≠k} |Â_jk − A_jk|`.
pub fn max_norm_deviation(estimate: &CorrelationMatrix, population: &CorrelationMatrix) -> Result<f64> {
    if estimate.p != population.p || estimate.kind != population.kind {
        return Err(HidimError::Mismatch(format!(
            "{:?} p={} vs {:?} p={}",
            estimate.kind, estimate.p, population.kind, population.p
        )));
    }
    let p = estimate.p;
    let mut best = 0.0f64;
    for j in 0..p {
        for k in 0..p {
            if j != k {
                best = best.max((estimate.get(j, k) - population.get(j, k)).abs());
            }
        }
    }
    Ok(best)
}

/// Cross-sectional correlation structure of a copula family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
pub enum CorrelationStructure {
    Identity,
    Toeplitz { rho: f64 },
    Equicorrelation { rho: f64 },
}

impl CorrelationStructure {
    pub fn matrix(&self, p: usize) -> Vec<Vec<f64>> {
        match *self {
            CorrelationStructure::Identity => equi_correlation(p, 0.0),
            CorrelationStructure::Toeplitz { rho } => toeplitz_correlation(p, rho),
            CorrelationStructure::Equicorrelation { rho } => equi_correlation(p, rho),
        }
    }
}

/// A Gaussian-copula process family indexed by the dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaFamily {
    #[serde(flatten)]
    pub structure: CorrelationStructure,
    pub temporal: f64,
}

impl CopulaFamily {
    pub fn spec(&self, p: usize, seed: u64) -> ProcessSpec {
        ProcessSpec::new(
            ProcessKind::GaussianCopulaVector {
                correlation: self.structure.matrix(p),
                temporal: self.temporal,
            },
            seed,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub family: CopulaFamily,
    pub kind: EstimatorKind,
    pub t_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub replications: usize,
    pub oracle_draws: usize,
    pub seed: u64,
    /// Upper limit on [`ScalingConfig::estimated_work`].
    pub budget: f64,
}

impl ScalingConfig {
    /// Rough operation count: pair estimates times `T log T`, for the
    /// replications and the oracle.
    pub fn estimated_work(&self) -> f64 {
        let mut total = 0.0;
        for &p in &self.p_grid {
            let pairs = (p * p.saturating_sub(1) / 2) as f64;
            for &t in &self.t_grid {
                let tf = t.max(2) as f64;
                total += self.replications as f64 * pairs * tf * tf.log2();
            }
            let n = self.oracle_draws.max(2) as f64;
            total += 2.0 * p as f64 * n * n.log2();
        }
        total
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.p_grid.is_empty() {
            return Err(HidimError::InvalidExperiment("T and p grids must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(HidimError::InvalidExperiment("replications must be positive".into()));
        }
        if let Some(&t) = self.t_grid.iter().find(|&&t| t < 3) {
            return Err(HidimError::TooShort { min: 3, got: t });
        }
        if let Some(&p) = self.p_grid.iter().find(|&&p| p < 2) {
            return Err(HidimError::TooFewCoordinates(p));
        }
        if self.oracle_draws < MIN_ORACLE_DRAWS {
            return Err(HidimError::TooFewDraws(self.oracle_draws));
        }
        let estimated = self.estimated_work();
        if estimated > self.budget {
            return Err(HidimError::BudgetExceeded {
                estimated,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Deviation summary for one `(T, p)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub t: usize,
    pub p: usize,
    pub replications: usize,
    pub median: f64,
    /// Quantiles at 0.1, 0.25, 0.5, 0.75, 0.9.
    pub quantiles: [f64; 5],
    /// `√(ln(Tp)/T)`.
    pub rate: f64,
    pub ratio_to_rate: f64,
    pub deviations: Vec<f64>,
}

/// Log-log slope of the median deviation against `T` at fixed `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSlope {
    pub p: usize,
    /// `None` when fewer than two `T` values are available.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: ScalingConfig,
    pub cells: Vec<ScalingCell>,
    pub slopes: Vec<ScalingSlope>,
    /// Largest over smallest `ratio_to_rate` across cells (`None` without
    /// cells).
    pub ratio_spread: Option<f64>,
}

impl ScalingReport {
    /// `T,p,median_dev,ratio_to_rate` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,p,median_dev,ratio_to_rate")?;
        for c in &self.cells {
            writeln!(w, "{},{},{:.16e},{:.16e}", c.t, c.p, c.median, c.ratio_to_rate)?;
        }
        Ok(())
    }
}

pub const SCALING_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Distribution of the max-norm deviation over a `(T, p)` grid.
///
/// Replication `i` of cell `(T_a, p_b)` draws its path from the stream
/// `(seed, i, GRID_BASE + cell index)`, so results do not depend on
/// scheduling.
pub fn scaling_experiment(config: &ScalingConfig) -> Result<ScalingReport> {
    config.validate()?;
    let mut cells = Vec::new();
    for (pi, &p) in config.p_grid.iter().enumerate() {
        let spec = config.family.spec(p, config.seed);
        let population = population_matrix_oracle(&spec, config.kind, config.oracle_draws)?;
        for (ti, &t) in config.t_grid.iter().enumerate() {
            let stream = streams::GRID_BASE + (pi * config.t_grid.len() + ti) as u64;
            let deviations: Vec<f64> = (0..config.replications as u64)
                .into_par_iter()
                .map(|rep| {
                    let path = generate_stream(&spec, t, rep, stream)?;
                    let est = estimate_matrix(&path, config.kind)?;
                    max_norm_deviation(&est, &population.matrix)
                })
                .collect::<Result<_>>()?;
            let mut sorted = deviations.clone();
            sorted.sort_by(f64::total_cmp);
            let quantiles = SCALING_QUANTILES.map(|q| quantile_sorted(&sorted, q));
            let median = quantiles[2];
            let rate = ((t as f64 * p as f64).ln() / t as f64).sqrt();
            cells.push(ScalingCell {
                t,
                p,
                replications: config.replications,
                median,
                quantiles,
                rate,
                ratio_to_rate: median / rate,
                deviations,
            });
        }
    }
    let slopes = config
        .p_grid
        .iter()
        .map(|&p| {
            let (ts, meds): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter(|c| c.p == p)
                .map(|c| (c.t as f64, c.median))
                .unzip();
            let mut distinct = ts.clone();
            distinct.dedup();
            let slope = if distinct.len() >= 2 && meds.iter().all(|&m| m > 0.0) {
                log_log_slope(&ts, &meds)
            } else {
                None
            };
            ScalingSlope { p, slope }
        })
        .collect();
    let cells_empty = cells.is_empty();
    let ratios = cells.iter().map(|c| c.ratio_to_rate);
    let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    Ok(ScalingReport {
        config: config.clone(),
        cells,
        slopes,
        ratio_spread: (!cells_empty).then_some(hi / lo),
    })
}
