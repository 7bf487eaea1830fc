//! Time-series generators: iid, AR(1), m-dependent moving sums, finite
//! Markov chains and a Gaussian-copula vector process.

mod chain;
mod path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, streams};
use crate::stats::normal_cdf;

pub use chain::{ChainDef, FiniteMarkovChain, ROW_SUM_TOL, STATIONARY_TOL};
pub use path::{PathData, Provenance, SeriesPath};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("invalid Markov chain: {0}")]
    InvalidChain(String),
    #[error("invalid process specification: {0}")]
    InvalidSpec(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, ProcessError>;

fn default_dim() -> usize {
    1
}

fn default_sd() -> f64 {
    1.0
}

/// Process family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessKind {
    /// Independent standard normal coordinates.
    Iid {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// `X_t = coef·X_{t−1} + sd·ε_t`, started from its stationary law.
    Ar1 {
        coef: f64,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_sd")]
        innovation_sd: f64,
    },
    /// `(ε_t + … + ε_{t+window}) / √(window+1)` for iid standard normals.
    MDependent {
        window: usize,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// State path of a finite chain. Starts from the stationary law unless a
    /// start state is given.
    MarkovChain {
        chain: FiniteMarkovChain,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<usize>,
    },
    /// Latent `Z_t = a·Z_{t−1} + √(1−a²)·L·ε_t` with `LLᵀ = correlation`,
    /// observed through the standard normal CDF coordinatewise.
    GaussianCopulaVector {
        correlation: Vec<Vec<f64>>,
        temporal: f64,
    },
}

impl ProcessKind {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ProcessError::InvalidSpec(msg));
        match self {
            ProcessKind::Iid { dim } | ProcessKind::MDependent { dim, .. } if *dim == 0 => {
                bad("dimension must be positive".into())
            }
            ProcessKind::Ar1 { coef, dim, innovation_sd } => {
                if !(coef.abs() < 1.0) {
                    return bad(format!("AR(1) coefficient {coef} must lie strictly inside (-1, 1)"));
                }
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
                if !(*innovation_sd > 0.0 && innovation_sd.is_finite()) {
                    return bad(format!("innovation sd {innovation_sd} must be positive"));
                }
                Ok(())
            }
            ProcessKind::MarkovChain { chain, start } => match start {
                Some(s) if *s >= chain.state_count() => {
                    bad(format!("start state {s} outside [0, {})", chain.state_count()))
                }
                _ => Ok(()),
            },
            ProcessKind::GaussianCopulaVector { correlation, temporal } => {
                if !(temporal.abs() < 1.0) {
                    return bad(format!("temporal coefficient {temporal} must lie strictly inside (-1, 1)"));
                }
                correlation_root(correlation).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Row width of generated paths (1 for state paths).
    pub fn dim(&self) -> usize {
        match self {
            ProcessKind::Iid { dim } | ProcessKind::Ar1 { dim, .. } | ProcessKind::MDependent { dim, .. } => *dim,
            ProcessKind::MarkovChain { .. } => 1,
            ProcessKind::GaussianCopulaVector { correlation, .. } => correlation.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Iid { .. } => "iid",
            ProcessKind::Ar1 { .. } => "ar1",
            ProcessKind::MDependent { .. } => "m_dependent",
            ProcessKind::MarkovChain { .. } => "markov_chain",
            ProcessKind::GaussianCopulaVector { .. } => "gaussian_copula_vector",
        }
    }
}

/// A process family together with its master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    #[serde(default)]
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()
    }
}

/// Generates replication 0 of `spec` with length `len`.
pub fn generate(spec: &ProcessSpec, len: usize) -> Result<SeriesPath> {
    generate_stream(spec, len, 0, streams::PATH)
}

/// Generates replication `replication` on the default path stream.
pub fn generate_replication(spec: &ProcessSpec, len: usize, replication: u64) -> Result<SeriesPath> {
    generate_stream(spec, len, replication, streams::PATH)
}

/// Generates a path from the random stream keyed by
/// `(spec.seed, replication, stream)`.
pub fn generate_stream(spec: &ProcessSpec, len: usize, replication: u64, stream: u64) -> Result<SeriesPath> {
    if len == 0 {
        return Err(ProcessError::InvalidSpec("path length must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, replication, stream);
    let path = generate_with(&spec.kind, len, &mut rng)?;
    Ok(path.with_provenance(Provenance {
        spec: spec.clone(),
        replication,
        stream,
    }))
}

/// Generates a path from an explicit RNG; `kind` must already be valid.
pub fn generate_with<R: Rng + ?Sized>(kind: &ProcessKind, len: usize, rng: &mut R) -> Result<SeriesPath> {
    match kind {
        ProcessKind::Iid { dim } => {
            let values = (0..len * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            SeriesPath::from_rows(*dim, values)
        }
        ProcessKind::Ar1 { coef, dim, innovation_sd } => {
            let sd0 = innovation_sd / (1.0 - coef * coef).sqrt();
            let mut values = Vec::with_capacity(len * dim);
            for _ in 0..*dim {
                values.push(sd0 * rng.sample::<f64, _>(StandardNormal));
            }
            for t in 1..len {
                for j in 0..*dim {
                    let prev = values[(t - 1) * dim + j];
                    values.push(coef * prev + innovation_sd * rng.sample::<f64, _>(StandardNormal));
                }
            }
            SeriesPath::from_rows(*dim, values)
        }
        ProcessKind::MDependent { window, dim } => {
            let w = window + 1;
            let scale = 1.0 / (w as f64).sqrt();
            let noise: Vec<f64> = (0..(len + window) * dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut values = Vec::with_capacity(len * dim);
            for t in 0..len {
                for j in 0..*dim {
                    let s: f64 = (t..t + w).map(|u| noise[u * dim + j]).sum();
                    values.push(s * scale);
                }
            }
            SeriesPath::from_rows(*dim, values)
        }
        ProcessKind::MarkovChain { chain, start } => {
            let states = chain.sample_path(len, *start, rng);
            SeriesPath::from_states(chain.state_count(), states)
        }
        ProcessKind::GaussianCopulaVector { correlation, temporal } => {
            let root = correlation_root(correlation)?;
            let p = correlation.len();
            let innov = (1.0 - temporal * temporal).sqrt();
            let mut z = vec![0.0; p];
            let mut eps = vec![0.0; p];
            let mut values = Vec::with_capacity(len * p);
            for t in 0..len {
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                let scale = if t == 0 { 1.0 } else { innov };
                let decay = if t == 0 { 0.0 } else { *temporal };
                for i in 0..p {
                    let shock: f64 = (0..p).map(|k| root[(i, k)] * eps[k]).sum();
                    z[i] = decay * z[i] + scale * shock;
                }
                values.extend(z.iter().map(|&v| normal_cdf(v)));
            }
            SeriesPath::from_rows(p, values)
        }
    }
}

/// Draws `n` independent rows from the stationary one-time marginal of the
/// process (row-major, `n × dim`).
pub fn sample_stationary_marginal<R: Rng + ?Sized>(kind: &ProcessKind, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    kind.validate()?;
    Ok(match kind {
        ProcessKind::Iid { dim } | ProcessKind::MDependent { dim, .. } => {
            (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        }
        ProcessKind::Ar1 { coef, dim, innovation_sd } => {
            let sd0 = innovation_sd / (1.0 - coef * coef).sqrt();
            (0..n * dim).map(|_| sd0 * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        ProcessKind::MarkovChain { chain, .. } => (0..n).map(|_| chain.sample_stationary(rng) as f64).collect(),
        ProcessKind::GaussianCopulaVector { correlation, .. } => {
            let root = correlation_root(correlation)?;
            let p = correlation.len();
            let mut out = Vec::with_capacity(n * p);
            let mut eps = vec![0.0; p];
            for _ in 0..n {
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                for i in 0..p {
                    let z: f64 = (0..p).map(|k| root[(i, k)] * eps[k]).sum();
                    out.push(normal_cdf(z));
                }
            }
            out
        }
    })
}

/// Validates a correlation matrix and returns a square root `L` with
/// `LLᵀ = C` built from its eigendecomposition.
pub fn correlation_root(correlation: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = correlation.len();
    let bad = |msg: String| Err(ProcessError::InvalidSpec(msg));
    if p == 0 {
        return bad("correlation matrix is empty".into());
    }
    if correlation.iter().any(|r| r.len() != p) {
        return bad("correlation matrix is not square".into());
    }
    for i in 0..p {
        if (correlation[i][i] - 1.0).abs() > 1e-12 {
            return bad(format!("diagonal entry {i} is {}", correlation[i][i]));
        }
        for j in 0..i {
            if !correlation[i][j].is_finite() || (correlation[i][j] - correlation[j][i]).abs() > 1e-12 {
                return bad(format!("entries ({i},{j}) and ({j},{i}) differ"));
            }
        }
    }
    let c = DMatrix::from_fn(p, p, |i, j| correlation[i][j]);
    let eig = SymmetricEigen::new(c);
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return bad(format!("correlation matrix is not positive semidefinite (eigenvalue {min})"));
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// Toeplitz correlation `ρ^{|i−j|}`.
pub fn toeplitz_correlation(p: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| rho.powi((i as i32 - j as i32).abs())).collect())
        .collect()
}

/// Equicorrelation matrix with off-diagonal `ρ`.
pub fn equi_correlation(p: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { rho }).collect())
        .collect()
}

/// Maps each value of a one-dimensional path to the index of its cell:
/// the number of cut points `≤ x`.
pub fn truncate_to_finite(path: &SeriesPath, cuts: &[f64]) -> Result<SeriesPath> {
    if cuts.is_empty() {
        return Err(ProcessError::InvalidSpec("partition has no cut points".into()));
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ProcessError::InvalidSpec("cut points must be strictly increasing".into()));
    }
    if path.dim() != 1 {
        return Err(ProcessError::InvalidPath("truncation needs a one-dimensional path".into()));
    }
    let states = path
        .real_values()
        .iter()
        .map(|&x| cuts.partition_point(|&c| c <= x))
        .collect();
    SeriesPath::from_states(cuts.len() + 1, states)
}

/// Output at `t` is `aggregator(base[t..=t+window])`; length shrinks by
/// `window`.
pub fn m_dependent_from_iid<F>(base: &SeriesPath, window: usize, aggregator: F) -> Result<SeriesPath>
where
    F: Fn(&[f64]) -> f64,
{
    if base.dim() != 1 {
        return Err(ProcessError::InvalidPath("base path must be one-dimensional".into()));
    }
    if base.len() < window + 1 {
        return Err(ProcessError::InvalidSpec(format!(
            "base length {} is shorter than window + 1 = {}",
            base.len(),
            window + 1
        )));
    }
    let values = base.real_values();
    Ok(SeriesPath::from_values(
        values.windows(window + 1).map(&aggregator).collect(),
    ))
}
