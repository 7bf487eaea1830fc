use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProcessError;

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// `πP = π` must hold within this tolerance.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Stationary finite-state Markov chain: a row-stochastic transition matrix
/// together with its stationary distribution.
///
/// Matrix powers are memoized behind a shared `RwLock`, so a chain can be
/// read from many threads at once; clones share the cache.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "ChainDef", into = "ChainDef")]
pub struct FiniteMarkovChain {
    transition: DMatrix<f64>,
    stationary: Vec<f64>,
    state_values: Option<Vec<Vec<f64>>>,
    powers: Arc<RwLock<Vec<Arc<DMatrix<f64>>>>>,
}

/// Serialized form of a chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDef {
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_values: Option<Vec<Vec<f64>>>,
}

impl TryFrom<ChainDef> for FiniteMarkovChain {
    type Error = ProcessError;

    fn try_from(def: ChainDef) -> Result<Self, ProcessError> {
        let chain = FiniteMarkovChain::new(def.transition)?;
        match def.state_values {
            Some(v) => chain.with_state_values(v),
            None => Ok(chain),
        }
    }
}

impl From<FiniteMarkovChain> for ChainDef {
    fn from(chain: FiniteMarkovChain) -> Self {
        ChainDef {
            transition: chain.rows(),
            state_values: chain.state_values.clone(),
        }
    }
}

impl fmt::Debug for FiniteMarkovChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMarkovChain")
            .field("transition", &self.rows())
            .field("stationary", &self.stationary)
            .finish()
    }
}

impl PartialEq for FiniteMarkovChain {
    fn eq(&self, other: &Self) -> bool {
        self.transition == other.transition && self.state_values == other.state_values
    }
}

impl FiniteMarkovChain {
    /// Validates a row-stochastic matrix and solves for its stationary law.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ProcessError> {
        let s = rows.len();
        if s < 2 {
            return Err(ProcessError::InvalidChain(format!("need at least 2 states, got {s}")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != s {
                return Err(ProcessError::InvalidChain(format!(
                    "row {i} has {} entries, expected {s}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(ProcessError::InvalidChain(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ProcessError::InvalidChain(format!("row {i} sums to {sum}")));
            }
        }
        let transition = DMatrix::from_fn(s, s, |i, j| rows[i][j]);
        let stationary = solve_stationary(&transition)?;
        Ok(Self {
            powers: Arc::new(RwLock::new(vec![Arc::new(DMatrix::identity(s, s))])),
            transition,
            stationary,
            state_values: None,
        })
    }

    /// Two-state chain with `P(0→1) = p` and `P(1→0) = q`.
    pub fn two_state(p: f64, q: f64) -> Result<Self, ProcessError> {
        Self::new(vec![vec![1.0 - p, p], vec![q, 1.0 - q]])
    }

    /// Two-state chain that switches state with probability `flip`.
    pub fn symmetric_two_state(flip: f64) -> Result<Self, ProcessError> {
        Self::two_state(flip, flip)
    }

    /// Chain whose rows all equal `marginal`: an iid sequence.
    pub fn iid(marginal: Vec<f64>) -> Result<Self, ProcessError> {
        let s = marginal.len();
        Self::new(vec![marginal; s])
    }

    /// Chain with strictly positive random rows (hence irreducible and
    /// aperiodic).
    pub fn random<R: Rng + ?Sized>(state_count: usize, rng: &mut R) -> Result<Self, ProcessError> {
        let rows = (0..state_count)
            .map(|_| {
                let raw: Vec<f64> = (0..state_count).map(|_| 0.05 + rng.random::<f64>()).collect();
                normalize_row(raw)
            })
            .collect();
        Self::new(rows)
    }

    /// Attaches a real vector to each state (used when feeding real-valued
    /// kernels from a state path).
    pub fn with_state_values(mut self, values: Vec<Vec<f64>>) -> Result<Self, ProcessError> {
        if values.len() != self.state_count() {
            return Err(ProcessError::InvalidChain(format!(
                "{} state values for {} states",
                values.len(),
                self.state_count()
            )));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(ProcessError::InvalidChain("state values must share a positive dimension".into()));
        }
        self.state_values = Some(values);
        Ok(self)
    }

    pub fn state_count(&self) -> usize {
        self.transition.nrows()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn state_values(&self) -> Option<&[Vec<f64>]> {
        self.state_values.as_deref()
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[(from, to)]
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let s = self.state_count();
        (0..s).map(|i| (0..s).map(|j| self.transition[(i, j)]).collect()).collect()
    }

    /// `Pⁿ`, computed by repeated right-multiplication and cached.
    pub fn power(&self, n: usize) -> Arc<DMatrix<f64>> {
        {
            let cache = self.powers.read().expect("power cache poisoned");
            if let Some(m) = cache.get(n) {
                return Arc::clone(m);
            }
        }
        let mut cache = self.powers.write().expect("power cache poisoned");
        while cache.len() <= n {
            let next = cache.last().unwrap().as_ref() * &self.transition;
            cache.push(Arc::new(next));
        }
        Arc::clone(&cache[n])
    }

    /// Row `from` of `Pⁿ` as a vector.
    pub fn power_row(&self, n: usize, from: usize) -> Vec<f64> {
        let p = self.power(n);
        (0..self.state_count()).map(|j| p[(from, j)]).collect()
    }

    /// Distribution after `n` steps from the initial law `mu`.
    pub fn propagate(&self, mu: &[f64], n: usize) -> Vec<f64> {
        let p = self.power(n);
        let s = self.state_count();
        (0..s).map(|j| (0..s).map(|i| mu[i] * p[(i, j)]).sum()).collect()
    }

    /// Draws one next state from row `from` using a uniform variate.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let s = self.state_count();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for j in 0..s {
            let p = self.transition[(from, j)];
            if p > 0.0 {
                last_positive = j;
                acc += p;
                if u < acc {
                    return j;
                }
            }
        }
        last_positive
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.stationary, rng)
    }

    /// Path of `len` states starting at `start`, or at a stationary draw when
    /// `start` is `None`.
    pub fn sample_path<R: Rng + ?Sized>(&self, len: usize, start: Option<usize>, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        let mut cur = start.unwrap_or_else(|| self.sample_stationary(rng));
        out.push(cur);
        for _ in 1..len {
            cur = self.step(cur, rng);
            out.push(cur);
        }
        out
    }
}

fn normalize_row(raw: Vec<f64>) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    // push the rounding residue into the largest entry so the row sums to 1
    let residue = 1.0 - row.iter().sum::<f64>();
    let imax = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    row[imax] += residue;
    row
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
            acc += p;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>, ProcessError> {
    let s = p.nrows();
    // (Pᵀ − I)π = 0 with the last equation replaced by Σπ = 1.
    let mut a = p.transpose() - DMatrix::identity(s, s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(s);
    b[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| ProcessError::InvalidChain("stationary distribution is not unique".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|&v| if v < 0.0 && v > -1e-13 { 0.0 } else { v }).collect();
    if pi.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(ProcessError::InvalidChain("stationary distribution is not unique".into()));
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    for j in 0..s {
        let pj: f64 = (0..s).map(|i| pi[i] * p[(i, j)]).sum();
        if (pj - pi[j]).abs() > STATIONARY_TOL {
            return Err(ProcessError::InvalidChain(format!(
                "stationary solve failed: (πP)_{j} − π_{j} = {}",
                pj - pi[j]
            )));
        }
    }
    Ok(pi)
}
