//! Exact mixing coefficients of stationary finite-state Markov chains.
//!
//! By the Markov property the full-past/full-future suprema reduce to the
//! pair `(X_0, X_n)`: β and φ are attained at atoms of the past, and the
//! supremum over future events `B` is a sum of positive parts.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::processes::FiniteMarkovChain;
use crate::stats::least_squares;

/// Largest state space for which α is computed by subset enumeration.
pub const MAX_ALPHA_STATES: usize = 16;

#[derive(Debug, Error)]
pub enum MixingError {
    #[error("lag must be at least 1, got {0}")]
    InvalidLag(usize),
    #[error("{states} states exceed the enumeration limit of {max}")]
    TooManyStates { states: usize, max: usize },
    #[error("invalid conditioning: {0}")]
    InvalidConditioning(String),
    #[error("conditioning event has probability zero")]
    ZeroProbability,
    #[error("decay fit needs at least 3 lags, got {0}")]
    TooFewLags(usize),
    #[error("value {value} at lag {lag} is not positive")]
    NonPositive { lag: usize, value: f64 },
    #[error("coefficients do not decay (fitted rate {0})")]
    NonDecaying(f64),
    #[error("lags and values differ in length")]
    LengthMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, MixingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    Alpha,
    Beta,
    Phi,
    ConditionalPhi,
    ConditionalAlpha,
}

/// A state observed at a time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub time: usize,
    pub state: usize,
}

impl From<(usize, usize)> for Observation {
    fn from((time, state): (usize, usize)) -> Self {
        Self { time, state }
    }
}

/// Coefficient values on a lag grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub kind: CoefficientKind,
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub fitted_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<Vec<Observation>>,
    /// Gaps over which conditional values were maximized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_grid: Option<Vec<usize>>,
}

impl MixingProfile {
    pub fn new(kind: CoefficientKind, lags: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if lags.len() != values.len() {
            return Err(MixingError::LengthMismatch);
        }
        Ok(Self {
            kind,
            lags,
            values,
            fitted_gamma: None,
            conditioning: None,
            gap_grid: None,
        })
    }

    /// Copy with exact (or numerically) zero values removed.
    pub fn without_zeros(&self) -> Self {
        let (lags, values) = self
            .lags
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&l, &v)| (l, v))
            .unzip();
        Self {
            lags,
            values,
            ..self.clone()
        }
    }

    /// Fits the decay rate on the positive lags and stores it when the fit
    /// succeeds.
    pub fn with_fitted_gamma(mut self) -> Self {
        self.fitted_gamma = fit_decay_rate(&self.without_zeros()).ok();
        self
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lag,value")?;
        for (l, v) in self.lags.iter().zip(&self.values) {
            writeln!(w, "{l},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_lag(n: usize) -> Result<()> {
    if n < 1 {
        Err(MixingError::InvalidLag(n))
    } else {
        Ok(())
    }
}

/// Total variation distance: half the L1 distance.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// β(n) = ½ Σ_i π_i Σ_j |Pⁿ(i,j) − π_j|.
pub fn beta_coeff(chain: &FiniteMarkovChain, n: usize) -> Result<f64> {
    check_lag(n)?;
    let pn = chain.power(n);
    let pi = chain.stationary();
    let s = chain.state_count();
    let mut total = 0.0;
    for i in 0..s {
        let row: f64 = (0..s).map(|j| (pn[(i, j)] - pi[j]).abs()).sum();
        total += pi[i] * row;
    }
    Ok(0.5 * total)
}

/// φ(n) = max over states `i` with `π_i > 0` of TV(Pⁿ(i,·), π).
pub fn phi_coeff(chain: &FiniteMarkovChain, n: usize) -> Result<f64> {
    check_lag(n)?;
    let pi = chain.stationary();
    Ok((0..chain.state_count())
        .filter(|&i| pi[i] > 0.0)
        .map(|i| total_variation(&chain.power_row(n, i), pi))
        .fold(0.0, f64::max))
}

/// α(n) = sup over state subsets `A, B` of `|P(X₀∈A, X_n∈B) − π(A)π(B)|`.
pub fn alpha_coeff(chain: &FiniteMarkovChain, n: usize) -> Result<f64> {
    check_lag(n)?;
    let pi = chain.stationary();
    let pn = chain.power(n);
    let s = chain.state_count();
    let rows: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| pn[(i, j)]).collect()).collect();
    subset_alpha(pi, &rows, pi)
}

/// `sup_{A,B} |Σ_{i∈A} q_i (R_{iB} − m_B)|` where `R` is row-stochastic and
/// `m = qR`. For fixed `A` the supremum over `B` collects the positive
/// parts; the negative side is covered by the complement of `A`.
fn subset_alpha(q: &[f64], rows: &[Vec<f64>], m: &[f64]) -> Result<f64> {
    let s = q.len();
    if s > MAX_ALPHA_STATES {
        return Err(MixingError::TooManyStates {
            states: s,
            max: MAX_ALPHA_STATES,
        });
    }
    let weighted: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..s).map(|j| q[i] * (rows[i][j] - m[j])).collect())
        .collect();
    let mut best = 0.0f64;
    let mut col = vec![0.0; s];
    for mask in 1u32..(1u32 << s) {
        col.iter_mut().for_each(|c| *c = 0.0);
        for i in (0..s).filter(|&i| mask >> i & 1 == 1) {
            for (c, w) in col.iter_mut().zip(&weighted[i]) {
                *c += w;
            }
        }
        let pos: f64 = col.iter().filter(|&&c| c > 0.0).sum();
        best = best.max(pos);
    }
    Ok(best)
}

/// Validates the conditioning sequence and returns the most recent
/// observation.
fn conditioning_anchor(chain: &FiniteMarkovChain, conditioning: &[Observation]) -> Result<Observation> {
    let last = *conditioning
        .last()
        .ok_or_else(|| MixingError::InvalidConditioning("no conditioning observations".into()))?;
    let s = chain.state_count();
    let mut prob = None;
    for (k, obs) in conditioning.iter().enumerate() {
        if obs.state >= s {
            return Err(MixingError::InvalidConditioning(format!(
                "state {} outside [0, {s})",
                obs.state
            )));
        }
        prob = Some(match prob {
            None => chain.stationary()[obs.state],
            Some(p) => {
                let prev = conditioning[k - 1];
                if obs.time <= prev.time {
                    return Err(MixingError::InvalidConditioning("times must be strictly increasing".into()));
                }
                p * chain.power(obs.time - prev.time)[(prev.state, obs.state)]
            }
        });
    }
    if !(prob.unwrap_or(0.0) > 0.0) {
        return Err(MixingError::ZeroProbability);
    }
    Ok(last)
}

/// φ-coefficient of the law of `(X_t)_{t > t_J}` given the conditioning
/// states, between the past block `X_{t_J+1..t_J+j}` and the future block
/// starting at `X_{t_J+j+n}`.
///
/// Given the conditioning event the future of a Markov chain depends only on
/// the last conditioning state `s_J`, so the value is
/// `max_a TV(Pⁿ(a,·), P^{j+n}(s_J,·))` over states `a` reachable in `j`
/// steps from `s_J`. It does not depend on how many future coordinates the
/// events may involve.
pub fn conditional_phi_coeff(
    chain: &FiniteMarkovChain,
    conditioning: &[Observation],
    gap: usize,
    n: usize,
) -> Result<f64> {
    check_lag(n)?;
    check_lag(gap)?;
    let anchor = conditioning_anchor(chain, conditioning)?;
    let reach = chain.power_row(gap, anchor.state);
    let target = chain.power_row(gap + n, anchor.state);
    Ok((0..chain.state_count())
        .filter(|&a| reach[a] > 0.0)
        .map(|a| total_variation(&chain.power_row(n, a), &target))
        .fold(0.0, f64::max))
}

/// α-coefficient of the conditional law, with the same blocks as
/// [`conditional_phi_coeff`].
pub fn conditional_alpha_coeff(
    chain: &FiniteMarkovChain,
    conditioning: &[Observation],
    gap: usize,
    n: usize,
) -> Result<f64> {
    check_lag(n)?;
    check_lag(gap)?;
    let anchor = conditioning_anchor(chain, conditioning)?;
    let s = chain.state_count();
    let q = chain.power_row(gap, anchor.state);
    let m = chain.power_row(gap + n, anchor.state);
    let rows: Vec<Vec<f64>> = (0..s).map(|a| chain.power_row(n, a)).collect();
    subset_alpha(&q, &rows, &m)
}

/// Unconditional profile on `lags`, with a fitted decay rate when at least
/// three lags are positive.
pub fn mixing_profile(chain: &FiniteMarkovChain, kind: CoefficientKind, lags: &[usize]) -> Result<MixingProfile> {
    let f = match kind {
        CoefficientKind::Alpha => alpha_coeff,
        CoefficientKind::Beta => beta_coeff,
        CoefficientKind::Phi => phi_coeff,
        CoefficientKind::ConditionalPhi | CoefficientKind::ConditionalAlpha => {
            return Err(MixingError::InvalidConditioning(
                "conditional profiles need conditioning observations".into(),
            ))
        }
    };
    let values = lags.iter().map(|&n| f(chain, n)).collect::<Result<Vec<_>>>()?;
    Ok(MixingProfile::new(kind, lags.to_vec(), values)?.with_fitted_gamma())
}

/// Conditional profile: the value at each lag is the maximum over
/// `gap_grid`.
pub fn conditional_profile(
    chain: &FiniteMarkovChain,
    kind: CoefficientKind,
    conditioning: &[Observation],
    gap_grid: &[usize],
    lags: &[usize],
) -> Result<MixingProfile> {
    let f = match kind {
        CoefficientKind::ConditionalPhi => conditional_phi_coeff,
        CoefficientKind::ConditionalAlpha => conditional_alpha_coeff,
        _ => return mixing_profile(chain, kind, lags),
    };
    if gap_grid.is_empty() {
        return Err(MixingError::InvalidConditioning("empty gap grid".into()));
    }
    let mut values = Vec::with_capacity(lags.len());
    for &n in lags {
        let mut best = 0.0f64;
        for &j in gap_grid {
            best = best.max(f(chain, conditioning, j, n)?);
        }
        values.push(best);
    }
    let mut profile = MixingProfile::new(kind, lags.to_vec(), values)?.with_fitted_gamma();
    profile.conditioning = Some(conditioning.to_vec());
    profile.gap_grid = Some(gap_grid.to_vec());
    Ok(profile)
}

/// Least-squares slope of `−ln(value)` against lag.
pub fn fit_decay_rate(profile: &MixingProfile) -> Result<f64> {
    if profile.lags.len() != profile.values.len() {
        return Err(MixingError::LengthMismatch);
    }
    if profile.lags.len() < 3 {
        return Err(MixingError::TooFewLags(profile.lags.len()));
    }
    if let Some((&lag, &value)) = profile.lags.iter().zip(&profile.values).find(|(_, &v)| !(v > 0.0)) {
        return Err(MixingError::NonPositive { lag, value });
    }
    let xs: Vec<f64> = profile.lags.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = profile.values.iter().map(|v| -v.ln()).collect();
    let fit = least_squares(&xs, &ys).ok_or(MixingError::TooFewLags(profile.lags.len()))?;
    if !(fit.slope > 1e-9) {
        return Err(MixingError::NonDecaying(fit.slope));
    }
    Ok(fit.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flip(p: f64) -> FiniteMarkovChain {
        FiniteMarkovChain::symmetric_two_state(p).unwrap()
    }

    #[test]
    fn iid_chain_is_independent() {
        let c = FiniteMarkovChain::iid(vec![0.2, 0.3, 0.5]).unwrap();
        for n in 1..4 {
            assert!(beta_coeff(&c, n).unwrap() < 1e-15);
            assert!(phi_coeff(&c, n).unwrap() < 1e-15);
            assert!(alpha_coeff(&c, n).unwrap() < 1e-15);
            let cond = [Observation { time: 0, state: 1 }];
            assert!(conditional_phi_coeff(&c, &cond, 1, n).unwrap() < 1e-15);
        }
    }

    #[test]
    fn two_state_examples() {
        let c = flip(0.25);
        assert!((beta_coeff(&c, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((beta_coeff(&c, 3).unwrap() - 0.0625).abs() < 1e-15);
        assert!((phi_coeff(&c, 1).unwrap() - 0.25).abs() < 1e-15);
        // P(X₀=0, X₁=0) − π₀² = 0.375 − 0.25
        assert!((alpha_coeff(&c, 1).unwrap() - 0.125).abs() < 1e-15);
        let cyc = flip(1.0);
        for n in 1..5 {
            assert_eq!(phi_coeff(&cyc, n).unwrap(), 0.5);
        }
    }

    #[test]
    fn lag_zero_rejected() {
        assert!(matches!(beta_coeff(&flip(0.3), 0), Err(MixingError::InvalidLag(0))));
    }

    #[test]
    fn decay_fit_examples() {
        let lags: Vec<usize> = (1..=6).collect();
        let values = lags.iter().map(|&n| 0.5 * 0.5f64.powi(n as i32)).collect();
        let p = MixingProfile::new(CoefficientKind::Beta, lags, values).unwrap();
        assert!((fit_decay_rate(&p).unwrap() - 2f64.ln()).abs() < 1e-10);

        let lags: Vec<usize> = (1..=8).collect();
        let prof = mixing_profile(&flip(0.25), CoefficientKind::Beta, &lags).unwrap();
        assert!((prof.fitted_gamma.unwrap() - 2f64.ln()).abs() < 1e-8);

        let cyc = mixing_profile(&flip(1.0), CoefficientKind::Phi, &lags).unwrap();
        assert!(matches!(fit_decay_rate(&cyc), Err(MixingError::NonDecaying(_))));
        assert!(cyc.fitted_gamma.is_none());

        let zero = MixingProfile::new(CoefficientKind::Beta, vec![1, 2, 3], vec![0.1, 0.0, 0.01]).unwrap();
        assert!(matches!(fit_decay_rate(&zero), Err(MixingError::NonPositive { lag: 2, .. })));
        assert!(fit_decay_rate(&zero.without_zeros()).is_err());
    }

    #[test]
    fn conditional_example_against_hand_value() {
        // flip 0.25 with X_{t_J}=0, j=1: reachable states 0 and 1,
        // P^2(0,·) = (0.625, 0.375), P(a,·) ∈ {(0.75,0.25), (0.25,0.75)}
        let c = flip(0.25);
        let v = conditional_phi_coeff(&c, &[Observation { time: 0, state: 0 }], 1, 1).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
        assert!(v <= 2.0 * phi_coeff(&c, 1).unwrap());
    }

    #[test]
    fn conditional_rejects_impossible_event() {
        let c = flip(1.0);
        let cond = [Observation { time: 0, state: 0 }, Observation { time: 2, state: 1 }];
        assert!(matches!(conditional_phi_coeff(&c, &cond, 1, 1), Err(MixingError::ZeroProbability)));
        let bad_order = [Observation { time: 2, state: 0 }, Observation { time: 1, state: 0 }];
        assert!(conditional_phi_coeff(&flip(0.3), &bad_order, 1, 1).is_err());
    }

    #[test]
    fn profile_exports() {
        let prof = mixing_profile(&flip(0.25), CoefficientKind::Alpha, &[1, 2, 3]).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lag,value\n1,1.25"));
        let json: serde_json::Value = serde_json::from_str(&prof.to_json().unwrap()).unwrap();
        assert_eq!(json["kind"], "alpha");
        assert_eq!(json["lags"].as_array().unwrap().len(), 3);
    }
}
