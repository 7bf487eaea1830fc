//! Parametric exponential tail and log-MGF bounds, Bernstein-parameter
//! algebra and calibration of the free constants against simulated tails.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("x must be non-negative, got {0}")]
    NegativeX(f64),
    #[error("{0}")]
    InvalidInput(String),
    #[error("eta = {eta} is outside the admissible interval (0, {limit})")]
    EtaOutOfRange { eta: f64, limit: f64 },
    #[error("eta·max|x| = {0} exceeds the overflow guard of 700")]
    Overflow(f64),
    #[error("empty input")]
    Empty,
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

/// Largest `η·max|x|` accepted by [`empirical_log_mgf`].
pub const MGF_EXPONENT_GUARD: f64 = 700.0;

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::NegativeX(x))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_len(t: usize, min: usize) -> Result<()> {
    if t >= min {
        Ok(())
    } else {
        Err(BoundsError::InvalidInput(format!("T must be at least {min}, got {t}")))
    }
}

/// `ln T · ln ln 4T` (natural logarithms).
pub fn log_factor(t: usize) -> f64 {
    let t = t as f64;
    t.ln() * (4.0 * t).ln().ln()
}

/// `2·exp(−c0·T·x²/(M² + M·x))`.
pub fn hoeffding_bound(x: f64, t: usize, m: f64, c0: f64) -> Result<f64> {
    check_x(x)?;
    check_len(t, 1)?;
    check_positive("M", m)?;
    check_positive("c0", c0)?;
    Ok(2.0 * (-c0 * t as f64 * x * x / (m * m + m * x)).exp())
}

/// `2·exp(−c3·x²/(T·M² + M·x·ln T·ln ln 4T))`.
pub fn merlevede_tail_bound(x: f64, t: usize, m: f64, c3: f64) -> Result<f64> {
    check_x(x)?;
    check_len(t, 2)?;
    check_positive("M", m)?;
    check_positive("c3", c3)?;
    Ok(2.0 * (-c3 * x * x / (t as f64 * m * m + m * x * log_factor(t))).exp())
}

/// Upper end of the η interval for [`merlevede_logmgf_bound`].
pub fn merlevede_eta_limit(t: usize, m: f64, c1: f64) -> f64 {
    1.0 / (c1 * m * log_factor(t))
}

/// `c2·η²·T·M² / (1 − c1·η·M·ln T·ln ln 4T)` for `0 < η` below the pole.
pub fn merlevede_logmgf_bound(eta: f64, t: usize, m: f64, c1: f64, c2: f64) -> Result<f64> {
    check_len(t, 2)?;
    check_positive("M", m)?;
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    let limit = merlevede_eta_limit(t, m, c1);
    if !(eta > 0.0 && eta < limit) {
        return Err(BoundsError::EtaOutOfRange { eta, limit });
    }
    Ok(c2 * eta * eta * t as f64 * m * m / (1.0 - c1 * eta * m * log_factor(t)))
}

/// `2·exp(−c5·x²·T/(M² + M·x·ln T·ln ln 4T))`.
pub fn theorem1_bound(x: f64, t: usize, m: f64, c5: f64) -> Result<f64> {
    check_x(x)?;
    check_len(t, 2)?;
    check_positive("M", m)?;
    check_positive("c5", c5)?;
    Ok(2.0 * (-c5 * x * x * t as f64 / (m * m + m * x * log_factor(t))).exp())
}

/// Deviation offset `c4·M/√T` in front of the tail bound.
pub fn theorem1_threshold(t: usize, m: f64, c4: f64) -> Result<f64> {
    check_len(t, 2)?;
    check_positive("M", m)?;
    if !(c4 >= 0.0) {
        return Err(BoundsError::InvalidInput(format!("c4 must be non-negative, got {c4}")));
    }
    Ok(c4 * m / (t as f64).sqrt())
}

/// Upper end of the η interval for [`theorem2_logmgf_bound`].
pub fn theorem2_eta_limit(t: usize, m: f64, c6: f64) -> f64 {
    t as f64 / (c6 * m * log_factor(t))
}

/// `c7·η²·M²·T⁻¹ / (1 − c6·η·M·T⁻¹·ln T·ln ln 4T)`.
pub fn theorem2_logmgf_bound(eta: f64, t: usize, m: f64, c6: f64, c7: f64) -> Result<f64> {
    check_len(t, 2)?;
    check_positive("M", m)?;
    check_positive("c6", c6)?;
    check_positive("c7", c7)?;
    let limit = theorem2_eta_limit(t, m, c6);
    if !(eta > 0.0 && eta < limit) {
        return Err(BoundsError::EtaOutOfRange { eta, limit });
    }
    let tf = t as f64;
    Ok(c7 * eta * eta * m * m / tf / (1.0 - c6 * eta * m * log_factor(t) / tf))
}

/// `c·M/√T`.
pub fn bias_bound(t: usize, m: f64, c: f64) -> Result<f64> {
    check_len(t, 1)?;
    Ok(c * m / (t as f64).sqrt())
}

/// Envelope `log E exp(ηZ) ≤ (ση)²/(1 − κη)` for `0 ≤ η < 1/κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinParams {
    pub sigma: f64,
    pub kappa: f64,
}

impl BernsteinParams {
    pub fn new(sigma: f64, kappa: f64) -> Result<Self> {
        if !(sigma >= 0.0 && kappa >= 0.0 && sigma.is_finite() && kappa.is_finite()) {
            return Err(BoundsError::InvalidInput(format!(
                "sigma and kappa must be non-negative, got ({sigma}, {kappa})"
            )));
        }
        Ok(Self { sigma, kappa })
    }

    /// `1/κ` (infinite when `κ = 0`).
    pub fn eta_limit(&self) -> f64 {
        if self.kappa == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.kappa
        }
    }

    pub fn log_mgf_bound(&self, eta: f64) -> Result<f64> {
        let limit = self.eta_limit();
        if !(eta >= 0.0 && eta < limit) {
            return Err(BoundsError::EtaOutOfRange { eta, limit });
        }
        Ok((self.sigma * eta).powi(2) / (1.0 - self.kappa * eta))
    }
}

/// Parameters for a sum of variables: `σ = Σσ_i`, `κ = Σκ_i`.
pub fn combine_bernstein_params(params: &[BernsteinParams]) -> Result<BernsteinParams> {
    if params.is_empty() {
        return Err(BoundsError::Empty);
    }
    Ok(BernsteinParams {
        sigma: params.iter().map(|p| p.sigma).sum(),
        kappa: params.iter().map(|p| p.kappa).sum(),
    })
}

/// `log((1/n) Σ exp(η·x_i))`, evaluated with a shifted exponent.
pub fn empirical_log_mgf(samples: &[f64], eta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(BoundsError::Empty);
    }
    let max_abs = samples.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let guard = (eta * max_abs).abs();
    if !(guard <= MGF_EXPONENT_GUARD) {
        return Err(BoundsError::Overflow(guard));
    }
    let shift = samples.iter().map(|&x| eta * x).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = samples.iter().map(|&x| (eta * x - shift).exp()).sum();
    Ok(shift + (sum / samples.len() as f64).ln())
}

fn one() -> f64 {
    1.0
}

fn default_r() -> usize {
    2
}

/// Free constants of the bound families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(default = "one")]
    pub c4: f64,
    #[serde(default = "one")]
    pub c5: f64,
    #[serde(default = "one")]
    pub c6: f64,
    #[serde(default = "one")]
    pub c7: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_r")]
    pub r: usize,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c7: 1.0,
            gamma: 1.0,
            r: 2,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("c7", self.c7),
            ("gamma", self.gamma),
        ];
        for (name, v) in named {
            check_positive(name, v)?;
        }
        if self.r == 0 {
            return Err(BoundsError::InvalidInput("r must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tail bounds of the form `2·exp(−c·g(x, T, M))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// `g = T·x²/(M² + M·x)`.
    Hoeffding,
    /// `g = x²/(T·M² + M·x·L_T)`.
    Merlevede,
    /// `g = x²·T/(M² + M·x·L_T)`.
    Theorem1,
}

impl BoundFamily {
    /// The exponent rate `g(x, T, M)` multiplying the constant.
    pub fn rate(&self, x: f64, t: usize, m: f64) -> f64 {
        let tf = t as f64;
        match self {
            BoundFamily::Hoeffding => tf * x * x / (m * m + m * x),
            BoundFamily::Merlevede => x * x / (tf * m * m + m * x * log_factor(t)),
            BoundFamily::Theorem1 => x * x * tf / (m * m + m * x * log_factor(t)),
        }
    }

    pub fn bound(&self, x: f64, t: usize, m: f64, c: f64) -> Result<f64> {
        match self {
            BoundFamily::Hoeffding => hoeffding_bound(x, t, m, c),
            BoundFamily::Merlevede => merlevede_tail_bound(x, t, m, c),
            BoundFamily::Theorem1 => theorem1_bound(x, t, m, c),
        }
    }
}

/// One point of an empirical tail curve: `P(|U − θ| > x) ≈ tail` at length
/// `T` for a kernel bounded by `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    pub t: usize,
    pub m: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub family: BoundFamily,
    /// Offset constant; each `x` is reduced by `c4·M/√T` before fitting.
    pub c4: f64,
    /// Value reported when no point constrains the constant.
    pub cap: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            family: BoundFamily::Theorem1,
            c4: 0.0,
            cap: 1e6,
        }
    }
}

/// Result of [`calibrate_constants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub family: BoundFamily,
    /// Largest constant for which the bound dominates every point.
    pub constant: f64,
    pub c4: f64,
    /// True when every tail was zero (or every shifted `x` non-positive)
    /// and `constant` is the cap.
    pub capped: bool,
    pub binding: Option<TailPoint>,
    /// Bound minus tail at the binding point.
    pub binding_slack: Option<f64>,
    pub points_used: usize,
    /// The calibrated constants (the fitted one replaced in `base`).
    pub constants: BoundConstants,
}

/// Fits the exponent constant of `options.family` to empirical tail points.
///
/// The bound is decreasing in the constant, so the dominating constants form
/// an interval `(0, c*]` with `c* = min_i ln(2/p_i)/g(x_i, T_i, M_i)`. Points
/// with zero tail or non-positive shifted `x` impose no constraint.
pub fn calibrate_constants(points: &[TailPoint], options: &CalibrationOptions, base: &BoundConstants) -> Result<Calibration> {
    if points.len() < 5 {
        return Err(BoundsError::InsufficientData(format!("need at least 5 points, got {}", points.len())));
    }
    let mut lengths: Vec<usize> = points.iter().map(|p| p.t).collect();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.len() < 2 {
        return Err(BoundsError::InsufficientData("points must span at least two values of T".into()));
    }
    if !(options.c4 >= 0.0) {
        return Err(BoundsError::InvalidInput(format!("c4 must be non-negative, got {}", options.c4)));
    }
    check_positive("cap", options.cap)?;
    let min_t = if options.family == BoundFamily::Hoeffding { 1 } else { 2 };
    let mut best: Option<(f64, TailPoint, f64)> = None;
    for p in points {
        check_x(p.x)?;
        check_len(p.t, min_t)?;
        check_positive("M", p.m)?;
        if !(0.0..=1.0).contains(&p.tail) {
            return Err(BoundsError::InvalidInput(format!("tail probability {} outside [0, 1]", p.tail)));
        }
        let shifted = p.x - options.c4 * p.m / (p.t as f64).sqrt();
        if p.tail == 0.0 || shifted <= 0.0 {
            continue;
        }
        let c = (2.0 / p.tail).ln() / options.family.rate(shifted, p.t, p.m);
        if best.is_none_or(|(b, _, _)| c < b) {
            best = Some((c, *p, shifted));
        }
    }
    let mut constants = *base;
    let (constant, capped, binding, slack) = match best {
        Some((c, p, shifted)) => {
            let slack = options.family.bound(shifted, p.t, p.m, c)? - p.tail;
            (c, false, Some(p), Some(slack))
        }
        None => (options.cap, true, None, None),
    };
    match options.family {
        BoundFamily::Hoeffding => constants.c0 = constant,
        BoundFamily::Merlevede => constants.c3 = constant,
        BoundFamily::Theorem1 => {
            constants.c5 = constant;
            if options.c4 > 0.0 {
                constants.c4 = options.c4;
            }
        }
    }
    Ok(Calibration {
        family: options.family,
        constant,
        c4: options.c4,
        capped,
        binding,
        binding_slack: slack,
        points_used: points.len(),
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_bound(0.0, 100, 1.0, 1.0).unwrap(), 2.0);
        assert!((hoeffding_bound(2.0, 100, 2.0, 1.0).unwrap() - 2.0 * (-50.0f64).exp()).abs() < 1e-30);
        assert!(hoeffding_bound(1e6, 100, 1.0, 1.0).unwrap() < 1e-300);
        assert!(matches!(hoeffding_bound(-0.1, 10, 1.0, 1.0), Err(BoundsError::NegativeX(_))));
    }

    #[test]
    fn merlevede_examples() {
        assert_eq!(merlevede_tail_bound(0.0, 50, 1.0, 1.0).unwrap(), 2.0);
        assert!(merlevede_logmgf_bound(1e-12, 50, 1.0, 1.0, 1.0).unwrap() < 1e-20);
        let lim = merlevede_eta_limit(50, 1.0, 1.0);
        let v = merlevede_logmgf_bound(0.99 * lim, 50, 1.0, 1.0, 1.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(matches!(
            merlevede_logmgf_bound(lim, 50, 1.0, 1.0, 1.0),
            Err(BoundsError::EtaOutOfRange { .. })
        ));
        assert!(merlevede_tail_bound(0.1, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn theorem1_examples() {
        assert_eq!(theorem1_bound(0.0, 100, 1.0, 1.0).unwrap(), 2.0);
        assert!((theorem1_threshold(100, 2.0, 3.0).unwrap() - 0.6).abs() < 1e-15);
        let x = 1e-9;
        let a = theorem1_bound(x, 1000, 1.0, 1.0).unwrap() / 2.0;
        let b = theorem1_bound(x, 2000, 1.0, 1.0).unwrap() / 2.0;
        assert!((b.ln() / a.ln() - 2.0).abs() < 1e-6);
        assert!(theorem1_bound(-1.0, 10, 1.0, 1.0).is_err());
    }

    #[test]
    fn theorem2_pole_grows_with_t() {
        assert!(theorem2_eta_limit(1000, 1.0, 1.0) > theorem2_eta_limit(100, 1.0, 1.0));
        let lim = theorem2_eta_limit(100, 1.0, 1.0);
        assert!(theorem2_logmgf_bound(0.5 * lim, 100, 1.0, 1.0, 1.0).unwrap() > 0.0);
        assert!(theorem2_logmgf_bound(lim, 100, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bias_examples() {
        assert_eq!(bias_bound(4, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(bias_bound(16, 1.0, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn bernstein_examples() {
        let a = BernsteinParams::new(1.0, 1.0).unwrap();
        let b = BernsteinParams::new(2.0, 3.0).unwrap();
        assert_eq!(combine_bernstein_params(&[a]).unwrap(), a);
        assert_eq!(combine_bernstein_params(&[a, b]).unwrap(), BernsteinParams { sigma: 3.0, kappa: 4.0 });
        assert_eq!(combine_bernstein_params(&[b; 5]).unwrap(), BernsteinParams { sigma: 10.0, kappa: 15.0 });
        assert_eq!(combine_bernstein_params(&[]), Err(BoundsError::Empty));
        assert!(BernsteinParams::new(-1.0, 0.0).is_err());
        assert!(a.log_mgf_bound(1.0).is_err());
    }

    #[test]
    fn empirical_mgf_examples() {
        assert_eq!(empirical_log_mgf(&[0.0; 4], 3.0).unwrap(), 0.0);
        assert!((empirical_log_mgf(&[-1.0, 1.0], 1.0).unwrap() - 1f64.cosh().ln()).abs() < 1e-15);
        assert!(matches!(empirical_log_mgf(&[800.0], 1.0), Err(BoundsError::Overflow(_))));
        assert_eq!(empirical_log_mgf(&[], 1.0), Err(BoundsError::Empty));
    }

    #[test]
    fn calibration_round_trip() {
        let mut pts = Vec::new();
        for t in [100usize, 400] {
            for i in 1..=6 {
                let x = 0.05 * i as f64;
                let tail = theorem1_bound(x, t, 1.0, 0.1).unwrap().min(1.0);
                pts.push(TailPoint { x, t, m: 1.0, tail });
            }
        }
        let cal = calibrate_constants(&pts, &CalibrationOptions::default(), &BoundConstants::default()).unwrap();
        assert!((cal.constant - 0.1).abs() < 1e-6);
        assert!(!cal.capped);
        assert_eq!(cal.constants.c5, cal.constant);
        assert!(cal.binding_slack.unwrap().abs() < 1e-12);
    }

    #[test]
    fn calibration_degenerate_and_insufficient() {
        let zero: Vec<TailPoint> = (0..6)
            .map(|i| TailPoint {
                x: 0.1,
                t: 100 + 100 * (i % 2),
                m: 1.0,
                tail: 0.0,
            })
            .collect();
        let cal = calibrate_constants(&zero, &CalibrationOptions::default(), &BoundConstants::default()).unwrap();
        assert!(cal.capped);
        assert_eq!(cal.constant, 1e6);
        assert!(matches!(
            calibrate_constants(&zero[..4], &CalibrationOptions::default(), &BoundConstants::default()),
            Err(BoundsError::InsufficientData(_))
        ));
        let same_t: Vec<TailPoint> = zero.iter().map(|p| TailPoint { t: 100, ..*p }).collect();
        assert!(calibrate_constants(&same_t, &CalibrationOptions::default(), &BoundConstants::default()).is_err());
    }

    #[test]
    fn constants_serde_defaults() {
        let c: BoundConstants = serde_json::from_str(r#"{"c5": 0.2}"#).unwrap();
        assert_eq!(c, BoundConstants { c5: 0.2, ..Default::default() });
        assert!(serde_json::from_str::<BoundConstants>(r#"{"c9": 1}"#).is_err());
        assert!(BoundConstants { c3: 0.0, ..Default::default() }.validate().is_err());
    }

    fn params() -> impl Strategy<Value = BernsteinParams> {
        (0u32..1000, 0u32..1000).prop_map(|(s, k)| BernsteinParams {
            sigma: s as f64 / 8.0,
            kappa: k as f64 / 8.0,
        })
    }

    proptest! {
        #[test]
        fn tails_in_range_and_monotone(
            mut xs in prop::collection::vec(0.0f64..5.0, 2..30),
            t in 2usize..5000,
            m in 0.1f64..10.0,
            c in 0.01f64..10.0,
        ) {
            xs.sort_by(f64::total_cmp);
            for family in [BoundFamily::Hoeffding, BoundFamily::Merlevede, BoundFamily::Theorem1] {
                let vals: Vec<f64> = xs.iter().map(|&x| family.bound(x, t, m, c).unwrap()).collect();
                for w in vals.windows(2) {
                    prop_assert!(w[1] <= w[0]);
                }
                for v in vals {
                    prop_assert!((0.0..=2.0).contains(&v));
                }
            }
        }

        #[test]
        fn theorem1_non_increasing_in_t(frac in 0.0f64..=1.0, m in 0.1f64..10.0, c in 0.01f64..10.0, t in 2usize..10_000) {
            let x = frac * m;
            let a = theorem1_bound(x, t, m, c).unwrap();
            let b = theorem1_bound(x, t + 1, m, c).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn combination_is_associative_and_commutative(a in params(), b in params(), c in params()) {
            let ab_c = combine_bernstein_params(&[combine_bernstein_params(&[a, b]).unwrap(), c]).unwrap();
            let a_bc = combine_bernstein_params(&[a, combine_bernstein_params(&[b, c]).unwrap()]).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert_eq!(combine_bernstein_params(&[a, b]).unwrap(), combine_bernstein_params(&[b, a]).unwrap());
        }
    }
}
