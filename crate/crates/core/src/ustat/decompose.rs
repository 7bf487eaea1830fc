use serde::{Deserialize, Serialize};

use super::expectation::{check_feasible, theta_star_with, ConditionalExpectationOracle};
use super::{for_each_combination, Result, UstatError};
use crate::kernels::KernelSpec;
use crate::processes::{FiniteMarkovChain, SeriesPath};
use crate::stats::{binomial, KahanSum};

/// One B-term of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTerm {
    /// Which `S_k` the term belongs to (`1..=r`).
    pub k: usize,
    /// 0-based times `t₁ < … < t_{r−k+1}` the term depends on.
    pub times: Vec<usize>,
    pub value: f64,
    /// Exact expectation given `X_{t₁},…,X_{t_{r−k}}` (unconditional for
    /// `k = r`).
    pub conditional_mean: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecomposeOptions {
    /// Keep every B-term in the report.
    pub keep_terms: bool,
}

/// `U − θ* = S₁ + … + S_r` for one path of a finite chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub order: usize,
    pub t: usize,
    pub s_terms: Vec<f64>,
    pub u_value: f64,
    pub theta_star: f64,
    /// `U − θ* − Σ S_k`.
    pub residual: f64,
    pub b_term_max_abs: f64,
    /// Largest `|E(B | history)|` over all B-terms.
    pub p1_max_abs: f64,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b_terms: Vec<BTerm>,
}

impl DecompositionReport {
    /// Telescoping check `|residual| ≤ 1e−10·max(1, |U|)`.
    pub fn telescopes(&self) -> bool {
        self.residual.abs() <= 1e-10 * self.u_value.abs().max(1.0)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Decomposes `U − θ*` with every conditional expectation computed exactly.
pub fn decompose(path: &SeriesPath, chain: &FiniteMarkovChain, kernel: &KernelSpec) -> Result<DecompositionReport> {
    decompose_with(path, chain, kernel, DecomposeOptions::default())
}

struct Decomposer<'a> {
    oracle: &'a ConditionalExpectationOracle,
    len: usize,
    order: usize,
}

impl Decomposer<'_> {
    /// `θ̂` given the first `m` states (`m = 0` is `θ`, `m = r` is `h`).
    fn theta_hat(&self, m: usize, states: &[usize], times: &[usize]) -> f64 {
        if m == 0 {
            return self.theta(times);
        }
        let gaps: Vec<usize> = times[m - 1..].windows(2).map(|w| w[1] - w[0]).collect();
        self.oracle.theta_hat(&states[..m], &gaps)
    }

    fn theta(&self, times: &[usize]) -> f64 {
        let gaps: Vec<usize> = times.windows(2).map(|w| w[1] - w[0]).collect();
        self.oracle.theta(&gaps)
    }

    /// `A^{[t₁:t_{r−k}]}` for a full tuple, with the `T^{−(k−1)}` factor.
    fn a_term(&self, k: usize, states: &[usize], times: &[usize]) -> f64 {
        let l = self.order - k + 1;
        let theta = self.theta(times);
        let upper = self.theta_hat(l, states, times) - theta;
        let lower = self.theta_hat(l - 1, states, times) - theta;
        (upper - lower) * (self.len as f64).powi(-(k as i32 - 1))
    }

    /// `B` for prefix times `t₁..t_{r−k+1}`: the sum of A-terms over every
    /// completion `t_{r−k+2} < … < t_r ≤ T`.
    fn b_term(&self, k: usize, prefix_states: &[usize], prefix_times: &[usize]) -> f64 {
        let l = prefix_times.len();
        let mut times = prefix_times.to_vec();
        let mut acc = KahanSum::new();
        for_each_combination(prefix_times[l - 1] + 1, self.len, k - 1, |rest| {
            times.truncate(l);
            times.extend_from_slice(rest);
            acc.add(self.a_term(k, prefix_states, &times));
        });
        acc.total()
    }

    /// Expectation of the B-term over its last state given the earlier ones.
    fn b_conditional_mean(&self, k: usize, prefix_states: &[usize], prefix_times: &[usize]) -> f64 {
        let l = prefix_times.len();
        let chain = self.oracle.chain();
        let weights: Vec<f64> = if l == 1 {
            chain.stationary().to_vec()
        } else {
            chain.power_row(prefix_times[l - 1] - prefix_times[l - 2], prefix_states[l - 2])
        };
        let mut states = prefix_states.to_vec();
        let mut acc = KahanSum::new();
        for (y, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                states[l - 1] = y;
                acc.add(w * self.b_term(k, &states, prefix_times));
            }
        }
        acc.total()
    }
}

/// [`decompose`] with options.
pub fn decompose_with(
    path: &SeriesPath,
    chain: &FiniteMarkovChain,
    kernel: &KernelSpec,
    options: DecomposeOptions,
) -> Result<DecompositionReport> {
    let states = path
        .states()
        .ok_or_else(|| UstatError::ChainMismatch("path is not a state path".into()))?;
    let s = chain.state_count();
    if path.state_count() != Some(s) {
        return Err(UstatError::ChainMismatch(format!(
            "path has {:?} states, chain has {s}",
            path.state_count()
        )));
    }
    if let Some(w) = states.windows(2).find(|w| chain.prob(w[0], w[1]) == 0.0) {
        return Err(UstatError::ChainMismatch(format!(
            "transition {} → {} has probability zero",
            w[0], w[1]
        )));
    }
    if states.first().is_some_and(|&x| chain.stationary()[x] == 0.0) {
        return Err(UstatError::ChainMismatch("initial state has stationary mass zero".into()));
    }
    let r = kernel.order();
    if r < 2 {
        return Err(UstatError::Unsupported("decomposition needs a kernel of order at least 2".into()));
    }
    let len = states.len();
    if len < r {
        return Err(UstatError::TooShort { len, order: r });
    }
    check_feasible(len, r, s)?;

    let oracle = ConditionalExpectationOracle::new(chain, kernel)?;
    let dec = Decomposer {
        oracle: &oracle,
        len,
        order: r,
    };
    let count = binomial(len, r);

    let mut u_acc = KahanSum::new();
    for_each_combination(0, len, r, |t| {
        let x: Vec<usize> = t.iter().map(|&i| states[i]).collect();
        u_acc.add(oracle.kernel_value(&x));
    });
    let u_value = u_acc.total() / count;
    let theta_star = theta_star_with(&oracle, len)?;

    let mut s_terms = Vec::with_capacity(r);
    let mut b_max = 0.0f64;
    let mut p1_max = 0.0f64;
    let mut kept = Vec::new();
    for k in 1..=r {
        let l = r - k + 1;
        let mut acc = KahanSum::new();
        // prefixes t₁ < … < t_l that leave room for k − 1 later indices
        for_each_combination(0, len - (k - 1), l, |prefix| {
            let x: Vec<usize> = prefix.iter().map(|&i| states[i]).collect();
            let b = dec.b_term(k, &x, prefix);
            let mean = dec.b_conditional_mean(k, &x, prefix);
            acc.add(b);
            b_max = b_max.max(b.abs());
            p1_max = p1_max.max(mean.abs());
            if options.keep_terms {
                kept.push(BTerm {
                    k,
                    times: prefix.to_vec(),
                    value: b,
                    conditional_mean: mean,
                });
            }
        });
        s_terms.push((len as f64).powi(k as i32 - 1) / count * acc.total());
    }
    let residual = u_value - theta_star - s_terms.iter().copied().collect::<KahanSum>().total();
    Ok(DecompositionReport {
        order: r,
        t: len,
        s_terms,
        u_value,
        theta_star,
        residual,
        b_term_max_abs: b_max,
        p1_max_abs: p1_max,
        bound: kernel.bound(),
        b_terms: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StateTable;
    use crate::processes::{generate_replication, ProcessKind, ProcessSpec};

    fn agree_kernel() -> KernelSpec {
        let t = StateTable::from_fn(2, 2, |x| if x[0] == x[1] { 0.5 } else { -0.5 }).unwrap();
        KernelSpec::table(t, Some(0.5)).unwrap()
    }

    fn chain_path(chain: &FiniteMarkovChain, len: usize, rep: u64) -> SeriesPath {
        let spec = ProcessSpec::new(
            ProcessKind::MarkovChain {
                chain: chain.clone(),
                start: None,
            },
            17,
        );
        generate_replication(&spec, len, rep).unwrap()
    }

    #[test]
    fn iid_chain_linear_term() {
        let pi = [0.4, 0.6];
        let c = FiniteMarkovChain::iid(pi.to_vec()).unwrap();
        let k = agree_kernel();
        let theta = pi.iter().map(|p| p * p).sum::<f64>() - 0.5;
        for rep in 0..5 {
            let path = chain_path(&c, 15, rep);
            let report = decompose(&path, &c, &k).unwrap();
            assert!(report.telescopes());
            assert!((report.theta_star - theta).abs() < 1e-14);
            // S₂ is the projection term (1/C(T,2)) Σ_{i<j} h₁(X_i)
            let states = path.states().unwrap();
            let projection: f64 = states
                .iter()
                .enumerate()
                .map(|(i, &x)| (15 - 1 - i) as f64 * (pi[x] - 0.5 - theta))
                .sum::<f64>()
                / binomial(15, 2);
            assert!((report.s_terms[1] - projection).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_chain_properties() {
        let c = FiniteMarkovChain::symmetric_two_state(0.25).unwrap();
        let k = agree_kernel();
        let rep = decompose(&chain_path(&c, 20, 0), &c, &k).unwrap();
        assert!(rep.telescopes(), "residual {}", rep.residual);
        assert!(rep.p1_max_abs < 1e-10);
        assert!(rep.b_term_max_abs <= 2.0 * k.bound());
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["s_terms"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn order_three_telescopes() {
        let mut rng = crate::rng::stream_rng(4, 0, 0);
        let c = FiniteMarkovChain::random(3, &mut rng).unwrap();
        let t = StateTable::from_fn(3, 3, |x| ((x[0] * x[1] + x[2]) % 3) as f64 - 1.0).unwrap();
        let k = KernelSpec::table(t, None).unwrap();
        let rep = decompose_with(&chain_path(&c, 12, 3), &c, &k, DecomposeOptions { keep_terms: true }).unwrap();
        assert!(rep.telescopes(), "residual {}", rep.residual);
        assert!(rep.p1_max_abs < 1e-10);
        assert!(rep.b_term_max_abs <= 2.0 * k.bound());
        // C(12,3) + C(11,2) + C(10,1) prefixes
        assert_eq!(rep.b_terms.len(), 220 + 55 + 10);
    }

    #[test]
    fn mismatched_path_rejected() {
        let c = FiniteMarkovChain::symmetric_two_state(1.0).unwrap();
        let k = agree_kernel();
        let p = SeriesPath::from_states(2, vec![0, 0, 1]).unwrap();
        assert!(matches!(decompose(&p, &c, &k), Err(UstatError::ChainMismatch(_))));
        let real = SeriesPath::from_values(vec![0.0, 1.0]);
        assert!(decompose(&real, &c, &k).is_err());
    }
}
