use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{check_size, Result, UstatError};
use crate::kernels::KernelSpec;
use crate::processes::FiniteMarkovChain;
use crate::stats::{binomial, KahanSum};

type StateFn = Arc<dyn Fn(&[usize]) -> f64 + Send + Sync>;

/// The kernel as a function of chain states: table kernels read their
/// table, other kernels see the chain's state values (or the state index
/// as a one-dimensional point when the chain has none).
pub fn state_kernel(chain: &FiniteMarkovChain, kernel: &KernelSpec) -> Result<StateFn> {
    let s = chain.state_count();
    if let Some(table) = kernel.as_table() {
        if table.state_count() < s {
            return Err(UstatError::ChainMismatch(format!(
                "kernel table covers {} states, chain has {s}",
                table.state_count()
            )));
        }
        let k = kernel.clone();
        return Ok(Arc::new(move |states: &[usize]| k.eval_states(states)));
    }
    let points: Vec<Vec<f64>> = match chain.state_values() {
        Some(v) => v.to_vec(),
        None => (0..s).map(|i| vec![i as f64]).collect(),
    };
    kernel.check_point_dim(points[0].len())?;
    let k = kernel.clone();
    Ok(Arc::new(move |states: &[usize]| {
        let refs: Vec<&[f64]> = states.iter().map(|&i| points[i].as_slice()).collect();
        k.eval_unchecked(&refs)
    }))
}

/// Exact conditional expectations
/// `E[h(X_{t₁},…,X_{t_r}) | X_{t₁},…,X_{t_m}]` for a stationary finite chain.
///
/// By time homogeneity the value depends only on the observed states and
/// the gaps `t_{m+1}−t_m, …, t_r−t_{r−1}`, which form the cache key. The
/// cache is safe for concurrent use.
pub struct ConditionalExpectationOracle {
    chain: FiniteMarkovChain,
    order: usize,
    bound: f64,
    h: StateFn,
    cache: RwLock<HashMap<(Vec<usize>, Vec<usize>), f64>>,
}

impl ConditionalExpectationOracle {
    pub fn new(chain: &FiniteMarkovChain, kernel: &KernelSpec) -> Result<Self> {
        Ok(Self {
            h: state_kernel(chain, kernel)?,
            chain: chain.clone(),
            order: kernel.order(),
            bound: kernel.bound(),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn chain(&self) -> &FiniteMarkovChain {
        &self.chain
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().expect("oracle cache poisoned").len()
    }

    /// `h` at the given states.
    pub fn kernel_value(&self, states: &[usize]) -> f64 {
        (self.h)(states)
    }

    /// Conditional expectation given the first `prefix.len()` states, where
    /// `gaps` are the time gaps of the remaining indices.
    ///
    /// # Panics
    /// If `prefix` is empty or `prefix.len() + gaps.len()` differs from the
    /// kernel order.
    pub fn theta_hat(&self, prefix: &[usize], gaps: &[usize]) -> f64 {
        assert!(!prefix.is_empty() && prefix.len() + gaps.len() == self.order);
        if gaps.is_empty() {
            return (self.h)(prefix);
        }
        let key = (prefix.to_vec(), gaps.to_vec());
        if let Some(&v) = self.cache.read().expect("oracle cache poisoned").get(&key) {
            return v;
        }
        let last = *prefix.last().unwrap();
        let step = self.chain.power(gaps[0]);
        let mut next = prefix.to_vec();
        next.push(0);
        let mut acc = KahanSum::new();
        for y in 0..self.chain.state_count() {
            let p = step[(last, y)];
            if p > 0.0 {
                *next.last_mut().unwrap() = y;
                acc.add(p * self.theta_hat(&next, &gaps[1..]));
            }
        }
        let v = acc.total();
        self.cache.write().expect("oracle cache poisoned").insert(key, v);
        v
    }

    /// Unconditional expectation `θ_{[t₁:t_r]}` for the gap vector of the
    /// tuple (length `r − 1`).
    pub fn theta(&self, gaps: &[usize]) -> f64 {
        assert_eq!(gaps.len() + 1, self.order);
        let pi = self.chain.stationary();
        let mut acc = KahanSum::new();
        for (x, &p) in pi.iter().enumerate() {
            if p > 0.0 {
                acc.add(p * self.theta_hat(&[x], gaps));
            }
        }
        acc.total()
    }
}

/// Visits every gap vector of length `len` with positive entries summing to
/// at most `max_total`.
fn for_each_gap_vector(len: usize, max_total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, len: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() == len {
            f(buf);
            return;
        }
        let slots_left = len - buf.len() - 1;
        for g in 1..=remaining.saturating_sub(slots_left) {
            buf.push(g);
            rec(buf, len, remaining - g, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(len), len, max_total, f);
}

pub(super) fn check_feasible(len: usize, order: usize, states: usize) -> Result<()> {
    check_size(binomial(len, order) * (states as f64).powi(order as i32))
}

/// `θ*(h) = C(T,r)⁻¹ Σ_{t₁<…<t_r} E h(X_{t₁},…,X_{t_r})` for the stationary
/// chain, exact. Tuples sharing a gap vector `g` have the same expectation
/// and there are `T − Σg` of them.
pub fn theta_star(chain: &FiniteMarkovChain, kernel: &KernelSpec, len: usize) -> Result<f64> {
    let oracle = ConditionalExpectationOracle::new(chain, kernel)?;
    theta_star_with(&oracle, len)
}

pub(super) fn theta_star_with(oracle: &ConditionalExpectationOracle, len: usize) -> Result<f64> {
    let r = oracle.order();
    if len < r {
        return Err(UstatError::TooShort { len, order: r });
    }
    check_feasible(len, r, oracle.chain().state_count())?;
    let mut acc = KahanSum::new();
    for_each_gap_vector(r - 1, len - 1, &mut |gaps| {
        let span: usize = gaps.iter().sum();
        acc.add((len - span) as f64 * oracle.theta(gaps));
    });
    Ok(acc.total() / binomial(len, r))
}

/// `θ(h)` under the product of stationary marginals of the chain.
pub fn theta_independent(chain: &FiniteMarkovChain, kernel: &KernelSpec) -> Result<f64> {
    let h = state_kernel(chain, kernel)?;
    Ok(product_expectation(chain.stationary(), kernel.order(), &*h))
}

/// `θ(h)` for `r` iid draws from `marginal` on states `0..marginal.len()`.
pub fn theta_independent_marginal(marginal: &[f64], kernel: &KernelSpec) -> Result<f64> {
    let chain = FiniteMarkovChain::iid(marginal.to_vec())?;
    theta_independent(&chain, kernel)
}

fn product_expectation(pi: &[f64], order: usize, h: &dyn Fn(&[usize]) -> f64) -> f64 {
    let s = pi.len();
    let mut states = vec![0usize; order];
    let mut acc = KahanSum::new();
    loop {
        let w: f64 = states.iter().map(|&x| pi[x]).product();
        if w > 0.0 {
            acc.add(w * h(&states));
        }
        let mut i = 0;
        loop {
            if i == order {
                return acc.total();
            }
            states[i] += 1;
            if states[i] < s {
                break;
            }
            states[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StateTable;

    fn agree_kernel() -> KernelSpec {
        let t = StateTable::from_fn(2, 2, |x| if x[0] == x[1] { 0.5 } else { -0.5 }).unwrap();
        KernelSpec::table(t, Some(0.5)).unwrap()
    }

    #[test]
    fn gap_vectors_count_tuples() {
        for (t, r) in [(7usize, 2usize), (9, 3), (6, 4)] {
            let mut tuples = 0usize;
            for_each_gap_vector(r - 1, t - 1, &mut |g| tuples += t - g.iter().sum::<usize>());
            assert_eq!(tuples as f64, binomial(t, r));
        }
    }

    #[test]
    fn iid_chain_theta_star_equals_theta() {
        let c = FiniteMarkovChain::iid(vec![0.3, 0.7]).unwrap();
        let k = agree_kernel();
        let a = theta_star(&c, &k, 12).unwrap();
        let b = theta_independent(&c, &k).unwrap();
        assert!((a - b).abs() < 1e-15);
        // 0.5·(0.09 + 0.49) − 0.5·0.42
        assert!((b - 0.08).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel() {
        let c = FiniteMarkovChain::random(3, &mut crate::rng::stream_rng(1, 0, 0)).unwrap();
        let k = KernelSpec::constant(3, -0.25).unwrap();
        assert!((theta_star(&c, &k, 15).unwrap() + 0.25).abs() < 1e-15);
        assert!((theta_independent(&c, &k).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn flip_chain_agreement_kernel() {
        let c = FiniteMarkovChain::symmetric_two_state(0.25).unwrap();
        let k = agree_kernel();
        assert!(theta_independent(&c, &k).unwrap().abs() < 1e-15);
        // E h(X_t, X_{t+g}) = 0.5·(1/2)^g, averaged over the 45 pairs
        let expected: f64 = (1..10).map(|g| (10 - g) as f64 * 0.5 * 0.5f64.powi(g)).sum::<f64>() / 45.0;
        assert!((theta_star(&c, &k, 10).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn oracle_values_are_bounded_and_cached() {
        let c = FiniteMarkovChain::random(3, &mut crate::rng::stream_rng(2, 0, 0)).unwrap();
        let t = StateTable::from_fn(3, 3, |x| ((x[0] + 2 * x[1] + 3 * x[2]) % 5) as f64 / 4.0 - 0.5).unwrap();
        let k = KernelSpec::table(t, None).unwrap();
        let o = ConditionalExpectationOracle::new(&c, &k).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!(o.theta_hat(&[a, b], &[2]).abs() <= k.bound());
                assert!(o.theta_hat(&[a], &[1, 3]).abs() <= k.bound());
            }
        }
        let n = o.cached_entries();
        o.theta_hat(&[1], &[1, 3]);
        assert_eq!(o.cached_entries(), n);
    }

    #[test]
    fn infeasible_sizes_rejected() {
        let c = FiniteMarkovChain::random(16, &mut crate::rng::stream_rng(3, 0, 0)).unwrap();
        let t = StateTable::from_fn(16, 3, |_| 0.0).unwrap();
        let k = KernelSpec::table(t, Some(1.0)).unwrap();
        assert!(matches!(theta_star(&c, &k, 400), Err(UstatError::TooLarge { .. })));
    }
}
