//! U-statistic expectations and process dependence structure against
//! independent oracles.

use std::collections::HashMap;

use depu::kernels::{KernelSpec, StateTable};
use depu::processes::{
    generate_replication, m_dependent_from_iid, FiniteMarkovChain, ProcessKind, ProcessSpec, SeriesPath,
};
use depu::ustat::{theta_independent, theta_star, u_statistic};
use rayon::prelude::*;

fn agree_kernel() -> KernelSpec {
    let table = StateTable::from_fn(2, 2, |s| if s[0] == s[1] { 1.0 } else { -1.0 }).unwrap();
    KernelSpec::table(table, Some(1.0)).unwrap()
}

#[test]
fn theta_star_is_the_mean_of_u_over_stationary_paths() {
    let chain = FiniteMarkovChain::two_state(0.3, 0.2).unwrap();
    let kernel = agree_kernel();
    let len = 12;
    let exact = theta_star(&chain, &kernel, len).unwrap();
    let spec = ProcessSpec::new(ProcessKind::MarkovChain { chain, start: None }, 77);
    let n = 40_000u64;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|rep| u_statistic(&generate_replication(&spec, len, rep).unwrap(), &kernel).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "MC {mean} ± {se} vs exact {exact}");
}

#[test]
fn theta_star_of_order_three_kernel_matches_path_enumeration() {
    let chain = FiniteMarkovChain::new(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2]]).unwrap();
    let table = StateTable::from_fn(3, 3, |s| {
        let mut v = s.to_vec();
        v.sort_unstable();
        ((v[0] + 2 * v[1] + 3 * v[2]) % 5) as f64 / 4.0 - 0.5
    })
    .unwrap();
    let kernel = KernelSpec::table(table, Some(1.0)).unwrap();
    let len = 6;
    let pi = chain.stationary().to_vec();
    let mut expected = 0.0;
    for code in 0..3usize.pow(len as u32) {
        let states: Vec<usize> = (0..len).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let mut p = pi[states[0]];
        for w in states.windows(2) {
            p *= chain.prob(w[0], w[1]);
        }
        let path = SeriesPath::from_states(3, states).unwrap();
        expected += p * u_statistic(&path, &kernel).unwrap();
    }
    let exact = theta_star(&chain, &kernel, len).unwrap();
    assert!((exact - expected).abs() < 1e-13, "{exact} vs {expected}");
}

#[test]
fn iid_chain_has_no_bias() {
    let chain = FiniteMarkovChain::iid(vec![0.2, 0.8]).unwrap();
    let kernel = agree_kernel();
    let theta = theta_independent(&chain, &kernel).unwrap();
    for len in [2, 5, 30] {
        assert!((theta_star(&chain, &kernel, len).unwrap() - theta).abs() < 1e-14);
    }
}

/// Exact joint law of `(Y_a, Y_b)` for `Y = m_dependent_from_iid(ε, m, f)`
/// with `ε` iid uniform on `{0, 1}`, by enumerating every base sequence.
fn joint_law(m: usize, a: usize, b: usize) -> HashMap<(u64, u64), f64> {
    let base_len = b + m + 1;
    let weight = 0.5f64.powi(base_len as i32);
    let mut law = HashMap::new();
    for code in 0..1u32 << base_len {
        let base = SeriesPath::from_values((0..base_len).map(|i| (code >> i & 1) as f64).collect());
        let y = m_dependent_from_iid(&base, m, |w| {
            w.iter().enumerate().map(|(k, x)| (k + 1) as f64 * x).sum::<f64>() + w[0] * w[m]
        })
        .unwrap();
        let v = y.real_values();
        *law.entry((v[a].to_bits(), v[b].to_bits())).or_insert(0.0) += weight;
    }
    law
}

fn max_dependence(law: &HashMap<(u64, u64), f64>) -> f64 {
    let mut left: HashMap<u64, f64> = HashMap::new();
    let mut right: HashMap<u64, f64> = HashMap::new();
    for (&(x, y), &p) in law {
        *left.entry(x).or_insert(0.0) += p;
        *right.entry(y).or_insert(0.0) += p;
    }
    let mut worst = 0.0f64;
    for (x, px) in &left {
        for (y, py) in &right {
            let pxy = law.get(&(*x, *y)).copied().unwrap_or(0.0);
            worst = worst.max((pxy - px * py).abs());
        }
    }
    worst
}

#[test]
fn m_dependent_coordinates_beyond_the_window_are_independent() {
    for m in 1..=3 {
        assert!(max_dependence(&joint_law(m, 0, m + 1)) < 1e-15, "m={m}");
        assert!(max_dependence(&joint_law(m, 1, m + 3)) < 1e-15, "m={m}");
        assert!(max_dependence(&joint_law(m, 0, m)) > 1e-3, "m={m}");
    }
}

#[test]
fn m_dependent_process_has_triangular_autocorrelation() {
    let window = 2;
    let spec = ProcessSpec::new(ProcessKind::MDependent { window, dim: 1 }, 3);
    let len = 200_000;
    let x = generate_replication(&spec, len, 0).unwrap().real_values().into_owned();
    let mean = x.iter().sum::<f64>() / len as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64;
    let tol = 5.0 / (len as f64).sqrt();
    for lag in 1..=window + 2 {
        let cov = (0..len - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / (len - lag) as f64;
        let expected = (window + 1).saturating_sub(lag) as f64 / (window + 1) as f64;
        assert!((cov / var - expected).abs() < tol, "lag {lag}: {} vs {expected}", cov / var);
    }
}
