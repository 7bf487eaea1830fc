//! Exact mixing coefficients against brute-force joint-law enumeration.

use depu::mixing::{alpha_coeff, conditional_phi_coeff, Observation};
use depu::processes::FiniteMarkovChain;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn row_power(chain: &FiniteMarkovChain, from: usize, n: usize) -> Vec<f64> {
    let s = chain.state_count();
    let mut mu = vec![0.0; s];
    mu[from] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; s];
        for (i, &m) in mu.iter().enumerate() {
            for (j, v) in next.iter_mut().enumerate() {
                *v += m * chain.prob(i, j);
            }
        }
        mu = next;
    }
    mu
}

/// All state sequences of length `len` over `s` states, in lexicographic order.
fn sequences(s: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|seq| {
                (0..s).map(move |x| {
                    let mut next = seq.clone();
                    next.push(x);
                    next
                })
            })
            .collect();
    }
    out
}

/// φ of the conditional law between the past block `X_{t_J+1..t_J+j}` and
/// the future block `X_{t_J+j+n .. t_J+j+n+horizon-1}`, computed from the
/// joint law of whole paths started at time 0 from stationarity.
///
/// For φ the supremum over past events is attained at atoms of the past
/// block, so it suffices to compare the future law given each atom with the
/// unconditional future law.
fn brute_conditional_phi(
    chain: &FiniteMarkovChain,
    conditioning: &[Observation],
    gap: usize,
    n: usize,
    horizon: usize,
) -> f64 {
    let s = chain.state_count();
    let t_j = conditioning.last().unwrap().time;
    let len = t_j + gap + n + horizon;
    let mut joint: Vec<(Vec<usize>, Vec<usize>, f64)> = Vec::new();
    for path in sequences(s, len) {
        if conditioning.iter().any(|o| path[o.time] != o.state) {
            continue;
        }
        let mut p = chain.stationary()[path[0]];
        for w in path.windows(2) {
            p *= chain.prob(w[0], w[1]);
        }
        if p == 0.0 {
            continue;
        }
        let past = path[t_j + 1..=t_j + gap].to_vec();
        let future = path[t_j + gap + n..].to_vec();
        joint.push((past, future, p));
    }
    let total: f64 = joint.iter().map(|j| j.2).sum();
    let futures = sequences(s, horizon);
    let index = |f: &[usize]| f.iter().fold(0, |acc, &x| acc * s + x);
    let mut marginal = vec![0.0; futures.len()];
    for (_, f, p) in &joint {
        marginal[index(f)] += p / total;
    }
    let mut best = 0.0f64;
    for atom in sequences(s, gap) {
        let mut cond = vec![0.0; futures.len()];
        let mut mass = 0.0;
        for (past, f, p) in &joint {
            if *past == atom {
                cond[index(f)] += p;
                mass += p;
            }
        }
        if mass == 0.0 {
            continue;
        }
        let tv: f64 = cond.iter().zip(&marginal).map(|(c, m)| (c / mass - m).abs()).sum::<f64>() / 2.0;
        best = best.max(tv);
    }
    best
}

#[test]
fn conditional_phi_matches_joint_law_for_every_horizon() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for s in [2, 3] {
        for _ in 0..3 {
            let chain = FiniteMarkovChain::random(s, &mut rng).unwrap();
            let conditioning = [Observation { time: 0, state: 0 }, Observation { time: 2, state: s - 1 }];
            for gap in 1..=2 {
                for n in 1..=2 {
                    let fast = conditional_phi_coeff(&chain, &conditioning, gap, n).unwrap();
                    for horizon in 1..=3 {
                        let brute = brute_conditional_phi(&chain, &conditioning, gap, n, horizon);
                        assert!(
                            (fast - brute).abs() <= 1e-12,
                            "s={s} gap={gap} n={n} H={horizon}: {fast} vs {brute}"
                        );
                    }
                }
            }
        }
    }
}

fn brute_alpha(chain: &FiniteMarkovChain, n: usize) -> f64 {
    let s = chain.state_count();
    let pi = chain.stationary();
    let rows: Vec<Vec<f64>> = (0..s).map(|i| row_power(chain, i, n)).collect();
    let mut best = 0.0f64;
    for a in 0u32..(1 << s) {
        for b in 0u32..(1 << s) {
            let in_a = |i: usize| a >> i & 1 == 1;
            let in_b = |j: usize| b >> j & 1 == 1;
            let joint: f64 = (0..s)
                .filter(|&i| in_a(i))
                .map(|i| (0..s).filter(|&j| in_b(j)).map(|j| pi[i] * rows[i][j]).sum::<f64>())
                .sum();
            let pa: f64 = (0..s).filter(|&i| in_a(i)).map(|i| pi[i]).sum();
            let pb: f64 = (0..s).filter(|&j| in_b(j)).map(|j| pi[j]).sum();
            best = best.max((joint - pa * pb).abs());
        }
    }
    best
}

#[test]
fn alpha_matches_full_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in 2..=5 {
        for _ in 0..4 {
            let chain = FiniteMarkovChain::random(s, &mut rng).unwrap();
            for n in 1..=4 {
                let fast = alpha_coeff(&chain, n).unwrap();
                let brute = brute_alpha(&chain, n);
                assert!((fast - brute).abs() <= 1e-12, "s={s} n={n}: {fast} vs {brute}");
            }
        }
    }
}

#[test]
fn flip_chain_alpha_is_a_quarter_of_the_eigenvalue_power() {
    // π = (1/2, 1/2), second eigenvalue 1 − 2q; α(n) = |λⁿ|/4 at A = B = {0}.
    let chain = FiniteMarkovChain::symmetric_two_state(0.25).unwrap();
    for n in 1..=6 {
        let expected = 0.5f64.powi(n as i32) / 4.0;
        assert!((alpha_coeff(&chain, n).unwrap() - expected).abs() < 1e-15);
    }
}
