use serde::{Deserialize, Serialize};

use super::{Result, UstatError};
use crate::kernels::sign;
use crate::processes::SeriesPath;
use crate::stats::binomial;

/// Pair counts behind Kendall's τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KendallCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in at least one coordinate.
    pub tied: u64,
}

impl KendallCounts {
    pub fn pairs(&self) -> u64 {
        self.concordant + self.discordant + self.tied
    }

    /// `(C − D) / C(T, 2)`, the U-statistic of the sign-product kernel.
    pub fn tau(&self) -> f64 {
        (self.concordant as f64 - self.discordant as f64) / self.pairs() as f64
    }
}

fn has_ties(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}

/// Counts inversions of `v` by merge sort.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Quadratic pair counting with `sign(0) = 0`.
pub fn kendall_counts_brute(x: &[f64], y: &[f64]) -> KendallCounts {
    let mut c = KendallCounts {
        concordant: 0,
        discordant: 0,
        tied: 0,
    };
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let s = sign(x[i] - x[j]) * sign(y[i] - y[j]);
            if s > 0.0 {
                c.concordant += 1;
            } else if s < 0.0 {
                c.discordant += 1;
            } else {
                c.tied += 1;
            }
        }
    }
    c
}

/// Concordant/discordant pair counts: `O(T log T)` without ties, exact
/// quadratic counting otherwise.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    assert_eq!(x.len(), y.len());
    if has_ties(x) || has_ties(y) {
        return kendall_counts_brute(x, y);
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let pairs = (n as u64) * (n as u64).saturating_sub(1) / 2;
    KendallCounts {
        concordant: pairs - discordant,
        discordant,
        tied: 0,
    }
}

fn check_bivariate(path: &SeriesPath, min_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if path.dim() != 2 || path.is_states() {
        return Err(UstatError::Dimension {
            expected: 2,
            got: path.dim(),
        });
    }
    if path.len() < min_len {
        return Err(UstatError::TooShort {
            len: path.len(),
            order: min_len,
        });
    }
    Ok((path.column(0), path.column(1)))
}

/// Kendall's τ of two columns; equals the sign-product U-statistic exactly.
pub fn kendall_tau_columns(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(UstatError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(UstatError::TooShort { len: x.len(), order: 2 });
    }
    let c = kendall_counts(x, y);
    Ok((c.concordant as f64 - c.discordant as f64) / binomial(x.len(), 2))
}

/// Kendall's τ of a bivariate path.
pub fn kendall_tau(path: &SeriesPath) -> Result<f64> {
    let (x, y) = check_bivariate(path, 2)?;
    kendall_tau_columns(&x, &y)
}

/// Ranks `1..=T` of distinct values; `None` if any two values tie.
pub fn ranks(v: &[f64]) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    if order.windows(2).any(|w| v[w[0]] == v[w[1]]) {
        return None;
    }
    let mut r = vec![0; v.len()];
    for (rank, &i) in order.iter().enumerate() {
        r[i] = rank + 1;
    }
    Some(r)
}

/// Spearman's ρ together with the order-3 U-statistic ρ₃ and Kendall's τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub rho3: f64,
    pub tau: f64,
}

impl SpearmanResult {
    /// `ρ − ((T−2)/(T+1))·ρ₃ − 3τ/(T+1)`.
    pub fn identity_residual(&self, len: usize) -> f64 {
        let t = len as f64;
        self.rho - (t - 2.0) / (t + 1.0) * self.rho3 - 3.0 * self.tau / (t + 1.0)
    }
}

/// Spearman statistics of two tie-free columns.
///
/// `ρ = 1 − 6Σd²/(T(T²−1))` from rank differences. `ρ₃` uses
/// `Σ_{i,j,k distinct} sign(x_i−x_j)·sign(y_i−y_k) = Σ_i a_i b_i − T(T−1)τ`
/// with `a_i = 2R_x(i) − T − 1` (and likewise `b_i`), so it costs one sort.
pub fn spearman_columns(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(UstatError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(UstatError::TooShort { len: n, order: 3 });
    }
    let rx = ranks(x).ok_or(UstatError::Ties(0))?;
    let ry = ranks(y).ok_or(UstatError::Ties(1))?;
    let t = n as i128;
    let rho = spearman_from_ranks(&rx, &ry);
    let ab: i128 = rx
        .iter()
        .zip(&ry)
        .map(|(&a, &b)| (2 * a as i128 - t - 1) * (2 * b as i128 - t - 1))
        .sum();
    let counts = kendall_counts(x, y);
    let c_minus_d = counts.concordant as i128 - counts.discordant as i128;
    let tau = c_minus_d as f64 / binomial(n, 2);
    // Σ over distinct triples, with T(T−1)τ = 2(C − D)
    let distinct = ab - 2 * c_minus_d;
    let rho3 = 3.0 * distinct as f64 / (t * (t - 1) * (t - 2)) as f64;
    Ok(SpearmanResult { rho, rho3, tau })
}

/// `1 − 6Σd²/(T(T²−1))` for two rank vectors of the same length.
pub fn spearman_from_ranks(rx: &[usize], ry: &[usize]) -> f64 {
    let t = rx.len() as i128;
    let d2: i128 = rx.iter().zip(ry).map(|(&a, &b)| (a as i128 - b as i128).pow(2)).sum();
    (1.0 - 6.0 * d2 as f64 / (t * (t * t - 1)) as f64).clamp(-1.0, 1.0)
}

/// Spearman statistics of a bivariate path; ties are rejected.
pub fn spearman_rho(path: &SeriesPath) -> Result<SpearmanResult> {
    let (x, y) = check_bivariate(path, 3)?;
    spearman_columns(&x, &y)
}
