//! U-statistic evaluation, rank-based fast paths, the permutation
//! (decoupling) average and exact expectations on finite chains.

mod decompose;
mod expectation;
mod rank;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{CustomKernel, KernelError, KernelKind, KernelSpec};
use crate::processes::{sample_stationary_marginal, ProcessError, ProcessKind, SeriesPath};
use crate::stats::{binomial, KahanSum};

pub use decompose::{decompose, decompose_with, BTerm, DecomposeOptions, DecompositionReport};
pub use expectation::{
    state_kernel, theta_independent, theta_independent_marginal, theta_star, ConditionalExpectationOracle,
};
pub use rank::{
    kendall_counts, kendall_counts_brute, kendall_tau, kendall_tau_columns, ranks, spearman_columns, spearman_from_ranks, spearman_rho,
    KendallCounts, SpearmanResult,
};

/// Largest number of index tuples enumerated by one evaluation.
pub const MAX_TUPLES: f64 = 1e8;
/// Largest path length for which all `T!` permutations may be requested.
pub const MAX_ALL_PERMUTATIONS_T: usize = 8;

#[derive(Debug, Error)]
pub enum UstatError {
    #[error("path length {len} is shorter than the kernel order {order}")]
    TooShort { len: usize, order: usize },
    #[error("{count:.3e} index tuples exceed the limit of {limit:.0e}")]
    TooLarge { count: f64, limit: f64 },
    #[error("ties present in coordinate {0}")]
    Ties(usize),
    #[error("expected a {expected}-dimensional path, got dimension {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("path does not match the chain: {0}")]
    ChainMismatch(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

pub type Result<T> = std::result::Result<T, UstatError>;

/// Row-major points of dimension `dim`, borrowed from a path.
struct Points<'a> {
    dim: usize,
    values: std::borrow::Cow<'a, [f64]>,
}

impl Points<'_> {
    #[inline]
    fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }
}

fn checked_points<'a>(path: &'a SeriesPath, kernel: &KernelSpec) -> Result<Points<'a>> {
    let len = path.len();
    if len < kernel.order() {
        return Err(UstatError::TooShort {
            len,
            order: kernel.order(),
        });
    }
    kernel.check_point_dim(path.dim())?;
    let values = path.real_values();
    if let Some(table) = kernel.as_table() {
        let s = table.state_count();
        if let Some(&v) = values.iter().find(|&&v| v < 0.0 || v.fract() != 0.0 || v >= s as f64) {
            return Err(KernelError::InvalidState { value: v, state_count: s }.into());
        }
    }
    Ok(Points { dim: path.dim(), values })
}

fn is_function_kernel(kernel: &KernelSpec) -> bool {
    matches!(kernel.kind(), KernelKind::BoundedCustom(CustomKernel::Function { .. }))
}

fn check_size(count: f64) -> Result<()> {
    if count > MAX_TUPLES {
        Err(UstatError::TooLarge {
            count,
            limit: MAX_TUPLES,
        })
    } else {
        Ok(())
    }
}

/// Calls `f` on every increasing `k`-tuple drawn from `lo..hi`, in
/// lexicographic order.
pub(crate) fn for_each_combination(lo: usize, hi: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    if hi < lo || hi - lo < k {
        return;
    }
    let mut idx: Vec<usize> = (lo..lo + k).collect();
    loop {
        f(&idx);
        // advance the rightmost index that still has room
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < hi - (k - i) {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `C(T, r)⁻¹ Σ_{t₁<…<t_r} h(X_{t₁}, …, X_{t_r})`.
///
/// Partial sums are formed per first index (in parallel) and merged in index
/// order, so the result does not depend on the thread count.
pub fn u_statistic(path: &SeriesPath, kernel: &KernelSpec) -> Result<f64> {
    let points = checked_points(path, kernel)?;
    let t = path.len();
    let r = kernel.order();
    let count = binomial(t, r);
    check_size(count)?;
    let check_bound = is_function_kernel(kernel);
    let bound = kernel.bound() * (1.0 + 1e-12);
    let partials: Vec<std::result::Result<KahanSum, f64>> = (0..=t - r)
        .into_par_iter()
        .map(|first| {
            let mut acc = KahanSum::new();
            let mut rows: Vec<&[f64]> = Vec::with_capacity(r);
            let mut bad = None;
            for_each_combination(first + 1, t, r - 1, |rest| {
                rows.clear();
                rows.push(points.row(first));
                rows.extend(rest.iter().map(|&i| points.row(i)));
                let v = kernel.eval_unchecked(&rows);
                if check_bound && !(v.abs() <= bound) {
                    bad.get_or_insert(v);
                }
                acc.add(v);
            });
            match bad {
                Some(v) => Err(v),
                None => Ok(acc),
            }
        })
        .collect();
    let mut total = KahanSum::new();
    for p in partials {
        match p {
            Ok(acc) => total.merge(&acc),
            Err(value) => {
                return Err(KernelError::BoundExceeded {
                    value,
                    bound: kernel.bound(),
                }
                .into())
            }
        }
    }
    Ok(total.total() / count)
}

/// Which permutations of `0..T` to average over.
#[derive(Debug, Clone, PartialEq)]
pub enum Permutations {
    /// All `T!` permutations; requires `T ≤ 8`.
    All,
    /// Explicit 0-based permutations.
    Explicit(Vec<Vec<usize>>),
    /// `count` uniformly random permutations from the given seed.
    Random { count: usize, seed: u64 },
}

fn check_permutation(p: &[usize], t: usize) -> Result<()> {
    if p.len() != t {
        return Err(UstatError::InvalidPermutation(format!(
            "length {} for a path of length {t}",
            p.len()
        )));
    }
    let mut seen = vec![false; t];
    for &i in p {
        if i >= t || std::mem::replace(&mut seen[i], true) {
            return Err(UstatError::InvalidPermutation(format!("{p:?} is not a bijection of 0..{t}")));
        }
    }
    Ok(())
}

/// Average over permutations `σ` of the mean of `h` over the `⌊T/r⌋`
/// consecutive non-overlapping blocks of `σ(0..T)`. Over all permutations
/// this is exactly the U-statistic.
pub fn hoeffding_decoupling_average(path: &SeriesPath, kernel: &KernelSpec, permutations: &Permutations) -> Result<f64> {
    let points = checked_points(path, kernel)?;
    let t = path.len();
    let r = kernel.order();
    let blocks = t / r;
    let block_mean = |perm: &[usize]| -> f64 {
        let mut rows: Vec<&[f64]> = Vec::with_capacity(r);
        let acc: KahanSum = perm
            .chunks_exact(r)
            .map(|chunk| {
                rows.clear();
                rows.extend(chunk.iter().map(|&i| points.row(i)));
                kernel.eval_unchecked(&rows)
            })
            .collect();
        acc.total() / blocks as f64
    };
    let perms: Vec<Vec<usize>> = match permutations {
        Permutations::All => {
            if t > MAX_ALL_PERMUTATIONS_T {
                return Err(UstatError::TooLarge {
                    count: (1..=t).map(|i| i as f64).product(),
                    limit: (1..=MAX_ALL_PERMUTATIONS_T).map(|i| i as f64).product(),
                });
            }
            crate::kernels::permutations(t)
        }
        Permutations::Explicit(list) => {
            if list.is_empty() {
                return Err(UstatError::InvalidPermutation("no permutations given".into()));
            }
            for p in list {
                check_permutation(p, t)?;
            }
            list.clone()
        }
        Permutations::Random { count, seed } => {
            if *count == 0 {
                return Err(UstatError::InvalidPermutation("no permutations requested".into()));
            }
            let mut rng = crate::rng::stream_rng(*seed, 0, crate::rng::streams::FUZZ);
            (0..*count)
                .map(|_| {
                    let mut p: Vec<usize> = (0..t).collect();
                    rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
                    p
                })
                .collect()
        }
    };
    let means: Vec<f64> = perms.par_iter().map(|p| block_mean(p)).collect();
    Ok(means.into_iter().collect::<KahanSum>().total() / perms.len() as f64)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `θ(h)` under the product of stationary marginals, estimated from
/// `draws` independent `r`-tuples.
pub fn theta_independent_mc<R: Rng + ?Sized>(
    kind: &ProcessKind,
    kernel: &KernelSpec,
    draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if draws < 2 {
        return Err(UstatError::Unsupported("at least two draws are needed".into()));
    }
    let dim = kind.dim();
    kernel.check_point_dim(dim)?;
    let r = kernel.order();
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let rows = sample_stationary_marginal(kind, r, rng)?;
        let refs: Vec<&[f64]> = rows.chunks(dim).collect();
        values.push(kernel.eval(&refs)?);
    }
    let (value, stderr) = crate::stats::mean_stderr(&values);
    Ok(Estimate { value, stderr })
}
