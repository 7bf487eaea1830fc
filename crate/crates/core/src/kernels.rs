//! Bounded symmetric kernels of order `r`.
//!
//! A kernel maps `r` data points to a real number bounded by `M` in
//! absolute value and is invariant under permutations of its arguments.
//! Points are passed as slices of coordinates; rank kernels use
//! two-dimensional points, table kernels one-dimensional points holding a
//! state index.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel of order {expected} received {got} points")]
    Arity { expected: usize, got: usize },
    #[error("kernel expects {expected}-dimensional points, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("value {value} is not a state index of a table over {state_count} states")]
    InvalidState { value: f64, state_count: usize },
    #[error("kernel value {value} exceeds the declared bound {bound}")]
    BoundExceeded { value: f64, bound: f64 },
    #[error("invalid kernel: {0}")]
    Invalid(String),
    #[error("cannot read kernel table {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Largest order accepted by [`symmetrize`] (it averages over `r!` orderings).
pub const MAX_SYMMETRIZE_ORDER: usize = 8;

/// Largest dense table accepted (`state_count^order` cells).
pub const MAX_TABLE_CELLS: usize = 1 << 24;

/// `x/|x|` with `0/0 = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub type KernelFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;

/// Dense symmetric lookup table over a finite alphabet `0..state_count`.
///
/// Every cell of the `state_count^order` array holds the value assigned to
/// the sorted version of its index tuple, so lookups ignore argument order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTable {
    state_count: usize,
    order: usize,
    values: Vec<f64>,
}

impl StateTable {
    /// Builds a table by calling `f` on every sorted state tuple.
    pub fn from_fn(state_count: usize, order: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        check_table_shape(state_count, order)?;
        let cells = state_count.pow(order as u32);
        let mut values = vec![0.0; cells];
        let mut tuple = vec![0usize; order];
        let mut sorted = vec![0usize; order];
        for (idx, cell) in values.iter_mut().enumerate() {
            decode_index(idx, state_count, &mut tuple);
            sorted.copy_from_slice(&tuple);
            sorted.sort_unstable();
            let v = f(&sorted);
            if !v.is_finite() {
                return Err(KernelError::Invalid(format!("non-finite table value at {sorted:?}")));
            }
            *cell = v;
        }
        Ok(Self {
            state_count,
            order,
            values,
        })
    }

    /// Builds a table from explicit `(tuple, value)` entries. Tuples are
    /// canonicalized by sorting; conflicting duplicates are rejected and
    /// missing tuples take `default` (or are an error without one).
    pub fn from_entries(
        state_count: usize,
        order: usize,
        entries: &[(Vec<usize>, f64)],
        default: Option<f64>,
    ) -> Result<Self> {
        check_table_shape(state_count, order)?;
        let mut canon: Vec<Option<f64>> = vec![None; state_count.pow(order as u32)];
        for (tuple, value) in entries {
            if tuple.len() != order {
                return Err(KernelError::Arity {
                    expected: order,
                    got: tuple.len(),
                });
            }
            if let Some(&bad) = tuple.iter().find(|&&s| s >= state_count) {
                return Err(KernelError::InvalidState {
                    value: bad as f64,
                    state_count,
                });
            }
            if !value.is_finite() {
                return Err(KernelError::Invalid(format!("non-finite value for {tuple:?}")));
            }
            let mut sorted = tuple.clone();
            sorted.sort_unstable();
            let idx = encode_index(&sorted, state_count);
            match canon[idx] {
                Some(prev) if prev != *value => {
                    return Err(KernelError::Invalid(format!(
                        "conflicting values {prev} and {value} for state tuple {sorted:?}"
                    )))
                }
                _ => canon[idx] = Some(*value),
            }
        }
        if default.is_none() {
            let mut tuple = vec![0usize; order];
            for (idx, value) in canon.iter().enumerate() {
                decode_index(idx, state_count, &mut tuple);
                let is_sorted = tuple.windows(2).all(|w| w[0] <= w[1]);
                if is_sorted && value.is_none() {
                    return Err(KernelError::Invalid(format!(
                        "no value for state tuple {tuple:?} and no default"
                    )));
                }
            }
        }
        Self::from_fn(state_count, order, |sorted| {
            canon[encode_index(sorted, state_count)].or(default).unwrap_or(0.0)
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Value at an arbitrary (not necessarily sorted) state tuple.
    #[inline]
    pub fn get(&self, states: &[usize]) -> f64 {
        self.values[encode_index(states, self.state_count)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| KernelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file: TableFile = serde_json::from_str(&text).map_err(|e| KernelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        file.into_table()
    }
}

/// On-disk form of a table kernel: a list of state tuples and values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub state_count: usize,
    pub order: usize,
    #[serde(default)]
    pub default: Option<f64>,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub states: Vec<usize>,
    pub value: f64,
}

impl TableFile {
    pub fn into_table(self) -> Result<StateTable> {
        let entries: Vec<(Vec<usize>, f64)> = self.entries.into_iter().map(|e| (e.states, e.value)).collect();
        StateTable::from_entries(self.state_count, self.order, &entries, self.default)
    }
}

fn check_table_shape(state_count: usize, order: usize) -> Result<()> {
    if state_count == 0 || order == 0 {
        return Err(KernelError::Invalid("table needs at least one state and order ≥ 1".into()));
    }
    let cells = (state_count as u128).pow(order as u32);
    if cells > MAX_TABLE_CELLS as u128 {
        return Err(KernelError::Invalid(format!(
            "table with {state_count}^{order} cells is too large"
        )));
    }
    Ok(())
}

#[inline]
fn encode_index(states: &[usize], state_count: usize) -> usize {
    states.iter().rev().fold(0, |acc, &s| acc * state_count + s)
}

fn decode_index(mut idx: usize, state_count: usize, out: &mut [usize]) {
    for slot in out.iter_mut() {
        *slot = idx % state_count;
        idx /= state_count;
    }
}

/// Kernels defined by the user: a finite-alphabet table or a symmetrized
/// function.
#[derive(Clone)]
pub enum CustomKernel {
    Table(StateTable),
    Function {
        f: KernelFn,
        point_dim: Option<usize>,
        label: String,
    },
}

#[derive(Clone)]
pub enum KernelKind {
    /// `h(x) = x`, order 1.
    Mean,
    /// Kendall's sign product `sign(x1−y1)·sign(x2−y2)`, order 2.
    SignProduct,
    /// Symmetrized Spearman kernel of order 3.
    SpearmanSym,
    BoundedCustom(CustomKernel),
}

impl KernelKind {
    pub fn name(&self) -> &str {
        match self {
            KernelKind::Mean => "mean",
            KernelKind::SignProduct => "sign_product",
            KernelKind::SpearmanSym => "spearman_sym",
            KernelKind::BoundedCustom(CustomKernel::Table(_)) => "table",
            KernelKind::BoundedCustom(CustomKernel::Function { label, .. }) => label,
        }
    }
}

/// A symmetric kernel `h` of order `r` with `|h| ≤ M`.
#[derive(Clone)]
pub struct KernelSpec {
    order: usize,
    bound: f64,
    kind: KernelKind,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("kind", &self.kind.name())
            .field("order", &self.order)
            .field("bound", &self.bound)
            .finish()
    }
}

impl KernelSpec {
    /// Sample-mean kernel; `bound` is the a-priori bound on the data.
    pub fn mean(bound: f64) -> Result<Self> {
        check_bound(bound)?;
        Ok(Self {
            order: 1,
            bound,
            kind: KernelKind::Mean,
        })
    }

    pub fn sign_product() -> Self {
        Self {
            order: 2,
            bound: 1.0,
            kind: KernelKind::SignProduct,
        }
    }

    pub fn spearman_sym() -> Self {
        Self {
            order: 3,
            bound: 1.0,
            kind: KernelKind::SpearmanSym,
        }
    }

    /// Table kernel. Without an explicit bound the largest table entry is
    /// used (or 1 for an all-zero table).
    pub fn table(table: StateTable, bound: Option<f64>) -> Result<Self> {
        let max_abs = table.max_abs();
        let bound = match bound {
            Some(b) => {
                check_bound(b)?;
                if max_abs > b {
                    return Err(KernelError::BoundExceeded { value: max_abs, bound: b });
                }
                b
            }
            None if max_abs > 0.0 => max_abs,
            None => 1.0,
        };
        Ok(Self {
            order: table.order(),
            bound,
            kind: KernelKind::BoundedCustom(CustomKernel::Table(table)),
        })
    }

    /// Kernel that ignores its arguments.
    pub fn constant(order: usize, value: f64) -> Result<Self> {
        if order == 0 {
            return Err(KernelError::Invalid("order must be ≥ 1".into()));
        }
        let bound = if value == 0.0 { 1.0 } else { value.abs() };
        Ok(Self {
            order,
            bound,
            kind: KernelKind::BoundedCustom(CustomKernel::Function {
                f: Arc::new(move |_| value),
                point_dim: None,
                label: "constant".into(),
            }),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn as_table(&self) -> Option<&StateTable> {
        match &self.kind {
            KernelKind::BoundedCustom(CustomKernel::Table(t)) => Some(t),
            _ => None,
        }
    }

    /// Required point dimension, if the kernel fixes one.
    pub fn point_dim(&self) -> Option<usize> {
        match &self.kind {
            KernelKind::Mean => Some(1),
            KernelKind::SignProduct | KernelKind::SpearmanSym => Some(2),
            KernelKind::BoundedCustom(CustomKernel::Table(_)) => Some(1),
            KernelKind::BoundedCustom(CustomKernel::Function { point_dim, .. }) => *point_dim,
        }
    }

    /// Restricts a function kernel to points of dimension `dim`.
    pub fn with_point_dim(mut self, dim: usize) -> Self {
        if let KernelKind::BoundedCustom(CustomKernel::Function { point_dim, .. }) = &mut self.kind {
            *point_dim = Some(dim);
        }
        self
    }

    pub fn check_point_dim(&self, dim: usize) -> Result<()> {
        match self.point_dim() {
            Some(expected) if expected != dim => Err(KernelError::Dimension { expected, got: dim }),
            _ => Ok(()),
        }
    }

    /// Evaluates `h(points)` with arity, dimension, state and bound checks.
    pub fn eval(&self, points: &[&[f64]]) -> Result<f64> {
        if points.len() != self.order {
            return Err(KernelError::Arity {
                expected: self.order,
                got: points.len(),
            });
        }
        for p in points {
            self.check_point_dim(p.len())?;
        }
        if let Some(table) = self.as_table() {
            for p in points {
                let v = p[0];
                if v < 0.0 || v.fract() != 0.0 || v >= table.state_count() as f64 {
                    return Err(KernelError::InvalidState {
                        value: v,
                        state_count: table.state_count(),
                    });
                }
            }
        }
        let value = self.eval_unchecked(points);
        if !(value.abs() <= self.bound * (1.0 + 1e-12)) {
            return Err(KernelError::BoundExceeded {
                value,
                bound: self.bound,
            });
        }
        Ok(value)
    }

    /// Evaluation without validation, for hot loops over pre-validated data.
    #[inline]
    pub fn eval_unchecked(&self, points: &[&[f64]]) -> f64 {
        match &self.kind {
            KernelKind::Mean => points[0][0],
            KernelKind::SignProduct => sign_product(points[0], points[1]),
            KernelKind::SpearmanSym => spearman_sym(points[0], points[1], points[2]),
            KernelKind::BoundedCustom(CustomKernel::Table(t)) => {
                let mut idx = 0usize;
                for p in points.iter().rev() {
                    idx = idx * t.state_count + p[0] as usize;
                }
                t.values[idx]
            }
            KernelKind::BoundedCustom(CustomKernel::Function { f, .. }) => f(points),
        }
    }

    /// Evaluates a table kernel directly on state indices; other kernels
    /// see each state as the one-dimensional point `[state]`.
    #[inline]
    pub fn eval_states(&self, states: &[usize]) -> f64 {
        match &self.kind {
            KernelKind::BoundedCustom(CustomKernel::Table(t)) => t.get(states),
            _ => {
                let coords: Vec<[f64; 1]> = states.iter().map(|&s| [s as f64]).collect();
                let refs: Vec<&[f64]> = coords.iter().map(|c| c.as_slice()).collect();
                self.eval_unchecked(&refs)
            }
        }
    }

    /// The kernel as a plain closure (e.g. to feed back into [`symmetrize`]).
    pub fn to_fn(&self) -> impl Fn(&[&[f64]]) -> f64 + Send + Sync + 'static {
        let k = self.clone();
        move |pts: &[&[f64]]| k.eval_unchecked(pts)
    }
}

fn check_bound(bound: f64) -> Result<()> {
    if bound > 0.0 && bound.is_finite() {
        Ok(())
    } else {
        Err(KernelError::Invalid(format!("bound must be positive and finite, got {bound}")))
    }
}

#[inline]
fn sign_product(a: &[f64], b: &[f64]) -> f64 {
    sign(a[0] - b[0]) * sign(a[1] - b[1])
}

#[inline]
fn spearman_term(i: &[f64], j: &[f64], k: &[f64]) -> f64 {
    sign(i[0] - j[0]) * sign(i[1] - k[1])
}

/// `(1/2)·Σ` of the Spearman base kernel over the six orderings, which puts
/// the U-statistic on the `ρ₃` scale and keeps `|h| ≤ 1`.
#[inline]
fn spearman_sym(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    0.5 * (spearman_term(a, b, c)
        + spearman_term(a, c, b)
        + spearman_term(b, a, c)
        + spearman_term(b, c, a)
        + spearman_term(c, a, b)
        + spearman_term(c, b, a))
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Converts an asymmetric bounded kernel into a symmetric one by averaging
/// over all `order!` argument orderings.
///
/// The summands are sorted before adding so that the result is bit-for-bit
/// independent of argument order.
pub fn symmetrize<F>(asym: F, order: usize, bound: f64) -> Result<KernelSpec>
where
    F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
{
    if order == 0 || order > MAX_SYMMETRIZE_ORDER {
        return Err(KernelError::Invalid(format!(
            "symmetrize supports orders 1..={MAX_SYMMETRIZE_ORDER}, got {order}"
        )));
    }
    check_bound(bound)?;
    let perms = permutations(order);
    let count = perms.len() as f64;
    let f = move |pts: &[&[f64]]| {
        let mut buf: Vec<&[f64]> = Vec::with_capacity(pts.len());
        let mut vals: Vec<f64> = perms
            .iter()
            .map(|perm| {
                buf.clear();
                buf.extend(perm.iter().map(|&i| pts[i]));
                asym(&buf)
            })
            .collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        vals.iter().sum::<f64>() / count
    };
    Ok(KernelSpec {
        order,
        bound,
        kind: KernelKind::BoundedCustom(CustomKernel::Function {
            f: Arc::new(f),
            point_dim: None,
            label: "symmetrized".into(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|p| p.as_slice()).collect()
    }

    #[test]
    fn sign_product_examples() {
        let k = KernelSpec::sign_product();
        assert_eq!(k.eval(&[&[1.0, 1.0], &[2.0, 2.0]]).unwrap(), 1.0);
        assert_eq!(k.eval(&[&[1.0, 2.0], &[1.0, 3.0]]).unwrap(), 0.0);
    }

    #[test]
    fn spearman_sym_concordant_triple() {
        let k = KernelSpec::spearman_sym();
        let v = k.eval(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn arity_and_dimension_errors() {
        let k = KernelSpec::sign_product();
        assert!(matches!(k.eval(&[&[1.0, 1.0]]), Err(KernelError::Arity { expected: 2, got: 1 })));
        assert!(matches!(
            k.eval(&[&[1.0], &[2.0]]),
            Err(KernelError::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn mean_kernel_respects_bound() {
        let k = KernelSpec::mean(1.0).unwrap();
        assert_eq!(k.eval(&[&[0.5]]).unwrap(), 0.5);
        assert!(matches!(k.eval(&[&[2.0]]), Err(KernelError::BoundExceeded { .. })));
    }

    #[test]
    fn symmetrize_antisymmetric_vanishes() {
        let k = symmetrize(|p: &[&[f64]]| p[0][0] - p[1][0], 2, 10.0).unwrap();
        assert_eq!(k.eval(&[&[3.0], &[1.0]]).unwrap(), 0.0);
        assert_eq!(k.eval(&[&[-2.5], &[4.0]]).unwrap(), 0.0);
    }

    #[test]
    fn symmetrize_symmetric_is_unchanged() {
        let k = symmetrize(|p: &[&[f64]]| p[0][0] + p[1][0], 2, 10.0).unwrap();
        assert_eq!(k.eval(&[&[3.0], &[1.5]]).unwrap(), 4.5);
    }

    #[test]
    fn symmetrized_spearman_base_matches_spearman_sym() {
        // Explicit six-term oracle for the base kernel scaled to the ρ₃ normalization.
        let base = |p: &[&[f64]]| 3.0 * sign(p[0][0] - p[1][0]) * sign(p[0][1] - p[2][1]);
        let sym = symmetrize(base, 3, 3.0).unwrap().with_point_dim(2);
        let spear = KernelSpec::spearman_sym();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v: Vec<Vec<f64>> = (0..3)
                .map(|_| vec![rng.random_range(0..4) as f64, rng.random::<f64>()])
                .collect();
            let p = pts(&v);
            let oracle: f64 = permutations(3)
                .iter()
                .map(|q| base(&[p[q[0]], p[q[1]], p[q[2]]]))
                .sum::<f64>()
                / 6.0;
            assert_eq!(sym.eval(&p).unwrap(), spear.eval(&p).unwrap());
            assert!((oracle - spear.eval(&p).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn table_from_entries_canonicalizes_and_checks() {
        let entries = vec![(vec![0, 0], 1.0), (vec![1, 0], -0.5), (vec![1, 1], 0.25)];
        let t = StateTable::from_entries(2, 2, &entries, None).unwrap();
        assert_eq!(t.get(&[0, 1]), -0.5);
        assert_eq!(t.get(&[1, 0]), -0.5);
        let k = KernelSpec::table(t, None).unwrap();
        assert_eq!(k.bound(), 1.0);
        assert_eq!(k.eval(&[&[1.0], &[1.0]]).unwrap(), 0.25);
        assert!(matches!(k.eval(&[&[2.0], &[1.0]]), Err(KernelError::InvalidState { .. })));

        let conflict = vec![(vec![0, 1], 1.0), (vec![1, 0], 2.0)];
        assert!(StateTable::from_entries(2, 2, &conflict, Some(0.0)).is_err());
        let partial = vec![(vec![0, 1], 1.0)];
        assert!(StateTable::from_entries(2, 2, &partial, None).is_err());
        assert!(StateTable::from_entries(2, 2, &partial, Some(0.0)).is_ok());
    }

    #[test]
    fn table_file_round_trip() {
        let json = r#"{"state_count":3,"order":2,"default":0.0,
            "entries":[{"states":[2,0],"value":0.75}]}"#;
        let file: TableFile = serde_json::from_str(json).unwrap();
        let t = file.into_table().unwrap();
        assert_eq!(t.get(&[0, 2]), 0.75);
        assert_eq!(t.get(&[1, 1]), 0.0);
    }

    fn kernel_zoo() -> Vec<KernelSpec> {
        let table = StateTable::from_fn(3, 3, |s| (s[0] as f64 - s[2] as f64 * 0.5).sin()).unwrap();
        vec![
            KernelSpec::sign_product(),
            KernelSpec::spearman_sym(),
            KernelSpec::table(table, None).unwrap(),
            symmetrize(|p: &[&[f64]]| (p[0][0] - 2.0 * p[1][0]).tanh(), 2, 1.0).unwrap(),
            symmetrize(|p: &[&[f64]]| (p[0][0] * p[1][1] - p[2][0]).cos(), 3, 1.0).unwrap(),
        ]
    }

    fn fuzz_points(k: &KernelSpec, raw: &[(f64, f64)]) -> Vec<Vec<f64>> {
        raw.iter()
            .take(k.order())
            .map(|&(a, b)| match k.point_dim() {
                Some(1) if k.as_table().is_some() => vec![(a.abs() * 10.0).floor() % 3.0],
                Some(1) => vec![a],
                _ => vec![a, b],
            })
            .collect()
    }

    proptest! {
        #[test]
        fn kernels_are_bounded_and_permutation_invariant(
            raw in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3),
            which in 0usize..5,
        ) {
            let k = &kernel_zoo()[which];
            let v = fuzz_points(k, &raw);
            let p = pts(&v);
            let base = k.eval(&p).unwrap();
            prop_assert!(base.abs() <= k.bound());
            for perm in permutations(k.order()) {
                let q: Vec<&[f64]> = perm.iter().map(|&i| p[i]).collect();
                prop_assert_eq!(k.eval(&q).unwrap(), base);
            }
        }

        #[test]
        fn symmetrize_is_idempotent(
            raw in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3),
        ) {
            let once = symmetrize(|p: &[&[f64]]| (p[0][0] - 0.3 * p[1][1] + p[2][0] * p[2][1]).tanh(), 3, 1.0).unwrap();
            let twice = symmetrize(once.to_fn(), 3, 1.0).unwrap();
            let v: Vec<Vec<f64>> = raw.iter().map(|&(a, b)| vec![a, b]).collect();
            let p = pts(&v);
            prop_assert!((once.eval(&p).unwrap() - twice.eval(&p).unwrap()).abs() <= 1e-15);
        }
    }
}
