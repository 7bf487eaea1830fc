use std::io::{BufRead, Write};

use super::{ProcessError, ProcessSpec};

/// Observed values of a path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathData {
    /// `T × dim` values, row-major.
    Real { dim: usize, values: Vec<f64> },
    /// State indices in `[0, state_count)`.
    States { state_count: usize, states: Vec<usize> },
}

/// Where a generated path came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub spec: ProcessSpec,
    pub replication: u64,
    pub stream: u64,
}

/// One realization of a time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPath {
    data: PathData,
    provenance: Option<Provenance>,
}

impl SeriesPath {
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Result<Self, ProcessError> {
        if dim == 0 {
            return Err(ProcessError::InvalidPath("dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(ProcessError::InvalidPath(format!(
                "{} values do not fill rows of width {dim}",
                values.len()
            )));
        }
        Ok(Self {
            data: PathData::Real { dim, values },
            provenance: None,
        })
    }

    /// One-dimensional real path.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            data: PathData::Real { dim: 1, values },
            provenance: None,
        }
    }

    /// Builds a `T × p` path from `p` equal-length columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, ProcessError> {
        let p = columns.len();
        if p == 0 {
            return Err(ProcessError::InvalidPath("no columns".into()));
        }
        let t = columns[0].len();
        if columns.iter().any(|c| c.len() != t) {
            return Err(ProcessError::InvalidPath("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(t * p);
        for i in 0..t {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_rows(p, values)
    }

    pub fn from_states(state_count: usize, states: Vec<usize>) -> Result<Self, ProcessError> {
        if let Some(&bad) = states.iter().find(|&&x| x >= state_count) {
            return Err(ProcessError::InvalidPath(format!(
                "state {bad} outside [0, {state_count})"
            )));
        }
        Ok(Self {
            data: PathData::States { state_count, states },
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn data(&self) -> &PathData {
        &self.data
    }

    pub fn len(&self) -> usize {
        match &self.data {
            PathData::Real { dim, values } => values.len() / dim,
            PathData::States { states, .. } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width of a row; state paths count as one-dimensional.
    pub fn dim(&self) -> usize {
        match &self.data {
            PathData::Real { dim, .. } => *dim,
            PathData::States { .. } => 1,
        }
    }

    pub fn is_states(&self) -> bool {
        matches!(self.data, PathData::States { .. })
    }

    pub fn states(&self) -> Option<&[usize]> {
        match &self.data {
            PathData::States { states, .. } => Some(states),
            PathData::Real { .. } => None,
        }
    }

    pub fn state_count(&self) -> Option<usize> {
        match &self.data {
            PathData::States { state_count, .. } => Some(*state_count),
            PathData::Real { .. } => None,
        }
    }

    /// Row-major real values; state indices are converted to floats.
    pub fn real_values(&self) -> std::borrow::Cow<'_, [f64]> {
        match &self.data {
            PathData::Real { values, .. } => std::borrow::Cow::Borrowed(values),
            PathData::States { states, .. } => states.iter().map(|&s| s as f64).collect(),
        }
    }

    /// Column `j` of a real path (or the states as floats).
    pub fn column(&self, j: usize) -> Vec<f64> {
        match &self.data {
            PathData::Real { dim, values } => values.iter().skip(j).step_by(*dim).copied().collect(),
            PathData::States { states, .. } => states.iter().map(|&s| s as f64).collect(),
        }
    }

    /// Reinterprets a real one-column path with integral values as states.
    pub fn into_states(self, state_count: usize) -> Result<Self, ProcessError> {
        match self.data {
            PathData::States { states, .. } => Self::from_states(state_count, states),
            PathData::Real { dim, values } => {
                if dim != 1 {
                    return Err(ProcessError::InvalidPath("state paths must be one-dimensional".into()));
                }
                let mut states = Vec::with_capacity(values.len());
                for v in values {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(ProcessError::InvalidPath(format!("{v} is not a state index")));
                    }
                    states.push(v as usize);
                }
                Self::from_states(state_count, states)
            }
        }
    }

    /// Writes `t,x1,...,xd` followed by one row per time index (starting at 1).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ProcessError> {
        let d = self.dim();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=d).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        match &self.data {
            PathData::Real { dim, values } => {
                for (t, row) in values.chunks(*dim).enumerate() {
                    write!(w, "{}", t + 1)?;
                    for v in row {
                        write!(w, ",{v:.16e}")?;
                    }
                    writeln!(w)?;
                }
            }
            PathData::States { states, .. } => {
                for (t, s) in states.iter().enumerate() {
                    writeln!(w, "{},{s}", t + 1)?;
                }
            }
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`SeriesPath::write_csv`] as a real path.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, ProcessError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| ProcessError::Csv("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(ProcessError::Csv(format!("bad header {header:?}")));
        }
        for (j, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(ProcessError::Csv(format!("bad header column {c:?}")));
            }
        }
        let d = cols.len() - 1;
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(ProcessError::Csv(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    d + 1,
                    fields.len()
                )));
            }
            for f in &fields[1..] {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| ProcessError::Csv(format!("line {}: {e}", lineno + 2)))?;
                values.push(v);
            }
        }
        Self::from_rows(d, values)
    }
}
