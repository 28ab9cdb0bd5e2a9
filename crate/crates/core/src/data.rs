//! Grouped sample sets, class priors, and the CSV dataset format.
//!
//! A [`GroupedDataset`] holds `k >= 2` sample groups over a common
//! `dim`-dimensional domain. Group `i` holds samples of distribution `P_i`;
//! the last group is the pivot (the common denominator of every canonical
//! ratio).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DreError, Result};

/// A sample point. All coordinates finite.
pub type Point = Vec<f64>;

/// Absolute tolerance used for every simplex check.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDataset {
    groups: Vec<Vec<Point>>,
    dim: usize,
}

impl GroupedDataset {
    pub fn new(groups: Vec<Vec<Point>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(DreError::InvalidDataset(format!(
                "need at least 2 groups, got {}",
                groups.len()
            )));
        }
        let dim = groups
            .iter()
            .flat_map(|g| g.first())
            .map(|p| p.len())
            .next()
            .unwrap_or(0);
        if dim == 0 {
            return Err(DreError::InvalidDataset("points must have dimension >= 1".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(DreError::InvalidDataset(format!("group {} is empty", i + 1)));
            }
            for p in g {
                if p.len() != dim {
                    return Err(DreError::InvalidDataset(format!(
                        "group {} has a point of dimension {}, expected {}",
                        i + 1,
                        p.len(),
                        dim
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(DreError::InvalidDataset(format!(
                        "group {} has a non-finite coordinate",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { groups, dim })
    }

    /// Number of distributions.
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group(&self, i: usize) -> &[Point] {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[Vec<Point>] {
        &self.groups
    }

    /// The pivot group (index `k - 1`).
    pub fn pivot(&self) -> &[Point] {
        &self.groups[self.groups.len() - 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Reorder groups: new group `j` is old group `order[j]`. Use this to make
    /// any group the pivot.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let k = self.k();
        let mut seen = vec![false; k];
        if order.len() != k {
            return Err(DreError::DimensionMismatch { expected: k, got: order.len() });
        }
        for &o in order {
            if o >= k || seen[o] {
                return Err(DreError::InvalidParameter(format!(
                    "group order {order:?} is not a permutation of 0..{k}"
                )));
            }
            seen[o] = true;
        }
        Ok(Self { groups: order.iter().map(|&o| self.groups[o].clone()).collect(), dim: self.dim })
    }

    /// Load one CSV per group (no header, one sample per row).
    pub fn from_group_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let groups = paths.iter().map(|p| read_points(p.as_ref())).collect::<Result<Vec<_>>>()?;
        Self::new(groups)
    }

    /// Load a single CSV whose first column is the 1-based group index.
    pub fn from_labeled_file(path: &Path) -> Result<Self> {
        let rows = read_rows(path)?;
        let mut groups: Vec<Vec<Point>> = Vec::new();
        for (line, row) in rows.into_iter().enumerate() {
            let label = row[0];
            if label.fract() != 0.0 || label < 1.0 {
                return Err(DreError::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: group label {label} is not a positive integer", line + 1),
                });
            }
            let g = label as usize - 1;
            if groups.len() <= g {
                groups.resize_with(g + 1, Vec::new);
            }
            groups[g].push(row[1..].to_vec());
        }
        Self::new(groups)
    }
}

/// One index set per group. Expectations over a minibatch are per-group
/// means, never pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub indices: Vec<Vec<usize>>,
}

impl Minibatch {
    /// Every sample of every group.
    pub fn full(dataset: &GroupedDataset) -> Self {
        Self { indices: dataset.groups().iter().map(|g| (0..g.len()).collect()).collect() }
    }

    pub fn validate(&self, dataset: &GroupedDataset) -> Result<()> {
        if self.indices.len() != dataset.k() {
            return Err(DreError::DimensionMismatch { expected: dataset.k(), got: self.indices.len() });
        }
        for (i, idx) in self.indices.iter().enumerate() {
            if idx.is_empty() {
                return Err(DreError::EmptySamples(format!("minibatch for group {} is empty", i + 1)));
            }
            if let Some(&j) = idx.iter().find(|&&j| j >= dataset.group(i).len()) {
                return Err(DreError::InvalidParameter(format!(
                    "minibatch index {j} out of range for group {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Write points as a header-less CSV.
pub fn write_points(path: &Path, points: &[Point]) -> Result<()> {
    let io = |source| DreError::Io { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| {
        DreError::Parse { path: path.to_path_buf(), message: e.to_string() }
    })?;
    for p in points {
        w.write_record(p.iter().map(|v| format!("{v:?}"))).map_err(|e| DreError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(io)
}

/// Read a header-less numeric CSV. Ragged rows are rejected.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let parse_err = |message: String| DreError::Parse { path: path.to_path_buf(), message };
    let file = std::fs::File::open(path).map_err(|source| DreError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(format!("row {}: cannot parse {f:?} as a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(format!("row {}: non-finite value", i + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err("file has no rows".into()));
    }
    Ok(rows)
}

pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    read_rows(path)
}

/// Class priors: a strictly positive point of the k-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Prior {
    weights: Vec<f64>,
}

impl Prior {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(DreError::InvalidPrior(format!("need k >= 2 weights, got {}", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(DreError::InvalidPrior(format!("weight {w} is not strictly positive")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(DreError::InvalidPrior(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Self {
        Self { weights: vec![1.0 / k as f64; k] }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Prior of the pivot class.
    pub fn pivot(&self) -> f64 {
        self.weights[self.weights.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for Prior {
    type Error = DreError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Prior::new(v)
    }
}

impl From<Prior> for Vec<f64> {
    fn from(p: Prior) -> Self {
        p.weights
    }
}

/// Priors proportional to group sizes.
pub fn estimate_prior(dataset: &GroupedDataset) -> Result<Prior> {
    prior_from_counts(&dataset.sizes())
}

pub fn prior_from_counts(counts: &[usize]) -> Result<Prior> {
    if let Some(i) = counts.iter().position(|&n| n == 0) {
        return Err(DreError::InvalidDataset(format!("group {} is empty", i + 1)));
    }
    let total: usize = counts.iter().sum();
    let mut weights: Vec<f64> = counts.iter().map(|&n| n as f64 / total as f64).collect();
    let last = weights.len() - 1;
    let head: f64 = weights[..last].iter().sum();
    weights[last] = 1.0 - head;
    Prior::new(weights)
}
