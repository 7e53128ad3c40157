//! Tabular data for the regression and classification experiments.
//!
//! Input files are headerless numeric CSVs (the UCI convention). After
//! loading, every feature is standardized so that its sample mean is 0 and
//! its sample mean of squares is 1, and a constant bias coordinate of 1 is
//! appended to every row.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DecisionVector;

/// Ridge added to the normal equations in [`radius_for_ls`].
pub const LS_RIDGE: f64 = 1e-8;

/// Which columns hold the target and the features (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub target: usize,
    /// Feature columns in order; all non-target columns when absent.
    #[serde(default)]
    pub features: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub mean: f64,
    /// Root mean square after centering.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    rows: Vec<DecisionVector>,
    targets: Vec<f64>,
    feature_count: usize,
    stats: Vec<FeatureStats>,
    degenerate: Vec<usize>,
    has_bias: bool,
}

impl TabularDataset {
    /// Builds a dataset from raw feature rows and targets.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("no rows".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch(format!(
                "{} feature rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let feature_count = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != feature_count) {
            return Err(Error::Dataset(format!(
                "row {i} has {} features, expected {feature_count}",
                rows[i].len()
            )));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        let rows = rows
            .into_iter()
            .map(DecisionVector::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            targets,
            feature_count,
            stats: Vec::new(),
            degenerate: Vec::new(),
            has_bias: false,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of features, excluding the bias coordinate.
    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    /// Length of each row as served to the learner.
    pub fn dim(&self) -> usize {
        self.feature_count + usize::from(self.has_bias)
    }

    pub fn row(&self, i: usize) -> &DecisionVector {
        &self.rows[i]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Normalization statistics, empty before [`normalize`].
    pub fn stats(&self) -> &[FeatureStats] {
        &self.stats
    }

    /// Features that were constant and were mapped to zero.
    pub fn degenerate_features(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }
}

/// Reads a headerless numeric CSV.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<TabularDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// [`load_csv`] over any reader. Rows in errors are 1-based line numbers,
/// columns are 0-based indices as in [`Schema`].
pub fn read_csv<R: std::io::Read>(input: R, schema: &Schema) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        let width = *width.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Csv {
                row: line,
                column: record.len().min(width),
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let cell = |column: usize| -> Result<f64> {
            let text = record.get(column).ok_or_else(|| Error::Csv {
                row: line,
                column,
                message: format!("column out of range ({width} columns)"),
            })?;
            match text.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Csv {
                    row: line,
                    column,
                    message: format!("not a finite number: `{text}`"),
                }),
            }
        };
        targets.push(cell(schema.target)?);
        let features = match &schema.features {
            Some(cols) => cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?,
            None => (0..width)
                .filter(|&c| c != schema.target)
                .map(cell)
                .collect::<Result<Vec<_>>>()?,
        };
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::Dataset("empty file".into()));
    }
    TabularDataset::from_rows(rows, targets)
}

/// Standardizes every feature and appends the bias coordinate.
///
/// Constant features become all-zero and are listed in
/// [`TabularDataset::degenerate_features`].
pub fn normalize(ds: &TabularDataset) -> TabularDataset {
    let n = ds.len() as f64;
    let nf = ds.feature_count;
    let mut stats = Vec::with_capacity(nf);
    let mut degenerate = Vec::new();
    for j in 0..nf {
        let mean = ds.rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let ms = ds.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let scale = ms.sqrt();
        if scale <= 1e-12 * (1.0 + mean.abs()) {
            degenerate.push(j);
        }
        stats.push(FeatureStats { mean, scale });
    }
    let rows = ds
        .rows
        .iter()
        .map(|r| {
            let mut x: Vec<f64> = (0..nf)
                .map(|j| {
                    if degenerate.contains(&j) {
                        0.0
                    } else {
                        (r[j] - stats[j].mean) / stats[j].scale
                    }
                })
                .collect();
            x.push(1.0);
            DecisionVector::new(x).expect("finite after standardization")
        })
        .collect();
    TabularDataset {
        rows,
        targets: ds.targets.clone(),
        feature_count: nf,
        stats,
        degenerate,
        has_bias: true,
    }
}

/// Adds `delta` to every target.
pub fn shift_targets(ds: &TabularDataset, delta: f64) -> TabularDataset {
    TabularDataset {
        targets: ds.targets.iter().map(|y| y + delta).collect(),
        ..ds.clone()
    }
}

/// Smallest power of two (at least 1) that is `≥ norm`.
pub fn power_of_two_radius(norm: f64) -> f64 {
    let mut r = 1.0;
    while r < norm {
        r *= 2.0;
    }
    r
}

/// Least-squares solution of the rows against the targets.
pub fn least_squares(ds: &TabularDataset) -> Result<DecisionVector> {
    let d = ds.dim();
    let x = DMatrix::from_fn(ds.len(), d, |i, j| ds.rows[i][j]);
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Dataset("design matrix is all zeros".into()));
    }
    let y = DVector::from_column_slice(&ds.targets);
    let gram = x.transpose() * &x + DMatrix::identity(d, d) * LS_RIDGE;
    let rhs = x.transpose() * y;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Dataset("normal equations are not positive definite".into()))?;
    DecisionVector::new(chol.solve(&rhs).iter().copied().collect())
}

/// Radius of the smallest origin-centred power-of-two ball containing the
/// least-squares solution.
pub fn radius_for_ls(ds: &TabularDataset) -> Result<f64> {
    Ok(power_of_two_radius(least_squares(ds)?.norm()))
}

/// Rule assigning each row to one of two partitions by its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionRule {
    /// Partition 0 holds targets strictly below the value.
    Below(f64),
    /// Partition 0 holds targets equal to the value.
    Equals(f64),
}

impl PartitionRule {
    pub fn partition_of(&self, target: f64) -> usize {
        let first = match *self {
            PartitionRule::Below(v) => target < v,
            PartitionRule::Equals(v) => target == v,
        };
        usize::from(!first)
    }
}

/// Splits row indices into two independently shuffled queues.
pub fn partition<R: Rng + ?Sized>(
    ds: &TabularDataset,
    rule: PartitionRule,
    rng: &mut R,
) -> Result<[Vec<usize>; 2]> {
    let mut queues = [Vec::new(), Vec::new()];
    for (i, &y) in ds.targets.iter().enumerate() {
        queues[rule.partition_of(y)].push(i);
    }
    for (i, q) in queues.iter_mut().enumerate() {
        if q.is_empty() {
            return Err(Error::Dataset(format!("partition {i} is empty")));
        }
        q.shuffle(rng);
    }
    Ok(queues)
}
