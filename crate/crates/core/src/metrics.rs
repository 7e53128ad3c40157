//! Regret and loss accounting, and aggregation across trials.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DecisionVector, FeasibleSet};

/// `min_{w ∈ set} sᵀw`.
pub fn linear_minimum(set: &FeasibleSet, s: &DecisionVector) -> Result<f64> {
    let w = hindsight_comparator(set, s)?;
    s.inner(&w)
}

/// A minimizer of `sᵀw` over the set: the boundary point opposite `s` on a
/// ball, the matching corner of a box. The centre when `s = 0`.
pub fn hindsight_comparator(set: &FeasibleSet, s: &DecisionVector) -> Result<DecisionVector> {
    if s.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: s.dim(),
        });
    }
    match set {
        FeasibleSet::Ball { center, radius } => {
            let n = s.norm();
            if n == 0.0 {
                Ok(center.clone())
            } else {
                center.add_scaled(-radius / n, s)
            }
        }
        FeasibleSet::Box { lower, upper } => {
            let coords = s
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, &si)| match si.partial_cmp(&0.0) {
                    Some(std::cmp::Ordering::Greater) => lower[i],
                    Some(std::cmp::Ordering::Less) => upper[i],
                    _ => 0.5 * (lower[i] + upper[i]),
                })
                .collect();
            DecisionVector::new(coords)
        }
    }
}

/// Regret of a trajectory on linear losses `f_t(w) = g_tᵀw` against the best
/// fixed decision in hindsight.
pub fn regret_linear(decisions: &[DecisionVector], gradients: &[DecisionVector], set: &FeasibleSet) -> Result<f64> {
    if decisions.len() != gradients.len() {
        return Err(Error::LengthMismatch(format!(
            "{} decisions but {} gradients",
            decisions.len(),
            gradients.len()
        )));
    }
    let mut tracker = LinearRegret::new(set.clone());
    for (w, g) in decisions.iter().zip(gradients) {
        tracker.push(w, g)?;
    }
    tracker.regret()
}

/// Running regret on linear losses.
#[derive(Debug, Clone)]
pub struct LinearRegret {
    set: FeasibleSet,
    sum: DecisionVector,
    played: f64,
}

impl LinearRegret {
    pub fn new(set: FeasibleSet) -> Self {
        let sum = DecisionVector::zeros(set.dim());
        Self {
            set,
            sum,
            played: 0.0,
        }
    }

    /// Accounts for a round where `w` was played against gradient `g`.
    pub fn push(&mut self, w: &DecisionVector, g: &DecisionVector) -> Result<()> {
        self.played += g.inner(w)?;
        self.sum = self.sum.add_scaled(1.0, g)?;
        Ok(())
    }

    /// Accumulated gradient.
    pub fn sum(&self) -> &DecisionVector {
        &self.sum
    }

    /// Cumulative loss of the played decisions.
    pub fn played(&self) -> f64 {
        self.played
    }

    pub fn regret(&self) -> Result<f64> {
        Ok(self.played - linear_minimum(&self.set, &self.sum)?)
    }
}

/// `√2·D·√(Σ ‖g_k‖² / p_k²)` over the observed rounds.
pub fn regret_estimate_hat(observed_norms: &[f64], probs: &[f64], diameter: f64) -> Result<f64> {
    if observed_norms.len() != probs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} norms but {} probabilities",
            observed_norms.len(),
            probs.len()
        )));
    }
    let s: f64 = observed_norms
        .iter()
        .zip(probs)
        .map(|(n, p)| (n / p).powi(2))
        .sum();
    Ok(std::f64::consts::SQRT_2 * diameter * s.sqrt())
}

/// Mean and sample standard deviation of one final value across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub mean: f64,
    pub sd: f64,
    pub trials: usize,
}

/// One-pass mean and unbiased standard deviation.
pub fn aggregate(finals: &[f64]) -> Result<TrialSummary> {
    if finals.len() < 2 {
        return Err(Error::InsufficientTrials {
            needed: 2,
            found: finals.len(),
        });
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in finals.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = finals.len();
    Ok(TrialSummary {
        mean,
        sd: (m2 / (n - 1) as f64).sqrt(),
        trials: n,
    })
}

/// One row of a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub variant: String,
    pub trial: u64,
    pub cum_loss: f64,
    pub avg_loss: f64,
    pub regret: Option<f64>,
    pub lemma4_ref: Option<f64>,
    /// 1 when the sub-gradient was observed.
    pub observed: u8,
    /// Rounds since the previous observation, this one included.
    pub gap: u64,
    pub p_used: Option<f64>,
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_io)?;
    }
    if rows.is_empty() {
        w.write_record([
            "round", "variant", "trial", "cum_loss", "avg_loss", "regret", "lemma4_ref", "observed", "gap", "p_used",
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-variant entry of the summary file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub mean: f64,
    /// Absent for a single trial.
    pub sd: Option<f64>,
    pub trials: usize,
    pub rounds: u64,
}

pub fn write_summary<W: Write>(out: W, summary: &BTreeMap<String, SummaryEntry>) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, summary).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
