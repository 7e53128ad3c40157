//! Gradient substitutes for rounds whose sub-gradient may go unobserved.
//!
//! Each strategy turns the round's [`ObservationEvent`] into the vector fed
//! to [`OptimizerState::step`](crate::descent::OptimizerState::step). All of
//! them emit the zero vector on a missed round and rescale an observed
//! sub-gradient by an estimate of `1 / p_t`:
//!
//! | variant       | factor on an observed `g`                        |
//! |---------------|--------------------------------------------------|
//! | `Ignore`      | 1                                                |
//! | `WithKnown`   | `1 / p_t`, with `p_t` disclosed by the environment|
//! | `WithPrior`   | `1 / p_t`, with `p_t` the posterior under a prior |
//! | `Uniform`     | `t − t_{k−1} + 1`                                |
//! | `GML`         | `t − t_{k−1}`                                    |
//! | `APGD.EP`     | `1 / p̂_t` from the empirical gap distribution   |
//!
//! Estimators only ever see the round index and the observation, never the
//! loss itself.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::empirical::GapHistogram;
use crate::error::{Error, Result};
use crate::geometry::DecisionVector;
use crate::priors::{PriorPosteriorState, PriorSchedule};

/// What the learner receives at the end of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationEvent {
    /// 1-based round index.
    pub round: u64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Missed,
    Observed {
        g: DecisionVector,
        /// The round's observation probability, when the environment discloses it.
        p_disclosed: Option<f64>,
    },
}

impl ObservationEvent {
    pub fn missed(round: u64) -> Self {
        Self {
            round,
            payload: Payload::Missed,
        }
    }

    pub fn observed(round: u64, g: DecisionVector, p_disclosed: Option<f64>) -> Self {
        Self {
            round,
            payload: Payload::Observed { g, p_disclosed },
        }
    }

    pub fn is_observed(&self) -> bool {
        matches!(self.payload, Payload::Observed { .. })
    }
}

/// The six substitute strategies, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Ignore,
    WithKnown,
    WithPrior,
    Uniform,
    Gml,
    EmpiricalEp,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Ignore,
        Variant::WithKnown,
        Variant::WithPrior,
        Variant::Gml,
        Variant::Uniform,
        Variant::EmpiricalEp,
    ];

    /// Identifier used in configuration files and output columns.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ignore => "ignore",
            Variant::WithKnown => "with_known",
            Variant::WithPrior => "with_prior",
            Variant::Uniform => "uniform",
            Variant::Gml => "gml",
            Variant::EmpiricalEp => "apgd_ep",
        }
    }

    /// Label used in figures.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Ignore => "Ignore",
            Variant::WithKnown => "w/Known",
            Variant::WithPrior => "w/Prior",
            Variant::Uniform => "Uniform",
            Variant::Gml => "GML",
            Variant::EmpiricalEp => "APGD.EP",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key || v.label().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                format!(
                    "unknown variant `{s}` (expected one of {})",
                    Variant::ALL.map(Variant::name).join(", ")
                )
            })
    }
}

/// Strategy-specific state.
#[derive(Debug, Clone)]
pub enum EstimatorKind {
    Ignore,
    WithKnown,
    WithPrior {
        schedule: Arc<dyn PriorSchedule>,
        state: PriorPosteriorState,
        /// Index of the observation being waited for.
        k: u64,
    },
    Uniform,
    Gml,
    EmpiricalEp {
        hist: GapHistogram,
    },
}

/// The substitute for one round plus the probability it implied.
#[derive(Debug, Clone, PartialEq)]
pub struct Substitute {
    pub g_tilde: DecisionVector,
    /// Observation probability the scaling corresponds to; `None` when missed.
    pub p_used: Option<f64>,
}

/// A substitute strategy together with the time of its last observation.
#[derive(Debug, Clone)]
pub struct Estimator {
    kind: EstimatorKind,
    dim: usize,
    last_obs_round: u64,
    last_round: u64,
}

impl Estimator {
    pub fn new(kind: EstimatorKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            last_obs_round: 0,
            last_round: 0,
        }
    }

    /// Builds `variant`; `WithPrior` needs a prior schedule, `APGD.EP`
    /// optionally uses the history-only estimate.
    pub fn for_variant(
        variant: Variant,
        dim: usize,
        schedule: Option<Arc<dyn PriorSchedule>>,
        exclude_current: bool,
    ) -> Result<Self> {
        let kind = match variant {
            Variant::Ignore => EstimatorKind::Ignore,
            Variant::WithKnown => EstimatorKind::WithKnown,
            Variant::WithPrior => {
                let schedule = schedule.ok_or_else(|| {
                    Error::InvalidPrior("the with_prior variant needs a prior".into())
                })?;
                let state = schedule.prior_for(1).reset_after_observation();
                EstimatorKind::WithPrior {
                    schedule,
                    state,
                    k: 1,
                }
            }
            Variant::Uniform => EstimatorKind::Uniform,
            Variant::Gml => EstimatorKind::Gml,
            Variant::EmpiricalEp => EstimatorKind::EmpiricalEp {
                hist: if exclude_current {
                    GapHistogram::excluding_current()
                } else {
                    GapHistogram::new()
                },
            },
        };
        Ok(Self::new(kind, dim))
    }

    pub fn variant(&self) -> Variant {
        match self.kind {
            EstimatorKind::Ignore => Variant::Ignore,
            EstimatorKind::WithKnown => Variant::WithKnown,
            EstimatorKind::WithPrior { .. } => Variant::WithPrior,
            EstimatorKind::Uniform => Variant::Uniform,
            EstimatorKind::Gml => Variant::Gml,
            EstimatorKind::EmpiricalEp { .. } => Variant::EmpiricalEp,
        }
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    /// Round of the most recent observation (0 before the first).
    pub fn last_obs_round(&self) -> u64 {
        self.last_obs_round
    }

    /// Gap histogram of an `APGD.EP` estimator.
    pub fn histogram(&self) -> Option<&GapHistogram> {
        match &self.kind {
            EstimatorKind::EmpiricalEp { hist } => Some(hist),
            _ => None,
        }
    }

    /// Substitute for the round described by `ev`.
    pub fn estimate(&mut self, ev: &ObservationEvent) -> Result<Substitute> {
        if ev.round <= self.last_round {
            return Err(Error::NonIncreasingRound {
                round: ev.round,
                last: self.last_round,
            });
        }
        self.last_round = ev.round;
        let gap = ev.round - self.last_obs_round;
        self.catch_up(gap);

        let (g, p_disclosed) = match &ev.payload {
            Payload::Missed => {
                return Ok(Substitute {
                    g_tilde: DecisionVector::zeros(self.dim),
                    p_used: None,
                })
            }
            Payload::Observed { g, p_disclosed } => (g, *p_disclosed),
        };
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: g.dim(),
            });
        }

        let (factor, p_used) = match &mut self.kind {
            EstimatorKind::Ignore => (1.0, 1.0),
            EstimatorKind::WithKnown => {
                let p = p_disclosed.ok_or(Error::MissingDisclosure { round: ev.round })?;
                (1.0 / checked_probability(p, "disclosed")?, p)
            }
            EstimatorKind::WithPrior { schedule, state, k } => {
                let p = schedule.prior_for(*k).posterior_p(state)?;
                let p = checked_probability(p, "posterior")?;
                *k += 1;
                *state = schedule.prior_for(*k).reset_after_observation();
                (1.0 / p, p)
            }
            EstimatorKind::Uniform => {
                let factor = (gap + 1) as f64;
                (factor, 1.0 / factor)
            }
            EstimatorKind::Gml => (gap as f64, 1.0 / gap as f64),
            EstimatorKind::EmpiricalEp { hist } => {
                let p = hist.record_observation_and_estimate(gap)?;
                (1.0 / checked_probability(p, "empirical")?, p)
            }
        };
        self.last_obs_round = ev.round;
        Ok(Substitute {
            g_tilde: g.scaled(factor)?,
            p_used: Some(p_used),
        })
    }

    /// Brings per-round state up to elapsed gap term `gap`.
    fn catch_up(&mut self, gap: u64) {
        match &mut self.kind {
            EstimatorKind::WithPrior { schedule, state, k } => {
                let prior = schedule.prior_for(*k);
                while state.gap() + 1 < gap {
                    state.advance(prior);
                }
            }
            EstimatorKind::EmpiricalEp { hist } => {
                while hist.elapsed() < gap {
                    hist.advance_round();
                }
            }
            _ => {}
        }
    }
}

fn checked_probability(p: f64, context: &'static str) -> Result<f64> {
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidProbability { value: p, context })
    }
}

/// Additive-noise observation: `g + γ`.
pub fn noisy_passthrough(g: &DecisionVector, noise: &DecisionVector) -> Result<DecisionVector> {
    g.add_scaled(1.0, noise)
}
