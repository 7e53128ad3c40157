//! Loss-sequence generators, the stochastic observation process and the
//! additive-noise channel.
//!
//! A run alternates between an [`Environment`], which produces the round's
//! loss and a sub-gradient at the learner's decision, and an
//! [`ObservationProcess`], which decides whether that sub-gradient reaches
//! the learner. After every observation the process draws a fresh hidden
//! probability from its prior and tells the environment which mixture
//! component produced it through [`Environment::begin_segment`].

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::{PartitionRule, TabularDataset};
use crate::error::{Error, Result};
use crate::estimators::ObservationEvent;
use crate::geometry::DecisionVector;
use crate::priors::{GapDraw, PriorSchedule};
use crate::rng::TrialRng;

/// What the environment reveals about the hidden observation probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disclosure {
    /// The probability itself accompanies every observation.
    Known,
    /// Only the prior it is drawn from is public.
    PriorOnly,
    /// Nothing is disclosed.
    None,
}

/// Bernoulli observations with a hidden probability that is redrawn from
/// the prior after every observation.
#[derive(Debug, Clone)]
pub struct ObservationProcess {
    schedule: Arc<dyn PriorSchedule>,
    k: u64,
    current: GapDraw,
    disclosure: Disclosure,
    rng: TrialRng,
}

impl ObservationProcess {
    /// Draws the probability for the first observation.
    pub fn new(schedule: Arc<dyn PriorSchedule>, disclosure: Disclosure, mut rng: TrialRng) -> Self {
        let current = schedule.prior_for(1).sample_gap_probability(&mut rng);
        Self {
            schedule,
            k: 1,
            current,
            disclosure,
            rng,
        }
    }

    /// The hidden probability in force.
    pub fn current_p(&self) -> f64 {
        self.current.p
    }

    /// Mixture component that produced [`current_p`](Self::current_p).
    pub fn current_component(&self) -> usize {
        self.current.component
    }

    pub fn disclosure(&self) -> Disclosure {
        self.disclosure
    }

    /// Decides whether `g` is observed at `round`.
    pub fn observe(&mut self, round: u64, g: &DecisionVector) -> ObservationEvent {
        let hit = self.rng.random::<f64>() < self.current.p;
        if !hit {
            return ObservationEvent::missed(round);
        }
        let disclosed = (self.disclosure == Disclosure::Known).then_some(self.current.p);
        self.k += 1;
        self.current = self
            .schedule
            .prior_for(self.k)
            .sample_gap_probability(&mut self.rng);
        ObservationEvent::observed(round, g.clone(), disclosed)
    }
}

/// One round's loss at the learner's decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLoss {
    pub loss: f64,
    /// A sub-gradient of the round's loss at the decision.
    pub gradient: DecisionVector,
    /// Dataset row served, for dataset environments.
    pub row: Option<usize>,
    /// Partition the row was drawn from, in semi-adversarial mode.
    pub partition: Option<usize>,
}

pub trait Environment {
    fn dim(&self) -> usize;

    /// Called before the first round and after every observation with the
    /// prior component that generated the new hidden probability.
    fn begin_segment(&mut self, component: usize);

    /// Loss and sub-gradient at `w`, or `None` once the data is exhausted.
    fn next_round(&mut self, w: &DecisionVector) -> Result<Option<RoundLoss>>;
}

/// How the adversary picks the sign of its gradient for each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignLaw {
    /// A fair coin, independent of everything else.
    Independent,
    /// `+1` while component 0 generated the hidden probability, `−1`
    /// otherwise. Still a fair coin under an evenly weighted two-component
    /// prior, but correlated with how long the segment lasts.
    ComponentCoupled,
}

/// Linear losses `f_t(w) = s·scale·1ᵀw` with the sign `s` held fixed
/// between observations.
#[derive(Debug, Clone)]
pub struct AdversarialLinearEnv {
    dim: usize,
    scale: f64,
    sign: f64,
    law: SignLaw,
    rng: TrialRng,
}

impl AdversarialLinearEnv {
    pub fn new(dim: usize, scale: f64, law: SignLaw, rng: TrialRng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("dimension must be positive".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::NonFinite("scale"));
        }
        Ok(Self {
            dim,
            scale,
            sign: 1.0,
            law,
            rng,
        })
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Norm of every emitted gradient.
    pub fn gradient_norm(&self) -> f64 {
        self.scale * (self.dim as f64).sqrt()
    }

    /// The gradient for the current segment.
    pub fn gradient(&self) -> DecisionVector {
        DecisionVector::filled(self.dim, self.sign * self.scale).expect("finite scale")
    }
}

impl Environment for AdversarialLinearEnv {
    fn dim(&self) -> usize {
        self.dim
    }

    fn begin_segment(&mut self, component: usize) {
        self.sign = match self.law {
            SignLaw::Independent => {
                if self.rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SignLaw::ComponentCoupled => {
                if component == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
    }

    fn next_round(&mut self, w: &DecisionVector) -> Result<Option<RoundLoss>> {
        let gradient = self.gradient();
        let loss = gradient.inner(w)?;
        Ok(Some(RoundLoss {
            loss,
            gradient,
            row: None,
            partition: None,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `|wᵀx − y|`.
    AbsoluteDeviation,
    /// Cross-entropy of `h = 1/(1 + e^{−wᵀx})` against `y ∈ {0, 1}`.
    Logistic,
}

impl LossKind {
    /// Loss and sub-gradient at `w` for sample `(x, y)`.
    pub fn evaluate(self, w: &DecisionVector, x: &DecisionVector, y: f64) -> Result<(f64, DecisionVector)> {
        match self {
            LossKind::AbsoluteDeviation => absolute_deviation(w, x, y),
            LossKind::Logistic => logistic(w, x, y),
        }
    }
}

/// `|wᵀx − y|` with sub-gradient `sign(wᵀx − y)·x`, taking `sign(0) = 0`.
pub fn absolute_deviation(w: &DecisionVector, x: &DecisionVector, y: f64) -> Result<(f64, DecisionVector)> {
    let r = w.inner(x)? - y;
    let s = if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok((r.abs(), x.scaled(s)?))
}

/// Logistic loss with gradient `(h − y)·x`.
pub fn logistic(w: &DecisionVector, x: &DecisionVector, y: f64) -> Result<(f64, DecisionVector)> {
    let z = w.inner(x)?;
    let loss = softplus(z) - y * z;
    let h = sigmoid(z);
    Ok((loss, x.scaled(h - y)?))
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Order in which dataset rows reach the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Arrival {
    /// One shuffled pass over the concatenated copies.
    Randomized,
    /// Rows between two observations all come from the partition assigned to
    /// the prior component in force; `component_partitions[c]` is the
    /// partition served while component `c` is active.
    SemiAdversarial {
        rule: PartitionRule,
        component_partitions: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
enum Order {
    Sequence {
        rows: Vec<usize>,
        next: usize,
    },
    Queues {
        queues: [Vec<usize>; 2],
        next: [usize; 2],
        map: Vec<usize>,
        active: usize,
    },
}

/// Serves dataset rows as online losses.
#[derive(Debug, Clone)]
pub struct DatasetEnv {
    data: Arc<TabularDataset>,
    loss: LossKind,
    order: Order,
    budget: u64,
    served: u64,
    rng: TrialRng,
}

impl DatasetEnv {
    /// `copies` concatenated passes over the data, cut to `take` rows when
    /// given.
    pub fn new(
        data: Arc<TabularDataset>,
        loss: LossKind,
        arrival: &Arrival,
        copies: u64,
        take: Option<u64>,
        mut rng: TrialRng,
    ) -> Result<Self> {
        let n = data.len();
        let available = copies.saturating_mul(n as u64);
        let budget = take.map_or(available, |t| t.min(available));
        if budget == 0 {
            return Err(Error::Dataset("empty sample stream (copies or take is 0)".into()));
        }
        let order = match arrival {
            Arrival::Randomized => {
                let mut rows: Vec<usize> = (0..copies).flat_map(|_| 0..n).collect();
                rows.shuffle(&mut rng);
                rows.truncate(budget as usize);
                Order::Sequence { rows, next: 0 }
            }
            Arrival::SemiAdversarial {
                rule,
                component_partitions,
            } => {
                if let Some(&bad) = component_partitions.iter().find(|&&q| q > 1) {
                    return Err(Error::Dataset(format!(
                        "component_partitions entries must be 0 or 1, got {bad}"
                    )));
                }
                if component_partitions.is_empty() {
                    return Err(Error::Dataset("component_partitions is empty".into()));
                }
                let queues = crate::datasets::partition(&data, *rule, &mut rng)?;
                Order::Queues {
                    queues,
                    next: [0, 0],
                    map: component_partitions.clone(),
                    active: component_partitions[0],
                }
            }
        };
        Ok(Self {
            data,
            loss,
            order,
            budget,
            served: 0,
            rng,
        })
    }

    /// Rows the run may still serve.
    pub fn remaining(&self) -> u64 {
        self.budget - self.served
    }
}

impl Environment for DatasetEnv {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn begin_segment(&mut self, component: usize) {
        if let Order::Queues { map, active, .. } = &mut self.order {
            *active = map.get(component).copied().unwrap_or(map[component % map.len()]);
        }
    }

    fn next_round(&mut self, w: &DecisionVector) -> Result<Option<RoundLoss>> {
        if self.served >= self.budget {
            return Ok(None);
        }
        let (row, partition) = match &mut self.order {
            Order::Sequence { rows, next } => {
                let row = rows[*next];
                *next += 1;
                (row, None)
            }
            Order::Queues {
                queues,
                next,
                active,
                ..
            } => {
                let q = *active;
                if next[q] == queues[q].len() {
                    queues[q].shuffle(&mut self.rng);
                    next[q] = 0;
                }
                let row = queues[q][next[q]];
                next[q] += 1;
                (row, Some(q))
            }
        };
        self.served += 1;
        let (loss, gradient) = self.loss.evaluate(w, self.data.row(row), self.data.target(row))?;
        Ok(Some(RoundLoss {
            loss,
            gradient,
            row: Some(row),
            partition,
        }))
    }
}

/// Shape of the zero-mean perturbation added to observed sub-gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Spherical Gaussian.
    Gaussian,
    /// Independent random signs on every coordinate.
    Rademacher,
}

/// Zero-mean noise with `E‖γ‖² = σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::NonFinite("noise sigma"));
        }
        Ok(Self { kind, sigma })
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> DecisionVector {
        let s = self.sigma / (dim as f64).sqrt();
        let coords = (0..dim)
            .map(|_| match self.kind {
                NoiseKind::Gaussian => {
                    let z: f64 = StandardNormal.sample(rng);
                    s * z
                }
                NoiseKind::Rademacher => {
                    if rng.random::<bool>() {
                        s
                    } else {
                        -s
                    }
                }
            })
            .collect();
        DecisionVector::new(coords).expect("finite noise")
    }
}

/// `(D / (2√2))·√(Σ L_k² gap_k²)`: the regret any causal learner can be
/// forced into when the gradient norm is `L_k` over the `k`-th gap.
pub fn adversarial_lower_bound(gaps: &[u64], norms: &[f64], diameter: f64) -> Result<f64> {
    if gaps.len() != norms.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gaps but {} gradient norms",
            gaps.len(),
            norms.len()
        )));
    }
    let s: f64 = gaps
        .iter()
        .zip(norms)
        .map(|(&g, &l)| (l * g as f64).powi(2))
        .sum();
    Ok(diameter / (2.0 * std::f64::consts::SQRT_2) * s.sqrt())
}
