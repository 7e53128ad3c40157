//! Mixture priors over the hidden per-gap observation probability.
//!
//! After every observation a fresh constant probability `x` is drawn from a
//! prior made of beta densities and point masses, and the waiting time until
//! the next observation is geometric in `x`. Given that `d − 1` rounds have
//! already passed without an observation, the probability of observing at
//! the current round is
//!
//! ```text
//!        Σ_b λ_b Q_b p_b  +  Σ_m λ_m F_m p_m
//! p_t = ─────────────────────────────────────
//!            Σ_b λ_b Q_b  +  Σ_m λ_m F_m
//! ```
//!
//! where, with `gap = d − 1`,
//!
//! * `p_b = α / (α + β + gap)` is the beta component's own posterior mean,
//! * `Q_b = Γ(α+β) Γ(β+gap) / (Γ(β) Γ(α+β+gap))` is its survival probability,
//! * `F_m = (1 − p_m)^gap` is the survival probability of a point mass.
//!
//! All three follow one-step recursions, so a [`PriorPosteriorState`] is
//! advanced in `O(components)` per missed round. `Q` and `F` decay
//! geometrically and are kept as logarithms.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the total mixture weight.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaComponent {
    pub alpha: f64,
    pub beta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassComponent {
    pub p: f64,
    pub weight: f64,
}

/// A weighted mixture of beta densities and point masses on `(0, 1]`.
///
/// Components are indexed with the beta densities first, followed by the
/// point masses, in the order they were supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub struct MixturePrior {
    betas: Vec<BetaComponent>,
    masses: Vec<MassComponent>,
    sampler: Option<WeightedIndex<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    #[serde(default, rename = "beta")]
    betas: Vec<BetaComponent>,
    #[serde(default, rename = "mass")]
    masses: Vec<MassComponent>,
}

impl TryFrom<RawPrior> for MixturePrior {
    type Error = Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        Self::new(raw.betas, raw.masses)
    }
}

impl From<MixturePrior> for RawPrior {
    fn from(p: MixturePrior) -> Self {
        Self {
            betas: p.betas,
            masses: p.masses,
        }
    }
}

/// One draw of the hidden observation probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDraw {
    pub p: f64,
    /// Index of the mixture component that produced `p`.
    pub component: usize,
}

impl MixturePrior {
    pub fn new(betas: Vec<BetaComponent>, masses: Vec<MassComponent>) -> Result<Self> {
        if betas.is_empty() && masses.is_empty() {
            return Err(Error::InvalidPrior("at least one component is required".into()));
        }
        for (i, b) in betas.iter().enumerate() {
            if !(b.alpha.is_finite() && b.alpha > 0.0 && b.beta.is_finite() && b.beta > 0.0) {
                return Err(Error::InvalidPrior(format!(
                    "beta component {i}: shape parameters must be positive, got ({}, {})",
                    b.alpha, b.beta
                )));
            }
        }
        for (i, m) in masses.iter().enumerate() {
            if !(m.p > 0.0 && m.p <= 1.0) {
                return Err(Error::InvalidPrior(format!(
                    "mass component {i}: p must lie in (0, 1], got {}",
                    m.p
                )));
            }
        }
        let weights: Vec<f64> = betas
            .iter()
            .map(|b| b.weight)
            .chain(masses.iter().map(|m| m.weight))
            .collect();
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidPrior(format!(
                "weights must be nonnegative, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidPrior(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let sampler = if weights.len() > 1 {
            Some(WeightedIndex::new(&weights).map_err(|e| Error::InvalidPrior(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            betas,
            masses,
            sampler,
        })
    }

    pub fn single_beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            vec![BetaComponent {
                alpha,
                beta,
                weight: 1.0,
            }],
            vec![],
        )
    }

    pub fn single_mass(p: f64) -> Result<Self> {
        Self::new(vec![], vec![MassComponent { p, weight: 1.0 }])
    }

    pub fn betas(&self) -> &[BetaComponent] {
        &self.betas
    }

    pub fn masses(&self) -> &[MassComponent] {
        &self.masses
    }

    pub fn num_components(&self) -> usize {
        self.betas.len() + self.masses.len()
    }

    /// State for the first round after an observation (elapsed gap term 1).
    pub fn reset_after_observation(&self) -> PriorPosteriorState {
        PriorPosteriorState {
            beta_p: self.betas.iter().map(|b| b.alpha / (b.alpha + b.beta)).collect(),
            beta_ln_q: vec![0.0; self.betas.len()],
            mass_ln_f: vec![0.0; self.masses.len()],
            gap: 0,
        }
    }

    /// Conditional probability of observing in the round described by `state`.
    pub fn posterior_p(&self, state: &PriorPosteriorState) -> Result<f64> {
        self.check_state(state);
        let terms = || {
            let betas = self
                .betas
                .iter()
                .zip(state.beta_ln_q.iter().zip(&state.beta_p))
                .map(|(b, (ln_q, p))| (b.weight, ln_q, *p));
            let masses = self
                .masses
                .iter()
                .zip(&state.mass_ln_f)
                .map(|(m, ln_f)| (m.weight, ln_f, m.p));
            betas
                .chain(masses)
                .filter(|(w, _, _)| *w > 0.0)
                .map(|(w, ln_s, p)| (w.ln() + ln_s, p))
        };
        let shift = terms().map(|(lw, _)| lw).fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::PosteriorUnderflow { gap: state.gap });
        }
        let (num, den) = terms().fold((0.0, 0.0), |(num, den), (lw, p)| {
            let w = (lw - shift).exp();
            (num + w * p, den + w)
        });
        Ok((num / den).min(1.0))
    }

    /// Smallest component opinion at the current gap; `posterior_p` never
    /// falls below it since it is a convex combination of those opinions.
    pub fn posterior_lower_bound(&self, state: &PriorPosteriorState) -> f64 {
        self.check_state(state);
        let betas = self
            .betas
            .iter()
            .zip(&state.beta_p)
            .filter(|(b, _)| b.weight > 0.0)
            .map(|(_, p)| *p);
        let masses = self.masses.iter().filter(|m| m.weight > 0.0).map(|m| m.p);
        betas.chain(masses).fold(f64::INFINITY, f64::min)
    }

    /// Draws a constant observation probability and reports which component
    /// produced it.
    pub fn sample_gap_probability<R: Rng + ?Sized>(&self, rng: &mut R) -> GapDraw {
        let component = match &self.sampler {
            Some(idx) => idx.sample(rng),
            None => 0,
        };
        let p = if let Some(b) = self.betas.get(component) {
            let dist = Beta::new(b.alpha, b.beta).expect("validated shape parameters");
            loop {
                let x: f64 = dist.sample(rng);
                if x > 0.0 {
                    break x;
                }
            }
        } else {
            self.masses[component - self.betas.len()].p
        };
        GapDraw { p, component }
    }

    fn check_state(&self, state: &PriorPosteriorState) {
        debug_assert_eq!(state.beta_p.len(), self.betas.len());
        debug_assert_eq!(state.mass_ln_f.len(), self.masses.len());
    }
}

impl fmt::Display for MixturePrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for b in &self.betas {
            parts.push(format!("{}·Beta({}, {})", b.weight, b.alpha, b.beta));
        }
        for m in &self.masses {
            parts.push(format!("{}·δ({})", m.weight, m.p));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// Per-component posterior bookkeeping while waiting for the next observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPosteriorState {
    beta_p: Vec<f64>,
    beta_ln_q: Vec<f64>,
    mass_ln_f: Vec<f64>,
    gap: u64,
}

impl PriorPosteriorState {
    /// Rounds already waited without an observation (`t − t_{k−1} − 1`).
    pub fn gap(&self) -> u64 {
        self.gap
    }

    /// Beta components' conditional observation probabilities.
    pub fn beta_p(&self) -> &[f64] {
        &self.beta_p
    }

    /// Survival probability of beta component `b`.
    pub fn q(&self, b: usize) -> f64 {
        self.beta_ln_q[b].exp()
    }

    /// Survival probability of point mass `m`.
    pub fn f(&self, m: usize) -> f64 {
        self.mass_ln_f[m].exp()
    }

    /// Moves to the next round without an observation.
    pub fn advance(&mut self, prior: &MixturePrior) {
        prior.check_state(self);
        let gap = self.gap as f64;
        for ((b, p), ln_q) in prior
            .betas
            .iter()
            .zip(self.beta_p.iter_mut())
            .zip(self.beta_ln_q.iter_mut())
        {
            let s = b.alpha + b.beta + gap;
            *p *= s / (s + 1.0);
            *ln_q += (-b.alpha / s).ln_1p();
        }
        for (m, ln_f) in prior.masses.iter().zip(self.mass_ln_f.iter_mut()) {
            *ln_f += (-m.p).ln_1p();
        }
        self.gap += 1;
    }
}

/// Source of the prior in force for each observation index.
///
/// The built-in experiments use one stationary prior, for which
/// [`MixturePrior`] implements this trait directly.
pub trait PriorSchedule: fmt::Debug + Send + Sync {
    /// Prior generating the probability for the `k`-th observation (1-based).
    fn prior_for(&self, k: u64) -> &MixturePrior;
}

impl PriorSchedule for MixturePrior {
    fn prior_for(&self, _k: u64) -> &MixturePrior {
        self
    }
}
