//! Online projected sub-gradient descent with an adaptive step size.
//!
//! The optimizer keeps the running sum of squared substitute norms
//! `G² = Σ‖g̃_τ‖²` and steps with `η_t = D / (√2 · G_t)`, which gives the
//! regret guarantee `R_T ≤ √2 · D · G_T` for any sequence of sub-gradients.
//! A zero substitute (a round without an observation) leaves both the
//! decision and the normalizer untouched.

use crate::error::{Error, Result};
use crate::geometry::{DecisionVector, FeasibleSet};

/// State of one descent run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    w: DecisionVector,
    g_sq: f64,
    set: FeasibleSet,
    diameter: f64,
    last_eta: Option<f64>,
}

impl OptimizerState {
    /// Starts at the centre of `set` (ball centre or box midpoint).
    pub fn new(set: FeasibleSet) -> Self {
        let w = set.center();
        let diameter = set.diameter();
        Self {
            w,
            g_sq: 0.0,
            set,
            diameter,
            last_eta: None,
        }
    }

    /// Starts at `w1`, which must already lie in `set`.
    pub fn with_start(set: FeasibleSet, w1: DecisionVector) -> Result<Self> {
        set.center().check_dim(&w1)?;
        if !set.contains(&w1) {
            return Err(Error::InvalidSet("starting point lies outside the set".into()));
        }
        Ok(Self {
            w: w1,
            ..Self::new(set)
        })
    }

    pub fn decision(&self) -> &DecisionVector {
        &self.w
    }

    /// Running `Σ‖g̃‖²` over the updates made so far.
    pub fn g_sq(&self) -> f64 {
        self.g_sq
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    /// Step size used by the most recent update, if any.
    pub fn last_eta(&self) -> Option<f64> {
        self.last_eta
    }

    /// One adaptive update: `w ← Π(w − η g̃)` with `η = D / √(2 G²)`.
    ///
    /// Returns the step size that was used, or `None` for a zero substitute.
    pub fn step(&mut self, g_tilde: &DecisionVector) -> Result<Option<f64>> {
        self.w.check_dim(g_tilde)?;
        let norm_sq = g_tilde.norm_sq();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite("gradient substitute"));
        }
        if norm_sq == 0.0 {
            return Ok(None);
        }
        let g_sq = self.g_sq + norm_sq;
        let eta = self.diameter / (2.0 * g_sq).sqrt();
        self.w = self.set.project(&self.w.add_scaled(-eta, g_tilde)?)?;
        self.g_sq = g_sq;
        self.last_eta = Some(eta);
        Ok(Some(eta))
    }

    /// Update with a caller-chosen step size. Successive calls must use a
    /// nonincreasing sequence of step sizes (debug-asserted).
    pub fn step_with_fixed_eta(&mut self, g_tilde: &DecisionVector, eta: f64) -> Result<()> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidStepSize(eta));
        }
        self.w.check_dim(g_tilde)?;
        debug_assert!(
            self.last_eta.is_none_or(|prev| eta <= prev),
            "step sizes must be nonincreasing"
        );
        self.w = self.set.project(&self.w.add_scaled(-eta, g_tilde)?)?;
        self.g_sq += g_tilde.norm_sq();
        self.last_eta = Some(eta);
        Ok(())
    }
}
