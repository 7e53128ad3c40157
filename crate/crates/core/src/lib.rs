//! Online convex optimization when sub-gradients are only observed at
//! random.
//!
//! The learner runs projected sub-gradient descent with the adaptive step
//! `η_t = D / √(2 Σ‖g̃_s‖²)`. On a round whose sub-gradient is lost it feeds
//! a zero vector; on an observed round it feeds the sub-gradient rescaled by
//! an estimate of the inverse observation probability. The estimators in
//! [`estimators`] differ only in where that estimate comes from.
//!
//! ```
//! use apgd::{DecisionVector, FeasibleSet, OptimizerState};
//!
//! let mut opt = OptimizerState::new(FeasibleSet::centered_ball(2, 1.0)?);
//! let eta = opt.step(&DecisionVector::new(vec![3.0, 4.0])?)?;
//! assert_eq!(eta, Some(2.0 / (2f64.sqrt() * 5.0)));
//! assert!(opt.decision().norm() <= 1.0);
//! # Ok::<(), apgd::Error>(())
//! ```

pub mod config;
pub mod datasets;
pub mod descent;
pub mod empirical;
pub mod environments;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod priors;
pub mod rng;

pub use config::ExperimentConfig;
pub use descent::OptimizerState;
pub use empirical::GapHistogram;
pub use error::{Error, Result};
pub use estimators::{Estimator, ObservationEvent, Substitute, Variant};
pub use experiment::Experiment;
pub use geometry::{DecisionVector, FeasibleSet};
pub use priors::{MixturePrior, PriorPosteriorState};
