//! Dense decision vectors and Euclidean projection onto simple convex sets.
//!
//! Every iterate of the descent loop lives in a [`FeasibleSet`]; the two
//! shapes supported here (balls and axis-aligned boxes) have closed-form
//! projections, radial scaling and componentwise clamping respectively.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used for membership tests.
pub const TOLERANCE: f64 = 1e-12;

/// A point (or gradient) in `R^N` with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    /// Wraps `coords`, rejecting NaN and infinite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::NonFinite("decision vector"))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The vector with every coordinate equal to `value`.
    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// True when every coordinate is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.dot(other))
    }

    /// `self * factor`, failing if the product overflows.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|c| c * factor).collect())
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.euclid(other))
    }

    pub(crate) fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            })
        }
    }
}

impl fmt::Debug for DecisionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for DecisionVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<DecisionVector> for Vec<f64> {
    fn from(v: DecisionVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for DecisionVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Squared Euclidean norm.
pub fn norm_sq(w: &DecisionVector) -> f64 {
    w.norm_sq()
}

/// Euclidean inner product; errors on a dimension mismatch.
pub fn inner(w: &DecisionVector, v: &DecisionVector) -> Result<f64> {
    w.inner(v)
}

/// A closed convex set with a cheap Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Ball {
        center: DecisionVector,
        radius: f64,
    },
    Box {
        lower: DecisionVector,
        upper: DecisionVector,
    },
}

impl FeasibleSet {
    pub fn ball(center: DecisionVector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Ball { center, radius })
    }

    /// Origin-centred ball in `dim` dimensions.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(DecisionVector::zeros(dim), radius)
    }

    pub fn boxed(lower: DecisionVector, upper: DecisionVector) -> Result<Self> {
        lower.check_dim(&upper)?;
        if lower.as_slice().iter().zip(upper.as_slice()).any(|(l, u)| l > u) {
            return Err(Error::InvalidSet("box lower bound exceeds upper bound".into()));
        }
        let set = Self::Box { lower, upper };
        if set.diameter() <= 0.0 {
            return Err(Error::InvalidSet("box has zero diameter".into()));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } => center.dim(),
            Self::Box { lower, .. } => lower.dim(),
        }
    }

    /// Largest distance between two members of the set.
    pub fn diameter(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => 2.0 * radius,
            Self::Box { lower, upper } => lower.distance(upper).unwrap_or(0.0),
        }
    }

    /// Ball centre or box midpoint; the default starting decision.
    pub fn center(&self) -> DecisionVector {
        match self {
            Self::Ball { center, .. } => center.clone(),
            Self::Box { lower, upper } => DecisionVector(
                lower
                    .as_slice()
                    .iter()
                    .zip(upper.as_slice())
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect(),
            ),
        }
    }

    /// Membership up to [`TOLERANCE`].
    pub fn contains(&self, w: &DecisionVector) -> bool {
        if w.dim() != self.dim() {
            return false;
        }
        match self {
            Self::Ball { center, radius } => w.euclid(center) <= radius + TOLERANCE,
            Self::Box { lower, upper } => w
                .as_slice()
                .iter()
                .zip(lower.as_slice().iter().zip(upper.as_slice()))
                .all(|(x, (l, u))| *x >= l - TOLERANCE && *x <= u + TOLERANCE),
        }
    }

    /// Closest member of the set to `w` in Euclidean distance.
    pub fn project(&self, w: &DecisionVector) -> Result<DecisionVector> {
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.dim(),
            });
        }
        match self {
            Self::Ball { center, radius } => {
                let dist = w.euclid(center);
                if dist <= radius + TOLERANCE {
                    return Ok(w.clone());
                }
                let shrink = radius / dist;
                Ok(DecisionVector(
                    w.as_slice()
                        .iter()
                        .zip(center.as_slice())
                        .map(|(x, c)| c + shrink * (x - c))
                        .collect(),
                ))
            }
            Self::Box { lower, upper } => Ok(DecisionVector(
                w.as_slice()
                    .iter()
                    .zip(lower.as_slice().iter().zip(upper.as_slice()))
                    .map(|(x, (l, u))| x.clamp(*l, *u))
                    .collect(),
            )),
        }
    }
}

impl DecisionVector {
    fn euclid(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Projection as a free function.
pub fn project(set: &FeasibleSet, w: &DecisionVector) -> Result<DecisionVector> {
    set.project(w)
}

/// Diameter as a free function.
pub fn diameter(set: &FeasibleSet) -> f64 {
    set.diameter()
}
