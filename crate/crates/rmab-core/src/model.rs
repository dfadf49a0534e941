//! Per-arm transition model and its validity constraints.
//!
//! An arm is a two-state Markov process (state 1 is the rewarding state)
//! with one transition row per action. Only the probabilities of landing
//! in state 1 are stored: `p01p` is P(0 -> 1) under the passive action,
//! `p11a` is P(1 -> 1) under the active action, and so on.
//!
//! Two validity regimes exist. The natural regime adds the structural
//! constraints the planner's guarantees rely on: staying good is easier
//! than becoming good, and intervening helps from either state. The
//! relaxed regime only requires all four probabilities to lie strictly
//! inside (0, 1) and is used by condition checkers and random scans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation regime for [`TransitionModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strictness {
    /// Strict structural constraints: `p01p < p11p`, `p01a < p11a`
    /// (chains keep their ordering) and `p01p < p01a`, `p11p < p11a`
    /// (acting helps).
    StrictNatural,
    /// Only requires every probability to lie strictly inside (0, 1).
    Relaxed,
}

/// Constraint violations reported by [`TransitionModel::new`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A probability is outside the open interval (0, 1). Zero and one
    /// are excluded so every belief stays strictly interior.
    #[error("{name} = {value} is outside (0,1); transition probabilities must be nonzero and below one")]
    OutOfRange { name: &'static str, value: f64 },
    /// An ordering constraint of the natural regime is violated.
    #[error("natural constraint {constraint} violated: {lhs_name} = {lhs} must be < {rhs_name} = {rhs}")]
    OrderingViolated {
        constraint: &'static str,
        lhs_name: &'static str,
        lhs: f64,
        rhs_name: &'static str,
        rhs: f64,
    },
}

/// Validated transition probabilities for one arm.
///
/// Immutable after construction; all planner code takes it by reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    p01p: f64,
    p11p: f64,
    p01a: f64,
    p11a: f64,
    strictness: Strictness,
}

fn check_range(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ModelError::OutOfRange { name, value })
    }
}

fn check_order(
    constraint: &'static str,
    lhs_name: &'static str,
    lhs: f64,
    rhs_name: &'static str,
    rhs: f64,
) -> Result<(), ModelError> {
    if lhs < rhs {
        Ok(())
    } else {
        Err(ModelError::OrderingViolated {
            constraint,
            lhs_name,
            lhs,
            rhs_name,
            rhs,
        })
    }
}

impl TransitionModel {
    /// Validates the four probabilities under the given regime.
    pub fn new(
        p01p: f64,
        p11p: f64,
        p01a: f64,
        p11a: f64,
        strictness: Strictness,
    ) -> Result<Self, ModelError> {
        check_range("p01p", p01p)?;
        check_range("p11p", p11p)?;
        check_range("p01a", p01a)?;
        check_range("p11a", p11a)?;
        if strictness == Strictness::StrictNatural {
            check_order("(i)", "p01p", p01p, "p11p", p11p)?;
            check_order("(i)", "p01a", p01a, "p11a", p11a)?;
            check_order("(ii)", "p01p", p01p, "p01a", p01a)?;
            check_order("(ii)", "p11p", p11p, "p11a", p11a)?;
        }
        Ok(Self {
            p01p,
            p11p,
            p01a,
            p11a,
            strictness,
        })
    }

    /// Shorthand for [`Strictness::StrictNatural`] validation.
    pub fn strict_natural(p01p: f64, p11p: f64, p01a: f64, p11a: f64) -> Result<Self, ModelError> {
        Self::new(p01p, p11p, p01a, p11a, Strictness::StrictNatural)
    }

    /// Shorthand for [`Strictness::Relaxed`] validation.
    pub fn relaxed(p01p: f64, p11p: f64, p01a: f64, p11a: f64) -> Result<Self, ModelError> {
        Self::new(p01p, p11p, p01a, p11a, Strictness::Relaxed)
    }

    pub fn p01p(&self) -> f64 {
        self.p01p
    }

    pub fn p11p(&self) -> f64 {
        self.p11p
    }

    pub fn p01a(&self) -> f64 {
        self.p01a
    }

    pub fn p11a(&self) -> f64 {
        self.p11a
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    /// P(next = 1 | current = `from_good`) under the passive action.
    pub fn passive_to_good(&self, from_good: bool) -> f64 {
        if from_good {
            self.p11p
        } else {
            self.p01p
        }
    }

    /// P(next = 1 | current = `from_good`) under the active action.
    pub fn active_to_good(&self, from_good: bool) -> f64 {
        if from_good {
            self.p11a
        } else {
            self.p01a
        }
    }
}
