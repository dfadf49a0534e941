//! Exact belief calculus for one arm.
//!
//! While an arm stays passive, the belief (probability of being in state
//! 1) follows the deterministic one-step update
//!
//! ```text
//! tau_1(b) = b * p11p + (1 - b) * p01p
//! ```
//!
//! whose u-fold composition has the closed form
//!
//! ```text
//! tau_u(b) = b* + (p11p - p01p)^u * (b - b*),   b* = p01p / (1 + p01p - p11p)
//! ```
//!
//! with `b*` the stationary belief. All reachable beliefs therefore live
//! on two chains indexed by the last observation `omega` and the number
//! of rounds `u` since that observation, with head values `b_omega(1) =
//! P(active transition from omega into state 1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TransitionModel;

/// Last observed latent state of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Obs {
    /// Observed in state 0 (the non-rewarding state).
    Zero = 0,
    /// Observed in state 1 (the rewarding state).
    One = 1,
}

impl Obs {
    pub const BOTH: [Obs; 2] = [Obs::Zero, Obs::One];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_good(good: bool) -> Self {
        if good {
            Obs::One
        } else {
            Obs::Zero
        }
    }
}

/// A reachable belief state: observation `omega` made `u` rounds ago
/// (`u >= 1`; the chain head is `u = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BeliefStateId {
    pub omega: Obs,
    pub u: usize,
}

impl BeliefStateId {
    pub fn new(omega: Obs, u: usize) -> Self {
        debug_assert!(u >= 1, "chain position starts at 1");
        Self { omega, u }
    }
}

/// Monotonicity class of the two belief chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeliefTrend {
    /// Both chains are non-increasing in `u` (NIB).
    NonIncreasingBelief,
    /// Chain 1 decays but chain 0 rises toward the stationary belief (SB).
    SplitBelief,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("belief chain horizon must be at least 1")]
    EmptyHorizon,
    #[error("discount factor {0} is not in [0,1)")]
    InvalidDiscount(f64),
}

/// Stationary belief `b* = p01p / (1 + p01p - p11p)`, the fixed point of
/// the one-step passive update.
///
/// The denominator is at least `p01p > 0` for any valid model, so no
/// extra guard is needed.
pub fn stationary_belief(model: &TransitionModel) -> f64 {
    model.p01p() / (1.0 + model.p01p() - model.p11p())
}

/// Propagates a belief `steps` rounds forward under the passive action,
/// using the closed form (O(1) in `steps`). `tau(model, 0, b) == b`.
pub fn tau(model: &TransitionModel, steps: u32, b: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&b), "belief must be in [0,1]");
    if steps == 0 {
        return b;
    }
    let b_star = stationary_belief(model);
    let decay = (model.p11p() - model.p01p()).powi(steps as i32);
    b_star + decay * (b - b_star)
}

/// The two belief chains of one arm, truncated at horizon `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefChains {
    horizon: usize,
    /// `values[omega][u - 1] = b_omega(u)`.
    values: [Vec<f64>; 2],
    b_star: f64,
}

impl BeliefChains {
    /// Builds both chains: `b_omega(u) = tau_{u-1}(P^a(omega -> 1))`.
    pub fn build(model: &TransitionModel, t: usize) -> Result<Self, BeliefError> {
        if t == 0 {
            return Err(BeliefError::EmptyHorizon);
        }
        let b_star = stationary_belief(model);
        let values = [Obs::Zero, Obs::One].map(|omega| {
            let head = model.active_to_good(omega == Obs::One);
            let mut chain = Vec::with_capacity(t);
            let mut b = head;
            for _ in 0..t {
                chain.push(b);
                b = tau(model, 1, b);
            }
            chain
        });
        Ok(Self {
            horizon: t,
            values,
            b_star,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn b_star(&self) -> f64 {
        self.b_star
    }

    /// Belief value of a chain state; `u` is clamped to the horizon, so
    /// callers that freeze deep states at `b_omega(T)` can pass `u > T`.
    pub fn belief(&self, id: BeliefStateId) -> f64 {
        let u = id.u.min(self.horizon);
        self.values[id.omega.index()][u - 1]
    }

    /// Full chain for one observation, `u = 1..=T`.
    pub fn chain(&self, omega: Obs) -> &[f64] {
        &self.values[omega.index()]
    }

    /// All states sorted as stored: chain 0 then chain 1, `u` ascending.
    pub fn states(&self) -> impl Iterator<Item = BeliefStateId> + '_ {
        Obs::BOTH
            .into_iter()
            .flat_map(move |omega| (1..=self.horizon).map(move |u| BeliefStateId::new(omega, u)))
    }

    /// Scans both chains for monotonicity: non-increasing belief iff
    /// `b_omega(u) >= b_omega(u+1)` for every `u < T` and both chains.
    pub fn classify_trend(&self) -> BeliefTrend {
        let non_increasing = self
            .values
            .iter()
            .all(|chain| chain.windows(2).all(|w| w[0] >= w[1]));
        if non_increasing {
            BeliefTrend::NonIncreasingBelief
        } else {
            BeliefTrend::SplitBelief
        }
    }
}

/// Sufficient condition for a forward threshold policy (act on beliefs at
/// or below a threshold) to be optimal at every subsidy:
///
/// ```text
/// (p11p - p01p) * (1 + beta * (p11a - p01a)) * (1 - beta) >= p11a - p01a
/// ```
pub fn forward_threshold_condition(model: &TransitionModel, beta: f64) -> Result<bool, BeliefError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(BeliefError::InvalidDiscount(beta));
    }
    let dp = model.p11p() - model.p01p();
    let da = model.p11a() - model.p01a();
    Ok(dp * (1.0 + beta * da) * (1.0 - beta) >= da)
}

/// Sufficient condition for a reverse threshold policy (act on beliefs
/// above a threshold) to be optimal at every subsidy:
///
/// ```text
/// (p11p - p01p) * (1 + beta * (p11a - p01a) / (1 - beta)) <= p11a - p01a
/// ```
///
/// `beta = 1` is rejected (the left side diverges).
pub fn reverse_threshold_condition(model: &TransitionModel, beta: f64) -> Result<bool, BeliefError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(BeliefError::InvalidDiscount(beta));
    }
    let dp = model.p11p() - model.p01p();
    let da = model.p11a() - model.p01a();
    Ok(dp * (1.0 + beta * da / (1.0 - beta)) <= da)
}
