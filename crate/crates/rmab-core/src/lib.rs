//! Planning and simulation for binary-state restless bandits in which
//! acting on an arm reveals its latent state exactly, while passive arms
//! evolve unobserved.
//!
//! The crate is organized around one arm's transition model and the two
//! deterministic belief chains it induces (one per last observation):
//!
//! - [`model`] — validated passive/active transition probabilities.
//! - [`belief`] — closed-form belief propagation, stationary belief,
//!   chain construction, belief-trend classification, and the threshold
//!   optimality conditions.
//! - [`whittle`] — the fast average-reward Whittle index: occupancy
//!   frequencies of forward threshold policies, subsidy-linear average
//!   reward, pairwise subsidy solves, and the sequential index algorithm.
//! - [`oracle`] — slow exact references: subsidized value iteration,
//!   binary-search Whittle indices, exhaustive threshold-policy
//!   enumeration, numeric indexability and policy-shape checks.
//! - [`sim`] — multi-arm cohort rollouts under a per-round action budget,
//!   baseline policies, and the intervention-benefit metric.

pub mod belief;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod util;
pub mod whittle;

pub use belief::{BeliefChains, BeliefStateId, BeliefTrend, Obs};
pub use model::{ModelError, Strictness, TransitionModel};
pub use whittle::{ForwardThresholdPolicy, WhittleTable};
