//! Multi-arm cohort simulation under a per-round action budget.
//!
//! Each round the policy picks `k` of `N` arms. Acting on an arm reveals
//! its current latent state (the observation that seeds its belief
//! chain) and the arm transitions under the active matrix; passive arms
//! transition unobserved and their belief id walks down the chain.
//!
//! Round timing: the reward of round `t` counts the latent states at the
//! start of the round, so actions influence rewards from the next round
//! onward through transitions, and the observation made in round `t`
//! reveals the state that generated round `t`'s reward.
//!
//! At `t = 0` each arm's latent state is drawn from its stationary
//! belief, a fictitious observation equal to that state starts the
//! belief chain at `(omega_0, 1)`, and the arm transitions passively
//! into round 1.
//!
//! Policies are compared with common random numbers: one uniform draw
//! per arm per round is consumed by whichever transition applies, so
//! policies that choose the same action on an arm see the same outcome.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefChains, BeliefError, BeliefStateId, Obs};
use crate::model::TransitionModel;
use crate::oracle::{full_observation_whittle, OracleError};
use crate::whittle::{compute_index_table, WhittleTable};

/// Tolerance for the fully-observed oracle index computation; the
/// resulting two indices only rank arms, so modest precision suffices.
const ORACLE_INDEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cohort has no arms")]
    EmptyCohort,
    #[error("budget k = {k} exceeds cohort size {n}")]
    BudgetExceedsCohort { k: usize, n: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("action vector has {got} active arms, expected {expected}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("reference index tables required for the reference policy; none attached")]
    MissingReferenceTables,
    #[error("{0} tables attached for a cohort of {1} arms")]
    TableCountMismatch(usize, usize),
    #[error("intervention benefit needs never_act and oracle results")]
    MissingBaselines,
    #[error("intervention benefit undefined: oracle - never_act = {denominator} <= 0")]
    DegenerateBenefit { denominator: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Action-selection rule for the rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Rank by the fast per-state Whittle index, act on the top k.
    ThresholdWhittle,
    /// Same ranking rule, driven by reference binary-search indices.
    ReferenceWhittle,
    /// Rank by the one-step belief gain of acting.
    Myopic,
    /// Uniform k-subset.
    Random,
    /// Reads latent states and ranks by the fully-observed index.
    Oracle,
    /// Never acts, regardless of budget.
    NeverAct,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::ThresholdWhittle,
        PolicyKind::ReferenceWhittle,
        PolicyKind::Myopic,
        PolicyKind::Random,
        PolicyKind::Oracle,
        PolicyKind::NeverAct,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::ThresholdWhittle => "threshold_whittle",
            PolicyKind::ReferenceWhittle => "reference_whittle",
            PolicyKind::Myopic => "myopic",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
            PolicyKind::NeverAct => "never_act",
        }
    }

    fn discriminant(self) -> u8 {
        match self {
            PolicyKind::ThresholdWhittle => 0,
            PolicyKind::ReferenceWhittle => 1,
            PolicyKind::Myopic => 2,
            PolicyKind::Random => 3,
            PolicyKind::Oracle => 4,
            PolicyKind::NeverAct => 5,
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "threshold_whittle" | "whittle" | "tw" => Ok(PolicyKind::ThresholdWhittle),
            "reference_whittle" | "reference" => Ok(PolicyKind::ReferenceWhittle),
            "myopic" => Ok(PolicyKind::Myopic),
            "random" => Ok(PolicyKind::Random),
            "oracle" => Ok(PolicyKind::Oracle),
            "never_act" | "never" => Ok(PolicyKind::NeverAct),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Cohort experiment setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Arms acted on per round.
    pub k: usize,
    /// Rounds per trial.
    pub horizon: usize,
    /// Independent trials per policy.
    pub trials: usize,
    pub seed: u64,
    /// Discount used for the fully-observed oracle indices.
    pub beta: f64,
}

impl SimulationConfig {
    fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.k > n {
            return Err(SimError::BudgetExceedsCohort { k: self.k, n });
        }
        if self.horizon == 0 {
            return Err(SimError::ZeroHorizon);
        }
        if self.trials == 0 {
            return Err(SimError::ZeroTrials);
        }
        Ok(())
    }
}

struct Arm {
    model: TransitionModel,
    chains: BeliefChains,
    whittle: WhittleTable,
    /// Fully-observed Whittle index of latent state 0 and 1.
    latent_index: (f64, f64),
}

/// Immutable per-cohort data: models plus all precomputed tables,
/// shared across trials (and safely across threads).
pub struct Cohort {
    arms: Vec<Arm>,
    reference: Option<Vec<WhittleTable>>,
    horizon: usize,
}

impl Cohort {
    /// Precomputes chains, fast index tables, and fully-observed indices
    /// for every arm at the given horizon.
    pub fn build(models: &[TransitionModel], config: &SimulationConfig) -> Result<Self, SimError> {
        if models.is_empty() {
            return Err(SimError::EmptyCohort);
        }
        config.validate(models.len())?;
        let mut arms = Vec::with_capacity(models.len());
        for model in models {
            let chains = BeliefChains::build(model, config.horizon)?;
            let whittle = compute_index_table(&chains);
            let latent_index = full_observation_whittle(model, config.beta, ORACLE_INDEX_TOL)?;
            arms.push(Arm {
                model: *model,
                chains,
                whittle,
                latent_index,
            });
        }
        Ok(Self {
            arms,
            reference: None,
            horizon: config.horizon,
        })
    }

    /// Attaches per-arm reference index tables (for the reference
    /// policy); callers compute them, typically fanned out over arms.
    pub fn attach_reference_tables(&mut self, tables: Vec<WhittleTable>) -> Result<(), SimError> {
        if tables.len() != self.arms.len() {
            return Err(SimError::TableCountMismatch(tables.len(), self.arms.len()));
        }
        self.reference = Some(tables);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn model(&self, arm: usize) -> &TransitionModel {
        &self.arms[arm].model
    }

    pub fn chains(&self, arm: usize) -> &BeliefChains {
        &self.arms[arm].chains
    }

    pub fn whittle_table(&self, arm: usize) -> &WhittleTable {
        &self.arms[arm].whittle
    }
}

/// Per-arm runtime state of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    /// Hidden from every policy except the oracle.
    pub latent: bool,
    pub omega: Obs,
    pub u: usize,
}

impl ArmState {
    pub fn belief_id(&self) -> BeliefStateId {
        BeliefStateId::new(self.omega, self.u)
    }
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn trial_rng(seed: u64, trial: u64, stream: u8, tag: u8) -> ChaCha12Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&trial.to_le_bytes());
    s[16] = stream;
    s[17] = tag;
    ChaCha12Rng::from_seed(s)
}

/// Samples the round-0 cohort state: latent from the stationary belief,
/// fictitious observation equal to it, passive transition into round 1.
pub fn init_cohort(cohort: &Cohort, rng: &mut impl RngCore) -> Vec<ArmState> {
    cohort
        .arms
        .iter()
        .map(|arm| {
            let s0 = uniform(rng) < arm.chains.b_star();
            let latent = uniform(rng) < arm.model.passive_to_good(s0);
            ArmState {
                latent,
                omega: Obs::from_good(s0),
                u: 1,
            }
        })
        .collect()
}

/// Observations emitted by one round, `(arm, observed latent state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: u32,
    pub observations: Vec<(usize, bool)>,
}

/// Advances every arm one round under the given action vector, which
/// must have exactly `expected_k` active entries.
pub fn step(
    cohort: &Cohort,
    states: &mut [ArmState],
    actions: &[bool],
    expected_k: usize,
    rng: &mut impl RngCore,
) -> Result<StepOutcome, SimError> {
    let active = actions.iter().filter(|&&a| a).count();
    if active != expected_k {
        return Err(SimError::WrongActionCount {
            expected: expected_k,
            got: active,
        });
    }
    let reward = states.iter().filter(|s| s.latent).count() as u32;
    let mut observations = Vec::with_capacity(expected_k);
    for (i, (state, arm)) in states.iter_mut().zip(&cohort.arms).enumerate() {
        let current = state.latent;
        if actions[i] {
            observations.push((i, current));
            state.omega = Obs::from_good(current);
            state.u = 1;
        } else {
            state.u = (state.u + 1).min(cohort.horizon);
        }
        let p = if actions[i] {
            arm.model.active_to_good(current)
        } else {
            arm.model.passive_to_good(current)
        };
        state.latent = uniform(rng) < p;
    }
    Ok(StepOutcome {
        reward,
        observations,
    })
}

/// One-step belief gain of acting at belief `b`:
/// `(b_next | active) - (b_next | passive)`.
pub fn myopic_gain(model: &TransitionModel, belief: f64) -> f64 {
    belief * (model.p11a() - model.p11p()) + (1.0 - belief) * (model.p01a() - model.p01p())
}

fn top_k_by_score(scores: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Highest score first; ties go to the lowest arm id.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut actions = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        actions[i] = true;
    }
    actions
}

/// Builds the action vector for one round. Every policy acts on exactly
/// `k` arms except `NeverAct`, which ignores the budget.
pub fn select_actions(
    cohort: &Cohort,
    states: &[ArmState],
    policy: PolicyKind,
    k: usize,
    rng_policy: &mut impl RngCore,
) -> Result<Vec<bool>, SimError> {
    let n = states.len();
    let actions = match policy {
        PolicyKind::NeverAct => vec![false; n],
        PolicyKind::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = i + (rng_policy.next_u64() as usize) % (n - i);
                idx.swap(i, j);
            }
            let mut actions = vec![false; n];
            for &i in idx.iter().take(k) {
                actions[i] = true;
            }
            actions
        }
        PolicyKind::ThresholdWhittle => {
            let scores: Vec<f64> = states
                .iter()
                .zip(&cohort.arms)
                .map(|(s, arm)| arm.whittle.index(s.belief_id()))
                .collect();
            top_k_by_score(&scores, k)
        }
        PolicyKind::ReferenceWhittle => {
            let tables = cohort
                .reference
                .as_ref()
                .ok_or(SimError::MissingReferenceTables)?;
            let scores: Vec<f64> = states
                .iter()
                .zip(tables)
                .map(|(s, table)| table.index(s.belief_id()))
                .collect();
            top_k_by_score(&scores, k)
        }
        PolicyKind::Myopic => {
            let scores: Vec<f64> = states
                .iter()
                .zip(&cohort.arms)
                .map(|(s, arm)| myopic_gain(&arm.model, arm.chains.belief(s.belief_id())))
                .collect();
            top_k_by_score(&scores, k)
        }
        PolicyKind::Oracle => {
            let scores: Vec<f64> = states
                .iter()
                .zip(&cohort.arms)
                .map(|(s, arm)| {
                    if s.latent {
                        arm.latent_index.1
                    } else {
                        arm.latent_index.0
                    }
                })
                .collect();
            top_k_by_score(&scores, k)
        }
    };
    Ok(actions)
}

/// Rewards and actions of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Reward per round, `r_t` in round order.
    pub rewards: Vec<u32>,
    /// `actions[t][arm]`.
    pub actions: Vec<Vec<bool>>,
    pub total_reward: u64,
}

/// Runs one seeded trial of one policy. Transition draws depend only on
/// `(seed, trial)`, so every policy faces the same randomness.
pub fn run_trial(
    cohort: &Cohort,
    config: &SimulationConfig,
    policy: PolicyKind,
    trial: u64,
) -> Result<Trajectory, SimError> {
    config.validate(cohort.len())?;
    let mut rng_transitions = trial_rng(config.seed, trial, 0, 0);
    let mut rng_policy = trial_rng(config.seed, trial, 1, policy.discriminant());
    let k = if policy == PolicyKind::NeverAct {
        0
    } else {
        config.k
    };
    let mut states = init_cohort(cohort, &mut rng_transitions);
    let mut rewards = Vec::with_capacity(config.horizon);
    let mut actions_log = Vec::with_capacity(config.horizon);
    let mut total = 0u64;
    for _ in 0..config.horizon {
        let actions = select_actions(cohort, &states, policy, k, &mut rng_policy)?;
        let outcome = step(cohort, &mut states, &actions, k, &mut rng_transitions)?;
        total += u64::from(outcome.reward);
        rewards.push(outcome.reward);
        actions_log.push(actions);
    }
    Ok(Trajectory {
        rewards,
        actions: actions_log,
        total_reward: total,
    })
}

/// Per-policy aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyResult {
    pub policy: PolicyKind,
    pub trials: usize,
    pub mean_total_reward: f64,
    pub se_total_reward: f64,
    /// Mean reward per round across trials, for reward curves.
    pub mean_round_rewards: Vec<f64>,
}

/// Runs `config.trials` seeded trials for each requested policy.
pub fn run_trials(
    cohort: &Cohort,
    config: &SimulationConfig,
    policies: &[PolicyKind],
) -> Result<Vec<PolicyResult>, SimError> {
    config.validate(cohort.len())?;
    let mut results = Vec::with_capacity(policies.len());
    for &policy in policies {
        let mut totals = Vec::with_capacity(config.trials);
        let mut round_sums = vec![0.0f64; config.horizon];
        for trial in 0..config.trials {
            let trajectory = run_trial(cohort, config, policy, trial as u64)?;
            totals.push(trajectory.total_reward as f64);
            for (sum, &r) in round_sums.iter_mut().zip(&trajectory.rewards) {
                *sum += f64::from(r);
            }
        }
        let n = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / n;
        let se = if totals.len() > 1 {
            let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        results.push(PolicyResult {
            policy,
            trials: config.trials,
            mean_total_reward: mean,
            se_total_reward: se,
            mean_round_rewards: round_sums.iter().map(|s| s / n).collect(),
        });
    }
    Ok(results)
}

/// A policy's reward rescaled so never-act maps to 0% and the oracle to
/// 100%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyBenefit {
    pub policy: PolicyKind,
    pub ib_percent: f64,
}

/// Intervention benefit of every result:
/// `100 * (mean - never_act) / (oracle - never_act)`.
///
/// Requires `never_act` and `oracle` among the results and a strictly
/// positive denominator.
pub fn intervention_benefit(results: &[PolicyResult]) -> Result<Vec<PolicyBenefit>, SimError> {
    let mean_of = |kind: PolicyKind| {
        results
            .iter()
            .find(|r| r.policy == kind)
            .map(|r| r.mean_total_reward)
    };
    let never = mean_of(PolicyKind::NeverAct).ok_or(SimError::MissingBaselines)?;
    let oracle = mean_of(PolicyKind::Oracle).ok_or(SimError::MissingBaselines)?;
    let denominator = oracle - never;
    if denominator <= 0.0 {
        return Err(SimError::DegenerateBenefit { denominator });
    }
    Ok(results
        .iter()
        .map(|r| PolicyBenefit {
            policy: r.policy,
            ib_percent: 100.0 * (r.mean_total_reward - never) / denominator,
        })
        .collect())
}
