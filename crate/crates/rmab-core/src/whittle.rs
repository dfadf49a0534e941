//! Fast average-reward Whittle index computation for forward threshold
//! policies.
//!
//! A forward threshold policy is the pair `(x0, x1)` of the first chain
//! positions at which the policy acts; passive rounds walk down a chain,
//! the active round at the threshold resets the arm to one of the chain
//! heads. Imposing such a policy turns the belief MDP into an
//! `(x0 + x1)`-state Markov chain whose stationary distribution is flat
//! within each chain:
//!
//! ```text
//! alpha     = (x1 * b0(x0) / (1 - b1(x1)) + x0)^-1      (chain-0 states)
//! beta_freq = alpha * b0(x0) / (1 - b1(x1))             (chain-1 states)
//! ```
//!
//! The average reward under a passivity subsidy `m` is then linear in m,
//! `J_m = A + m * C`, where `A` is the occupancy-weighted belief and `C`
//! the passive occupancy mass. The subsidy at which two adjacent
//! policies tie in value is the Whittle index of the state they disagree
//! on, which the sequential algorithm exploits to index every chain
//! state in O(T) constant-time solves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefChains, BeliefStateId, Obs};
use crate::util::format_sig;

/// Tolerance below which two passive-mass coefficients are considered
/// equal, making an equal-value subsidy indeterminate.
const SLOPE_TOLERANCE: f64 = 1e-12;

/// First chain positions at which a forward threshold policy acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForwardThresholdPolicy {
    /// Acting position in chain 0 (last observation was state 0).
    pub x0: usize,
    /// Acting position in chain 1.
    pub x1: usize,
}

impl ForwardThresholdPolicy {
    pub fn new(x0: usize, x1: usize) -> Self {
        debug_assert!(x0 >= 1 && x1 >= 1);
        Self { x0, x1 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WhittleError {
    #[error("threshold ({x0}, {x1}) outside chain horizon {horizon}")]
    PolicyOutOfRange { x0: usize, x1: usize, horizon: usize },
    #[error("occupancy undefined: 1 - b1(x1) = {denominator:.3e} underflows")]
    OccupancyUnderflow { denominator: f64 },
    #[error("equal-value subsidy indeterminate: passive masses differ by {delta:.3e}")]
    IndeterminateSubsidy { delta: f64 },
}

/// Long-run visit frequencies induced by a forward threshold policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyProfile {
    pub policy: ForwardThresholdPolicy,
    /// Frequency of each chain-0 state `u <= x0`.
    pub alpha: f64,
    /// Frequency of each chain-1 state `u <= x1`. (The frequency symbol
    /// is spelled out to avoid clashing with the discount factor.)
    pub beta_freq: f64,
}

impl OccupancyProfile {
    /// Frequency of an individual belief state; zero beyond thresholds.
    pub fn frequency(&self, id: BeliefStateId) -> f64 {
        match id.omega {
            Obs::Zero if id.u <= self.policy.x0 => self.alpha,
            Obs::One if id.u <= self.policy.x1 => self.beta_freq,
            _ => 0.0,
        }
    }
}

/// Average reward of a threshold policy as a function of subsidy:
/// `J_m = intercept + m * passive_mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearReward {
    /// Occupancy-weighted belief, the subsidy-free average reward.
    pub intercept: f64,
    /// Long-run fraction of passive rounds (everything except the two
    /// threshold states).
    pub passive_mass: f64,
}

impl LinearReward {
    pub fn eval(&self, m: f64) -> f64 {
        self.intercept + m * self.passive_mass
    }
}

fn occupancy_parts(
    b0_at_x0: f64,
    b1_at_x1: f64,
    x0: usize,
    x1: usize,
) -> Result<(f64, f64), WhittleError> {
    let denominator = 1.0 - b1_at_x1;
    if denominator <= SLOPE_TOLERANCE {
        return Err(WhittleError::OccupancyUnderflow { denominator });
    }
    let ratio = b0_at_x0 / denominator;
    let alpha = 1.0 / (x1 as f64 * ratio + x0 as f64);
    Ok((alpha, alpha * ratio))
}

fn check_policy(chains: &BeliefChains, policy: ForwardThresholdPolicy) -> Result<(), WhittleError> {
    let t = chains.horizon();
    if policy.x0 < 1 || policy.x1 < 1 || policy.x0 > t || policy.x1 > t {
        return Err(WhittleError::PolicyOutOfRange {
            x0: policy.x0,
            x1: policy.x1,
            horizon: t,
        });
    }
    Ok(())
}

/// Stationary visit frequencies of the chain induced by `policy`.
pub fn occupancy(
    chains: &BeliefChains,
    policy: ForwardThresholdPolicy,
) -> Result<OccupancyProfile, WhittleError> {
    check_policy(chains, policy)?;
    let b0 = chains.belief(BeliefStateId::new(Obs::Zero, policy.x0));
    let b1 = chains.belief(BeliefStateId::new(Obs::One, policy.x1));
    let (alpha, beta_freq) = occupancy_parts(b0, b1, policy.x0, policy.x1)?;
    Ok(OccupancyProfile {
        policy,
        alpha,
        beta_freq,
    })
}

/// Average reward of `policy` decomposed into `A + m * C`.
///
/// Computed by direct summation over the occupied states; the index
/// algorithm below uses an equivalent prefix-sum form, and the two are
/// cross-checked in tests.
pub fn avg_reward_linear(
    chains: &BeliefChains,
    policy: ForwardThresholdPolicy,
) -> Result<LinearReward, WhittleError> {
    let occ = occupancy(chains, policy)?;
    let mut intercept = 0.0;
    for u in 1..=policy.x0 {
        intercept += occ.alpha * chains.belief(BeliefStateId::new(Obs::Zero, u));
    }
    for u in 1..=policy.x1 {
        intercept += occ.beta_freq * chains.belief(BeliefStateId::new(Obs::One, u));
    }
    Ok(LinearReward {
        intercept,
        passive_mass: 1.0 - occ.alpha - occ.beta_freq,
    })
}

/// The subsidy at which two threshold policies have equal average
/// reward: `m = (A_b - A_a) / (C_a - C_b)`.
///
/// Fails when the passive masses coincide (parallel value lines).
pub fn solve_subsidy(
    chains: &BeliefChains,
    policy_a: ForwardThresholdPolicy,
    policy_b: ForwardThresholdPolicy,
) -> Result<f64, WhittleError> {
    let a = avg_reward_linear(chains, policy_a)?;
    let b = avg_reward_linear(chains, policy_b)?;
    solve_lines(a, b)
}

fn solve_lines(a: LinearReward, b: LinearReward) -> Result<f64, WhittleError> {
    let slope_gap = a.passive_mass - b.passive_mass;
    if slope_gap.abs() <= SLOPE_TOLERANCE {
        return Err(WhittleError::IndeterminateSubsidy {
            delta: slope_gap.abs(),
        });
    }
    Ok((b.intercept - a.intercept) / slope_gap)
}

/// One index assignment, in the order the algorithm produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexAssignment {
    pub omega: Obs,
    pub u: usize,
    pub subsidy: f64,
}

/// Whittle indices for every belief state of one arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhittleTable {
    horizon: usize,
    /// `w[omega][u - 1]`.
    w: [Vec<f64>; 2],
    trace: Vec<IndexAssignment>,
}

impl WhittleTable {
    /// Assembles a table from per-chain indices computed elsewhere (the
    /// reference binary-search path); such tables carry no trace.
    pub(crate) fn from_parts(horizon: usize, w: [Vec<f64>; 2]) -> Self {
        Self {
            horizon,
            w,
            trace: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Index of a belief state; `u` clamps to the horizon.
    pub fn index(&self, id: BeliefStateId) -> f64 {
        let u = id.u.min(self.horizon);
        self.w[id.omega.index()][u - 1]
    }

    pub fn chain(&self, omega: Obs) -> &[f64] {
        &self.w[omega.index()]
    }

    /// Assignment order produced by the sequential algorithm.
    pub fn trace(&self) -> &[IndexAssignment] {
        &self.trace
    }

    /// Positions `(omega, u)` where the index decreases from `u` to
    /// `u + 1` by more than `tol`. Expected empty for non-increasing
    /// belief arms away from the truncation boundary; callers log these
    /// as diagnostics rather than failing.
    pub fn chain_monotonicity_violations(&self, tol: f64) -> Vec<(Obs, usize)> {
        let mut violations = Vec::new();
        for omega in Obs::BOTH {
            let chain = self.chain(omega);
            for u in 1..chain.len() {
                if chain[u] < chain[u - 1] - tol {
                    violations.push((omega, u));
                }
            }
        }
        violations
    }

    /// Appends `arm_id, omega, u, index` CSV rows (12 significant
    /// digits), one per belief state, chain 0 first.
    pub fn append_csv_rows<W: std::io::Write>(
        &self,
        arm_id: &str,
        out: &mut W,
    ) -> std::io::Result<()> {
        for omega in Obs::BOTH {
            for (i, w) in self.chain(omega).iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    arm_id,
                    omega.index(),
                    i + 1,
                    format_sig(*w, 12)
                )?;
            }
        }
        Ok(())
    }
}

/// Shared state of the sequential algorithm: belief chains extended with
/// one clamped virtual state per chain, and prefix sums making each
/// equal-value solve O(1).
struct SequentialSolver {
    horizon: usize,
    /// Chain beliefs for `u = 1..=T+1`, with `b(T+1) = b(T)`.
    beliefs: [Vec<f64>; 2],
    /// `prefix[omega][x]` = sum of the first `x` beliefs of the chain.
    prefix: [Vec<f64>; 2],
}

enum Advance {
    Solved(f64),
    /// Equal passive masses or occupancy underflow: this advance cannot
    /// produce an index at this iteration.
    Unavailable,
}

impl SequentialSolver {
    fn new(chains: &BeliefChains) -> Self {
        let horizon = chains.horizon();
        let beliefs = Obs::BOTH.map(|omega| {
            let mut b = chains.chain(omega).to_vec();
            b.push(b[horizon - 1]);
            b
        });
        let prefix = beliefs.clone().map(|b| {
            let mut acc = Vec::with_capacity(b.len() + 1);
            let mut sum = 0.0;
            acc.push(0.0);
            for v in b {
                sum += v;
                acc.push(sum);
            }
            acc
        });
        Self {
            horizon,
            beliefs,
            prefix,
        }
    }

    fn linear_reward(&self, x0: usize, x1: usize) -> Result<LinearReward, WhittleError> {
        let b0 = self.beliefs[0][x0 - 1];
        let b1 = self.beliefs[1][x1 - 1];
        let (alpha, beta_freq) = occupancy_parts(b0, b1, x0, x1)?;
        Ok(LinearReward {
            intercept: alpha * self.prefix[0][x0] + beta_freq * self.prefix[1][x1],
            passive_mass: 1.0 - alpha - beta_freq,
        })
    }

    fn solve_adjacent(&self, x0: usize, x1: usize, advance: Obs) -> Advance {
        let current = self.linear_reward(x0, x1);
        let next = match advance {
            Obs::Zero => self.linear_reward(x0 + 1, x1),
            Obs::One => self.linear_reward(x0, x1 + 1),
        };
        match (current, next) {
            (Ok(a), Ok(b)) => match solve_lines(a, b) {
                Ok(m) => Advance::Solved(m),
                Err(err) => {
                    log::warn!("index solve at ({x0},{x1}) advancing {advance:?}: {err}");
                    Advance::Unavailable
                }
            },
            (Err(err), _) | (_, Err(err)) => {
                log::warn!("index solve at ({x0},{x1}) advancing {advance:?}: {err}");
                Advance::Unavailable
            }
        }
    }
}

/// Runs the sequential algorithm, optionally stopping as soon as
/// `stop_at` receives its index. Returns the (possibly partial) table
/// and the index of `stop_at` when requested.
fn run_sequential(chains: &BeliefChains, stop_at: Option<BeliefStateId>) -> (WhittleTable, Option<f64>) {
    let solver = SequentialSolver::new(chains);
    let t = solver.horizon;
    let mut w = [vec![f64::NAN; t], vec![f64::NAN; t]];
    let mut trace: Vec<IndexAssignment> = Vec::with_capacity(2 * t);
    let mut found: Option<f64> = None;

    let mut assign = |w: &mut [Vec<f64>; 2],
                      trace: &mut Vec<IndexAssignment>,
                      omega: Obs,
                      u: usize,
                      subsidy: f64|
     -> bool {
        w[omega.index()][u - 1] = subsidy;
        trace.push(IndexAssignment { omega, u, subsidy });
        if stop_at == Some(BeliefStateId::new(omega, u)) {
            found = Some(subsidy);
            true
        } else {
            false
        }
    };

    let mut x0 = 1usize;
    let mut x1 = 1usize;
    let mut degenerate = false;
    while x0 < t || x1 < t {
        let m0 = if x0 < t {
            Some(solver.solve_adjacent(x0, x1, Obs::Zero))
        } else {
            None
        };
        let m1 = if x1 < t {
            Some(solver.solve_adjacent(x0, x1, Obs::One))
        } else {
            None
        };
        let v0 = match m0 {
            Some(Advance::Solved(m)) => Some(m),
            _ => None,
        };
        let v1 = match m1 {
            Some(Advance::Solved(m)) => Some(m),
            _ => None,
        };
        match (v0, v1) {
            (Some(m0), Some(m1)) if (m0 - m1).abs() <= SLOPE_TOLERANCE => {
                // Both adjacent equalities hold at the same subsidy;
                // assign both states and advance both chains.
                let stop0 = assign(&mut w, &mut trace, Obs::Zero, x0, m0);
                let stop1 = assign(&mut w, &mut trace, Obs::One, x1, m1);
                x0 += 1;
                x1 += 1;
                if stop0 || stop1 {
                    return finish(solver.horizon, w, trace, found);
                }
            }
            (Some(m0), Some(m1)) if m0 < m1 => {
                if assign(&mut w, &mut trace, Obs::Zero, x0, m0) {
                    return finish(solver.horizon, w, trace, found);
                }
                x0 += 1;
            }
            (Some(_), Some(m1)) => {
                if assign(&mut w, &mut trace, Obs::One, x1, m1) {
                    return finish(solver.horizon, w, trace, found);
                }
                x1 += 1;
            }
            (Some(m0), None) => {
                if assign(&mut w, &mut trace, Obs::Zero, x0, m0) {
                    return finish(solver.horizon, w, trace, found);
                }
                x0 += 1;
            }
            (None, Some(m1)) => {
                if assign(&mut w, &mut trace, Obs::One, x1, m1) {
                    return finish(solver.horizon, w, trace, found);
                }
                x1 += 1;
            }
            (None, None) => {
                log::warn!(
                    "sequential index computation degenerate at ({x0},{x1}); \
                     remaining states assigned +inf"
                );
                degenerate = true;
                break;
            }
        }
    }

    if degenerate {
        for omega in Obs::BOTH {
            for u in 1..=t {
                if w[omega.index()][u - 1].is_nan() {
                    assign(&mut w, &mut trace, omega, u, f64::INFINITY);
                }
            }
        }
        return finish(solver.horizon, w, trace, found);
    }

    // Terminal states u = T: one extra solve per chain against the
    // clamped virtual state T+1, from the final (T, T) policy.
    let mut terminal: Vec<(Obs, f64)> = Vec::with_capacity(2);
    for omega in [Obs::One, Obs::Zero] {
        let m = match solver.solve_adjacent(t, t, omega) {
            Advance::Solved(m) => m,
            Advance::Unavailable => {
                log::warn!("terminal index solve degenerate for chain {omega:?}; assigning +inf");
                f64::INFINITY
            }
        };
        terminal.push((omega, m));
    }
    terminal.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (omega, m) in terminal {
        if assign(&mut w, &mut trace, omega, t, m) {
            break;
        }
    }
    finish(solver.horizon, w, trace, found)
}

fn finish(
    horizon: usize,
    w: [Vec<f64>; 2],
    trace: Vec<IndexAssignment>,
    found: Option<f64>,
) -> (WhittleTable, Option<f64>) {
    (WhittleTable { horizon, w, trace }, found)
}

/// Computes the Whittle index of every belief state of one arm.
///
/// Intended for non-increasing-belief, forward-threshold-optimal arms;
/// it is applied unconditionally and the guarantees are the caller's
/// concern. Runs in O(T) constant-time solves.
pub fn compute_index_table(chains: &BeliefChains) -> WhittleTable {
    run_sequential(chains, None).0
}

/// Index of a single belief state, computed by running the sequential
/// algorithm with an early exit once the state is assigned.
pub fn whittle_on_demand(chains: &BeliefChains, state: BeliefStateId) -> f64 {
    let clamped = BeliefStateId::new(state.omega, state.u.min(chains.horizon()));
    match run_sequential(chains, Some(clamped)) {
        (_, Some(m)) => m,
        // Unreachable for in-range states: every state is assigned.
        (table, None) => table.index(clamped),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransitionModel;

    fn m1_chains(t: usize) -> BeliefChains {
        let m = TransitionModel::strict_natural(0.2, 0.6, 0.5, 0.8).unwrap();
        BeliefChains::build(&m, t).unwrap()
    }

    #[test]
    fn occupancy_hand_traces() {
        let chains = m1_chains(2);
        let occ = occupancy(&chains, ForwardThresholdPolicy::new(1, 1)).unwrap();
        assert!((occ.alpha - 2.0 / 7.0).abs() < 1e-15);
        assert!((occ.beta_freq - 5.0 / 7.0).abs() < 1e-15);

        let occ = occupancy(&chains, ForwardThresholdPolicy::new(2, 1)).unwrap();
        assert!((occ.alpha - 0.25).abs() < 1e-15);
        assert!((occ.beta_freq - 0.5).abs() < 1e-15);
    }

    #[test]
    fn occupancy_normalizes() {
        let chains = m1_chains(6);
        for x0 in 1..=6 {
            for x1 in 1..=6 {
                let occ = occupancy(&chains, ForwardThresholdPolicy::new(x0, x1)).unwrap();
                let total = x0 as f64 * occ.alpha + x1 as f64 * occ.beta_freq;
                assert!((total - 1.0).abs() < 1e-12, "({x0},{x1}): {total}");
            }
        }
    }

    #[test]
    fn occupancy_rejects_out_of_range_policy() {
        let chains = m1_chains(3);
        assert!(matches!(
            occupancy(&chains, ForwardThresholdPolicy::new(4, 1)),
            Err(WhittleError::PolicyOutOfRange { .. })
        ));
    }

    #[test]
    fn frequency_is_zero_beyond_thresholds() {
        let chains = m1_chains(4);
        let occ = occupancy(&chains, ForwardThresholdPolicy::new(2, 3)).unwrap();
        assert_eq!(occ.frequency(BeliefStateId::new(Obs::Zero, 3)), 0.0);
        assert_eq!(occ.frequency(BeliefStateId::new(Obs::One, 4)), 0.0);
        assert!(occ.frequency(BeliefStateId::new(Obs::Zero, 2)) > 0.0);
    }

    #[test]
    fn linear_reward_hand_traces() {
        let chains = m1_chains(2);
        let r = avg_reward_linear(&chains, ForwardThresholdPolicy::new(1, 1)).unwrap();
        assert!((r.intercept - 5.0 / 7.0).abs() < 1e-15);
        assert!(r.passive_mass.abs() < 1e-15);

        let r = avg_reward_linear(&chains, ForwardThresholdPolicy::new(2, 1)).unwrap();
        assert!((r.intercept - 0.625).abs() < 1e-15);
        assert!((r.passive_mass - 0.25).abs() < 1e-15);

        let r = avg_reward_linear(&chains, ForwardThresholdPolicy::new(1, 2)).unwrap();
        assert!((r.intercept - 45.0 / 74.0).abs() < 1e-14);
        assert!((r.passive_mass - 25.0 / 74.0).abs() < 1e-14);

        let r = avg_reward_linear(&chains, ForwardThresholdPolicy::new(2, 2)).unwrap();
        assert!((r.intercept - 6.0 / 11.0).abs() < 1e-14);
        assert!((r.passive_mass - 0.5).abs() < 1e-14);
    }

    #[test]
    fn subsidy_solve_hand_traces() {
        let chains = m1_chains(2);
        let p = ForwardThresholdPolicy::new;
        let m = solve_subsidy(&chains, p(1, 1), p(2, 1)).unwrap();
        assert!((m - 5.0 / 14.0).abs() < 1e-13);
        let m = solve_subsidy(&chains, p(1, 1), p(1, 2)).unwrap();
        assert!((m - 11.0 / 35.0).abs() < 1e-13);
        let m = solve_subsidy(&chains, p(1, 2), p(2, 2)).unwrap();
        assert!((m - 17.0 / 44.0).abs() < 1e-13);
    }

    #[test]
    fn subsidy_solve_identical_policies_is_indeterminate() {
        let chains = m1_chains(2);
        let p = ForwardThresholdPolicy::new(1, 2);
        assert!(matches!(
            solve_subsidy(&chains, p, p),
            Err(WhittleError::IndeterminateSubsidy { .. })
        ));
    }

    #[test]
    fn index_table_hand_trace() {
        // Exact rationals for the T = 2 head states; the two terminal
        // states follow from the clamped virtual-state rule.
        let chains = m1_chains(2);
        let table = compute_index_table(&chains);
        assert!((table.index(BeliefStateId::new(Obs::One, 1)) - 11.0 / 35.0).abs() < 1e-13);
        assert!((table.index(BeliefStateId::new(Obs::Zero, 1)) - 17.0 / 44.0).abs() < 1e-13);
        assert!((table.index(BeliefStateId::new(Obs::One, 2)) - 14.0 / 275.0).abs() < 1e-13);
        assert!((table.index(BeliefStateId::new(Obs::Zero, 2)) - 16.0 / 55.0).abs() < 1e-13);

        // The loop assigned chain-1 head first (its subsidy is smaller),
        // then the chain-0 head, before the terminal solves.
        let trace = table.trace();
        assert_eq!(
            (trace[0].omega, trace[0].u, trace[1].omega, trace[1].u),
            (Obs::One, 1, Obs::Zero, 1)
        );
        assert!(trace[0].subsidy <= trace[1].subsidy);
    }

    #[test]
    fn loop_assignments_are_non_decreasing() {
        // Holds for the in-loop assignments of this NIB model; terminal
        // solves are excluded (truncation can shrink them).
        let chains = m1_chains(12);
        let table = compute_index_table(&chains);
        let loop_len = table.trace().len() - 2;
        let subsidies: Vec<f64> = table.trace()[..loop_len].iter().map(|a| a.subsidy).collect();
        for pair in subsidies.windows(2) {
            assert!(pair[0] <= pair[1] + 1e-12, "{pair:?}");
        }
    }

    #[test]
    fn horizon_one_table_uses_frozen_beliefs() {
        // At T = 1 the virtual states clamp to the head beliefs, so the
        // solves see a world where beliefs never decay: delaying the
        // chain-1 action is free (negative index), while the chain-0
        // head still pays. Hand-solved: -3/35 and 3/14.
        let chains = m1_chains(1);
        let table = compute_index_table(&chains);
        assert!((table.index(BeliefStateId::new(Obs::One, 1)) + 3.0 / 35.0).abs() < 1e-13);
        assert!((table.index(BeliefStateId::new(Obs::Zero, 1)) - 3.0 / 14.0).abs() < 1e-13);
    }

    #[test]
    fn monotonicity_dips_only_at_the_truncation_boundary() {
        // For this non-increasing-belief model the in-loop indices rise;
        // the clamped terminal solves may dip below them, which callers
        // surface as diagnostics.
        let chains = m1_chains(12);
        let table = compute_index_table(&chains);
        let violations = table.chain_monotonicity_violations(1e-12);
        assert!(violations.iter().all(|(_, u)| *u == 11), "{violations:?}");
    }

    #[test]
    fn on_demand_matches_table() {
        let chains = m1_chains(7);
        let table = compute_index_table(&chains);
        for id in chains.states() {
            let on_demand = whittle_on_demand(&chains, id);
            assert_eq!(on_demand, table.index(id), "{id:?}");
        }
    }

    #[test]
    fn table_lookup_clamps_past_horizon() {
        let chains = m1_chains(5);
        let table = compute_index_table(&chains);
        assert_eq!(
            table.index(BeliefStateId::new(Obs::One, 99)),
            table.index(BeliefStateId::new(Obs::One, 5))
        );
    }

    #[test]
    fn csv_rows_are_parseable() {
        let chains = m1_chains(2);
        let table = compute_index_table(&chains);
        let mut buf = Vec::new();
        table.append_csv_rows("arm7", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("arm7,0,1,"));
        let idx: f64 = lines[0].split(',').nth(3).unwrap().parse().unwrap();
        assert!((idx - 17.0 / 44.0).abs() < 1e-11);
    }
}
