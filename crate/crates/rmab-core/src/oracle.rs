//! Slow, exact reference computations.
//!
//! These back two roles: the precise general baseline the fast index
//! engine is benchmarked against, and independent verification oracles
//! for the engine's outputs. Everything here works on the truncated
//! belief MDP with `2T` states: passive moves one step down the current
//! chain (self-loop at the truncation boundary, where the belief is
//! frozen at `b_omega(T)`), active collapses to a chain head with
//! probability equal to the current belief, and the subsidy `m` is paid
//! on passive rounds:
//!
//! ```text
//! V_m(b) = max( m + b + beta * V_m(tau_1(b)),
//!               b + beta * (b * V_m(b_1(1)) + (1 - b) * V_m(b_0(1))) )
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::belief::{BeliefChains, BeliefError, BeliefStateId, Obs};
use crate::model::TransitionModel;
use crate::whittle::{avg_reward_linear, ForwardThresholdPolicy, WhittleError, WhittleTable};

/// Strict-optimality margin for passive-set membership: indifference
/// must not count as strictly passive.
const PASSIVE_SET_MARGIN: f64 = 1e-9;

/// Belief values closer than this are treated as the same state when
/// classifying policy shapes.
const BELIEF_TIE_TOLERANCE: f64 = 1e-12;

const MAX_BRACKET_DOUBLINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("discount factor {0} is not in [0,1)")]
    InvalidDiscount(f64),
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("truncation horizon {0} must be at least 2")]
    HorizonTooSmall(usize),
    #[error("horizon {t} exceeds the T <= {max} enumeration guard")]
    EnumerationGuard { t: usize, max: usize },
    #[error("value iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no sign change in [{lo}, {hi}] after {MAX_BRACKET_DOUBLINGS} doublings; the action never switches")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("belief state u = {u} outside truncation horizon {t}")]
    StateOutOfRange { u: usize, t: usize },
    #[error("subsidy grid must be sorted ascending and span at least [-2, 2]")]
    InvalidGrid,
    #[error(transparent)]
    Whittle(#[from] WhittleError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

fn check_vi_args(beta: f64, t: usize, tol: f64) -> Result<(), OracleError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(OracleError::InvalidDiscount(beta));
    }
    if t < 2 {
        return Err(OracleError::HorizonTooSmall(t));
    }
    if !(tol > 0.0) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    Ok(())
}

/// Iteration cap for value iteration: enough synchronous sweeps to
/// contract a unit-scale error below `tol * (1 - beta)`, plus margin.
fn iteration_cap(beta: f64, tol: f64) -> usize {
    if beta < 1e-9 {
        return 64;
    }
    let raw = (tol * (1.0 - beta)).ln() / beta.ln();
    let base = if raw.is_finite() && raw > 0.0 {
        raw.ceil() as usize
    } else {
        0
    };
    base + base / 4 + 64
}

/// The truncated belief MDP of one arm, flattened for the solver:
/// state `omega * t + (u - 1)` carries belief `b_omega(u)`.
struct TruncatedBeliefMdp {
    t: usize,
    beliefs: Vec<f64>,
}

impl TruncatedBeliefMdp {
    fn from_chains(chains: &BeliefChains) -> Self {
        let t = chains.horizon();
        let mut beliefs = Vec::with_capacity(2 * t);
        beliefs.extend_from_slice(chains.chain(Obs::Zero));
        beliefs.extend_from_slice(chains.chain(Obs::One));
        Self { t, beliefs }
    }

    fn state_index(&self, id: BeliefStateId) -> usize {
        id.omega.index() * self.t + (id.u - 1)
    }

    /// One synchronous Bellman sweep; returns the max value change.
    fn sweep(&self, m: f64, beta: f64, v: &[f64], out: &mut [f64]) -> f64 {
        let t = self.t;
        let head0 = v[0];
        let head1 = v[t];
        let mut residual = 0.0f64;
        for omega in 0..2 {
            let base = omega * t;
            for i in 0..t {
                let idx = base + i;
                let b = self.beliefs[idx];
                let next = if i + 1 < t { idx + 1 } else { idx };
                let passive = m + b + beta * v[next];
                let active = b + beta * (b * head1 + (1.0 - b) * head0);
                let new = passive.max(active);
                let change = (new - v[idx]).abs();
                if change > residual {
                    residual = change;
                }
                out[idx] = new;
            }
        }
        residual
    }

    /// Value iteration to Bellman residual below `tol`, warm-started
    /// from the current contents of `v`.
    ///
    /// Plain synchronous sweeps are accelerated by geometric-series
    /// extrapolation of the dominant error mode (the contraction-rate
    /// level shift), with a verification sweep that reverts any
    /// extrapolation that fails to reduce the residual. The returned
    /// vector always comes from a measured sweep with residual < tol.
    fn solve(&self, m: f64, beta: f64, tol: f64, v: &mut Vec<f64>) -> Result<(usize, f64), OracleError> {
        let n = 2 * self.t;
        debug_assert_eq!(v.len(), n);
        let cap = iteration_cap(beta, tol);
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut sweeps = 0usize;
        let mut last_residual = f64::INFINITY;

        while sweeps < cap {
            let r1 = self.sweep(m, beta, v, &mut b);
            sweeps += 1;
            if r1 < tol {
                v.copy_from_slice(&b);
                return Ok((sweeps, r1));
            }
            let r2 = self.sweep(m, beta, &b, &mut c);
            sweeps += 1;
            if r2 < tol {
                v.copy_from_slice(&c);
                return Ok((sweeps, r2));
            }
            last_residual = r2;

            // Rayleigh estimate of the dominant contraction ratio from
            // the last two increments.
            let mut dot11 = 0.0;
            let mut dot12 = 0.0;
            for i in 0..n {
                let d1 = b[i] - v[i];
                let d2 = c[i] - b[i];
                dot11 += d1 * d1;
                dot12 += d1 * d2;
            }
            if dot11 == 0.0 {
                v.copy_from_slice(&c);
                return Ok((sweeps, r2));
            }
            let lambda = (dot12 / dot11).clamp(0.0, beta);
            if lambda > 0.2 {
                let gain = lambda / (1.0 - lambda);
                for i in 0..n {
                    x[i] = c[i] + gain * (c[i] - b[i]);
                }
                let rx = self.sweep(m, beta, &x, v);
                sweeps += 1;
                if rx < tol {
                    return Ok((sweeps, rx));
                }
                if rx >= r2 {
                    // Extrapolation overshot (greedy actions shifted);
                    // fall back to the plain iterate.
                    v.copy_from_slice(&c);
                }
            } else {
                v.copy_from_slice(&c);
            }
        }
        Err(OracleError::NoConvergence {
            iterations: sweeps,
            residual: last_residual,
        })
    }

    /// Passive-minus-active action value at one state given converged
    /// values.
    fn passive_margin(&self, v: &[f64], m: f64, beta: f64, idx: usize) -> f64 {
        let t = self.t;
        let b = self.beliefs[idx];
        let i = idx % t;
        let next = if i + 1 < t { idx + 1 } else { idx };
        let passive = m + b + beta * v[next];
        let active = b + beta * (b * v[t] + (1.0 - b) * v[0]);
        passive - active
    }
}

/// Converged subsidized values and the induced greedy actions.
#[derive(Debug, Clone, Serialize)]
pub struct ValueTable {
    pub subsidy: f64,
    pub beta: f64,
    horizon: usize,
    /// Passive-minus-active action value per state, `margin[omega][u-1]`.
    margins: [Vec<f64>; 2],
    values: [Vec<f64>; 2],
    pub iterations: usize,
    pub residual: f64,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn value(&self, id: BeliefStateId) -> f64 {
        self.values[id.omega.index()][id.u - 1]
    }

    /// Positive when passive is strictly better at the state.
    pub fn passive_margin(&self, id: BeliefStateId) -> f64 {
        self.margins[id.omega.index()][id.u - 1]
    }

    /// Greedy action read-off; indifference counts as passive.
    pub fn passive_optimal(&self, id: BeliefStateId) -> bool {
        self.passive_margin(id) >= 0.0
    }
}

/// Solves the subsidized truncated belief MDP by value iteration.
pub fn value_iteration(
    model: &TransitionModel,
    m: f64,
    beta: f64,
    t: usize,
    tol: f64,
) -> Result<ValueTable, OracleError> {
    check_vi_args(beta, t, tol)?;
    let chains = BeliefChains::build(model, t)?;
    let mdp = TruncatedBeliefMdp::from_chains(&chains);
    let mut v = vec![0.0; 2 * t];
    let (iterations, residual) = mdp.solve(m, beta, tol, &mut v)?;
    let mut margins = [vec![0.0; t], vec![0.0; t]];
    let mut values = [vec![0.0; t], vec![0.0; t]];
    for omega in 0..2 {
        for i in 0..t {
            let idx = omega * t + i;
            margins[omega][i] = mdp.passive_margin(&v, m, beta, idx);
            values[omega][i] = v[idx];
        }
    }
    Ok(ValueTable {
        subsidy: m,
        beta,
        horizon: t,
        margins,
        values,
        iterations,
        residual,
    })
}

/// Expands `(lo, hi)` by outward doubling until `probe(lo)` is false and
/// `probe(hi)` is true, then bisects to width `tol`.
fn bisect_subsidy(
    mut probe: impl FnMut(f64) -> Result<bool, OracleError>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, OracleError> {
    let (mut lo, mut hi) = bracket;
    debug_assert!(lo < hi);
    let mut doublings = 0;
    while probe(lo)? {
        let width = hi - lo;
        lo -= width;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(OracleError::NoSignChange { lo, hi });
        }
    }
    doublings = 0;
    while !probe(hi)? {
        let width = hi - lo;
        hi += width;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(OracleError::NoSignChange { lo, hi });
        }
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn reference_whittle_in(
    mdp: &TruncatedBeliefMdp,
    state_idx: usize,
    beta: f64,
    tol: f64,
    bracket: (f64, f64),
    v: &mut Vec<f64>,
) -> Result<f64, OracleError> {
    bisect_subsidy(
        |m| {
            mdp.solve(m, beta, tol, v)?;
            Ok(mdp.passive_margin(v, m, beta, state_idx) >= 0.0)
        },
        bracket,
        tol,
    )
}

/// Whittle index of one belief state by binary search over the subsidy,
/// with one value-iteration solve per probe. The search bracket starts
/// at [-2, 2] and doubles outward until it straddles the sign change of
/// the passive-minus-active margin.
pub fn reference_whittle(
    model: &TransitionModel,
    state: BeliefStateId,
    beta: f64,
    t: usize,
    tol: f64,
) -> Result<f64, OracleError> {
    check_vi_args(beta, t, tol)?;
    if state.u > t {
        return Err(OracleError::StateOutOfRange { u: state.u, t });
    }
    let chains = BeliefChains::build(model, t)?;
    let mdp = TruncatedBeliefMdp::from_chains(&chains);
    let mut v = vec![0.0; 2 * t];
    reference_whittle_in(&mdp, mdp.state_index(state), beta, tol, (-2.0, 2.0), &mut v)
}

/// Reference indices for every belief state of one arm.
///
/// Equivalent to calling [`reference_whittle`] per state; value vectors
/// are warm-started across probes and each state's bracket starts around
/// its chain predecessor's index, which changes nothing semantically
/// (the probed predicate is monotone) but avoids re-deriving the scale.
pub fn reference_index_table(
    model: &TransitionModel,
    beta: f64,
    t: usize,
    tol: f64,
) -> Result<WhittleTable, OracleError> {
    check_vi_args(beta, t, tol)?;
    let chains = BeliefChains::build(model, t)?;
    let mdp = TruncatedBeliefMdp::from_chains(&chains);
    let mut v = vec![0.0; 2 * t];
    let mut w = [vec![0.0; t], vec![0.0; t]];
    for omega in Obs::BOTH {
        let mut previous: Option<f64> = None;
        for u in 1..=t {
            let idx = mdp.state_index(BeliefStateId::new(omega, u));
            let bracket = match previous {
                Some(p) => (p - 0.25, p + 0.25),
                None => (-2.0, 2.0),
            };
            let m = reference_whittle_in(&mdp, idx, beta, tol, bracket, &mut v)?;
            w[omega.index()][u - 1] = m;
            previous = Some(m);
        }
    }
    Ok(WhittleTable::from_parts(t, w))
}

/// Exhaustive maximization of `J_m` over all forward threshold policies
/// `(x0, x1)` in `{1..T}^2`; ties break toward the lexicographically
/// smaller pair.
pub fn enumerate_threshold_policies(
    chains: &BeliefChains,
    m: f64,
) -> Result<(ForwardThresholdPolicy, f64), OracleError> {
    const MAX_T: usize = 64;
    let t = chains.horizon();
    if t > MAX_T {
        return Err(OracleError::EnumerationGuard { t, max: MAX_T });
    }
    let mut best: Option<(ForwardThresholdPolicy, f64)> = None;
    for x0 in 1..=t {
        for x1 in 1..=t {
            let policy = ForwardThresholdPolicy::new(x0, x1);
            let value = avg_reward_linear(chains, policy)?.eval(m);
            if best.map_or(true, |(_, v)| value > v) {
                best = Some((policy, value));
            }
        }
    }
    Ok(best.expect("t >= 1 guarantees at least one policy"))
}

/// Action pattern of an optimal policy over the belief axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolicyShape {
    /// Active on low beliefs, passive above one threshold.
    Forward,
    /// Passive on low beliefs, active above one threshold.
    Reverse,
    /// Active only on an interior belief interval.
    Dual,
    /// Any other pattern.
    Other,
    AllPassive,
    AllActive,
}

/// Classifies the greedy policy of the subsidized value function by its
/// action pattern along increasing belief. States whose beliefs collide
/// within 1e-12 are merged first (deep chain states pile up at the
/// stationary belief); the merged state takes the action of its most
/// decisively valued member.
///
/// The two truncation-boundary states `u = T` are excluded from the
/// read-off: their self-loop freezes the belief wherever the chain
/// happened to be, and for strongly oscillating chains that manufactures
/// an action switch at an arbitrary interior belief that the infinite
/// chain does not have.
pub fn classify_policy_shape(
    model: &TransitionModel,
    m: f64,
    beta: f64,
    t: usize,
    tol: f64,
) -> Result<PolicyShape, OracleError> {
    let table = value_iteration(model, m, beta, t, tol)?;
    let chains = BeliefChains::build(model, t)?;
    let mut states: Vec<(f64, f64)> = chains
        .states()
        .filter(|id| id.u < t)
        .map(|id| (chains.belief(id), table.passive_margin(id)))
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Merge belief ties, keeping the margin with the largest magnitude.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(states.len());
    for (b, margin) in states {
        match merged.last_mut() {
            Some((last_b, last_margin)) if (b - *last_b).abs() <= BELIEF_TIE_TOLERANCE => {
                if margin.abs() > last_margin.abs() {
                    *last_margin = margin;
                }
            }
            _ => merged.push((b, margin)),
        }
    }

    let actions: Vec<bool> = merged.iter().map(|(_, margin)| *margin < 0.0).collect();
    let mut switches = Vec::new();
    for i in 1..actions.len() {
        if actions[i] != actions[i - 1] {
            switches.push(i);
        }
    }
    let first_active = actions[0];
    Ok(match switches.len() {
        0 => {
            if first_active {
                PolicyShape::AllActive
            } else {
                PolicyShape::AllPassive
            }
        }
        1 => {
            if first_active {
                PolicyShape::Forward
            } else {
                PolicyShape::Reverse
            }
        }
        2 => {
            if first_active {
                PolicyShape::Other
            } else {
                PolicyShape::Dual
            }
        }
        _ => PolicyShape::Other,
    })
}

/// Passive-set growth along a subsidy grid.
#[derive(Debug, Clone, Serialize)]
pub struct IndexabilityReport {
    pub beta: f64,
    pub m_grid: Vec<f64>,
    /// Number of states where passive is strictly optimal at each m.
    pub passive_set_sizes: Vec<usize>,
    /// True iff each passive set contains its predecessor.
    pub monotone: bool,
    /// First `(grid index, omega, u)` that left the passive set as m
    /// increased, if any.
    pub first_violation: Option<(usize, usize, usize)>,
}

/// Numeric indexability check: sweeps the subsidy grid and verifies the
/// strictly-passive set only grows. Membership requires a value margin
/// above 1e-9 so numerical indifference never counts as passive.
pub fn check_indexability(
    model: &TransitionModel,
    beta: f64,
    m_grid: &[f64],
    t: usize,
    tol: f64,
) -> Result<IndexabilityReport, OracleError> {
    check_vi_args(beta, t, tol)?;
    if m_grid.len() < 2
        || m_grid.windows(2).any(|w| w[0] >= w[1])
        || m_grid[0] > -2.0
        || m_grid[m_grid.len() - 1] < 2.0
    {
        return Err(OracleError::InvalidGrid);
    }
    let chains = BeliefChains::build(model, t)?;
    let mdp = TruncatedBeliefMdp::from_chains(&chains);
    let mut v = vec![0.0; 2 * t];
    let mut previous: Vec<bool> = vec![false; 2 * t];
    let mut sizes = Vec::with_capacity(m_grid.len());
    let mut monotone = true;
    let mut first_violation = None;
    for (gi, &m) in m_grid.iter().enumerate() {
        mdp.solve(m, beta, tol, &mut v)?;
        let mut count = 0;
        for idx in 0..2 * t {
            let passive = mdp.passive_margin(&v, m, beta, idx) > PASSIVE_SET_MARGIN;
            if passive {
                count += 1;
            }
            if previous[idx] && !passive {
                monotone = false;
                if first_violation.is_none() {
                    first_violation = Some((gi, idx / t, idx % t + 1));
                }
            }
            previous[idx] = passive;
        }
        sizes.push(count);
    }
    Ok(IndexabilityReport {
        beta,
        m_grid: m_grid.to_vec(),
        passive_set_sizes: sizes,
        monotone,
        first_violation,
    })
}

/// Whittle indices of the fully observed two-state MDP (reward equals
/// the state), used by the oracle baseline policy. Returns the index of
/// latent state 0 and latent state 1.
pub fn full_observation_whittle(
    model: &TransitionModel,
    beta: f64,
    tol: f64,
) -> Result<(f64, f64), OracleError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(OracleError::InvalidDiscount(beta));
    }
    if !(tol > 0.0) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    let cap = iteration_cap(beta, tol);
    // Two-state subsidized value iteration; s in {0, 1}, reward = s.
    let solve = |m: f64| -> Result<[f64; 2], OracleError> {
        let mut v = [0.0f64; 2];
        for _ in 0..cap {
            let mut next = [0.0f64; 2];
            let mut residual = 0.0f64;
            for s in 0..2 {
                let reward = s as f64;
                let pp = model.passive_to_good(s == 1);
                let pa = model.active_to_good(s == 1);
                let passive = m + reward + beta * (pp * v[1] + (1.0 - pp) * v[0]);
                let active = reward + beta * (pa * v[1] + (1.0 - pa) * v[0]);
                next[s] = passive.max(active);
                residual = residual.max((next[s] - v[s]).abs());
            }
            v = next;
            if residual < tol {
                return Ok(v);
            }
        }
        Err(OracleError::NoConvergence {
            iterations: cap,
            residual: f64::NAN,
        })
    };
    let margin = |m: f64, s: usize| -> Result<f64, OracleError> {
        let v = solve(m)?;
        let reward = s as f64;
        let pp = model.passive_to_good(s == 1);
        let pa = model.active_to_good(s == 1);
        let passive = m + reward + beta * (pp * v[1] + (1.0 - pp) * v[0]);
        let active = reward + beta * (pa * v[1] + (1.0 - pa) * v[0]);
        Ok(passive - active)
    };
    let w0 = bisect_subsidy(|m| Ok(margin(m, 0)? >= 0.0), (-2.0, 2.0), tol)?;
    let w1 = bisect_subsidy(|m| Ok(margin(m, 1)? >= 0.0), (-2.0, 2.0), tol)?;
    Ok((w0, w1))
}
