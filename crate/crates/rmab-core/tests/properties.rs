//! Property suites tying the fast paths to independent slow oracles.

use proptest::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use rmab_core::belief::{
    forward_threshold_condition, reverse_threshold_condition, stationary_belief, tau,
    BeliefChains, BeliefStateId, BeliefTrend, Obs,
};
use rmab_core::model::TransitionModel;
use rmab_core::oracle::enumerate_threshold_policies;
use rmab_core::whittle::{
    avg_reward_linear, compute_index_table, occupancy, whittle_on_demand, ForwardThresholdPolicy,
};

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Rejection-samples a strict-natural model from Uniform(0,1)^4.
fn random_strict_natural(rng: &mut impl RngCore) -> TransitionModel {
    loop {
        let p = [uniform(rng), uniform(rng), uniform(rng), uniform(rng)];
        if let Ok(m) = TransitionModel::strict_natural(p[0], p[1], p[2], p[3]) {
            return m;
        }
    }
}

/// Constructive proptest strategy for strict-natural models (avoids
/// filter-based rejection, which proptest throttles).
fn strict_natural_strategy() -> impl Strategy<Value = TransitionModel> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c, d)| {
        let p01p = 0.02 + 0.55 * a;
        let p01a = p01p + 0.01 + (0.75 - p01p - 0.01) * b;
        let p11p = p01p + 0.01 + (0.90 - p01p - 0.01) * c;
        let lower = p11p.max(p01a) + 0.005;
        let p11a = lower + (0.985 - lower) * d;
        TransitionModel::strict_natural(p01p, p11p, p01a, p11a).expect("constructed to be valid")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tau_composes(
        model in strict_natural_strategy(),
        u in 0u32..=50,
        v in 0u32..=50,
        b in 0.0..=1.0f64,
    ) {
        let composed = tau(&model, u, tau(&model, v, b));
        let direct = tau(&model, u + v, b);
        prop_assert!((composed - direct).abs() < 1e-12, "{composed} vs {direct}");
    }

    #[test]
    fn tau_is_monotone_in_belief(
        model in strict_natural_strategy(),
        u in 0u32..=50,
        b1 in 0.0..=1.0f64,
        gap in 1e-6..=0.5f64,
    ) {
        let b2 = (b1 + gap).min(1.0);
        prop_assume!(b2 > b1);
        let (t1, t2) = (tau(&model, u, b1), tau(&model, u, b2));
        prop_assert!(t1 <= t2);
        // Strict order is only representable while the geometric factor
        // hasn't pushed the propagated gap below double precision.
        let propagated = (model.p11p() - model.p01p()).powi(u as i32) * (b2 - b1);
        if propagated > 1e-12 {
            prop_assert!(t1 < t2);
        }
    }

    #[test]
    fn tau_converges_geometrically(
        model in strict_natural_strategy(),
        u in 0u32..=60,
        b in 0.0..=1.0f64,
    ) {
        let b_star = stationary_belief(&model);
        let lhs = (tau(&model, u, b) - b_star).abs();
        let rhs = (model.p11p() - model.p01p()).powi(u as i32) * (b - b_star).abs();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn tau_range_stays_interior(
        model in strict_natural_strategy(),
        u in 1u32..=50,
        b in 0.0..=1.0f64,
    ) {
        let out = tau(&model, u, b);
        prop_assert!(out > model.p01p().min(b) - 1e-15);
        prop_assert!(out < model.p11p().max(b) + 1e-15);
        prop_assert!(out > 0.0 && out < 1.0);
    }

    #[test]
    fn forward_and_reverse_conditions_are_exclusive(
        model in strict_natural_strategy(),
        beta in 0.01..=0.99f64,
    ) {
        let forward = forward_threshold_condition(&model, beta).unwrap();
        let reverse = reverse_threshold_condition(&model, beta).unwrap();
        prop_assert!(!(forward && reverse), "both conditions hold at beta={beta}");
    }
}

#[test]
fn trend_dichotomy_matches_stationary_comparison() {
    // NIB exactly when the chain-0 head p01a sits at or above b*.
    let mut rng = ChaCha12Rng::seed_from_u64(0xd1c407);
    for _ in 0..1000 {
        let model = random_strict_natural(&mut rng);
        let chains = BeliefChains::build(&model, 30).unwrap();
        let expected = if model.p01a() >= stationary_belief(&model) {
            BeliefTrend::NonIncreasingBelief
        } else {
            BeliefTrend::SplitBelief
        };
        assert_eq!(chains.classify_trend(), expected, "{model:?}");
    }
}

#[test]
fn chain_one_never_rises_for_strict_natural_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    for _ in 0..500 {
        let model = random_strict_natural(&mut rng);
        let chains = BeliefChains::build(&model, 25).unwrap();
        let chain = chains.chain(Obs::One);
        assert!(
            chain.windows(2).all(|w| w[0] >= w[1]),
            "chain 1 rose for {model:?}"
        );
    }
}

/// Stationary distribution of the explicitly built `(x0 + x1)`-state
/// chain, by power iteration on the half-lazy kernel `(I + P) / 2`
/// (same stationary distribution, never periodic).
fn stationary_by_power_iteration(
    chains: &BeliefChains,
    policy: ForwardThresholdPolicy,
    tol: f64,
) -> Vec<f64> {
    let (x0, x1) = (policy.x0, policy.x1);
    let n = x0 + x1;
    // State layout: chain-0 positions 1..=x0, then chain-1 positions.
    let b0 = chains.belief(BeliefStateId::new(Obs::Zero, x0));
    let b1 = chains.belief(BeliefStateId::new(Obs::One, x1));
    let mut p = vec![vec![0.0f64; n]; n];
    for i in 0..x0 {
        if i + 1 < x0 {
            p[i][i + 1] = 1.0;
        } else {
            p[i][x0] = b0; // to chain-1 head
            p[i][0] = 1.0 - b0; // to chain-0 head
        }
    }
    for j in 0..x1 {
        let i = x0 + j;
        if j + 1 < x1 {
            p[i][i + 1] = 1.0;
        } else {
            p[i][x0] = b1;
            p[i][0] = 1.0 - b1;
        }
    }
    let mut dist = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    for _ in 0..2_000_000 {
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for (i, &mass) in dist.iter().enumerate() {
            for (j, &prob) in p[i].iter().enumerate() {
                next[j] += mass * prob;
            }
        }
        let mut delta = 0.0f64;
        for i in 0..n {
            next[i] = 0.5 * (next[i] + dist[i]);
            delta = delta.max((next[i] - dist[i]).abs());
        }
        std::mem::swap(&mut dist, &mut next);
        if delta < tol {
            break;
        }
    }
    dist
}

#[test]
fn occupancy_matches_power_iteration() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x0cc);
    let t = 9;
    for case in 0..500 {
        let model = random_strict_natural(&mut rng);
        let chains = BeliefChains::build(&model, t).unwrap();
        let x0 = 1 + (rng.next_u64() as usize) % t;
        let x1 = 1 + (rng.next_u64() as usize) % t;
        let policy = ForwardThresholdPolicy::new(x0, x1);
        let occ = occupancy(&chains, policy).unwrap();
        let dist = stationary_by_power_iteration(&chains, policy, 1e-13);
        for (i, &freq) in dist.iter().enumerate() {
            let expected = if i < x0 { occ.alpha } else { occ.beta_freq };
            assert!(
                (freq - expected).abs() < 1e-9,
                "case {case} ({x0},{x1}) state {i}: {freq} vs {expected}"
            );
        }
    }
}

#[test]
fn average_reward_is_linear_in_subsidy() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x11e4);
    let t = 8;
    for _ in 0..200 {
        let model = random_strict_natural(&mut rng);
        let chains = BeliefChains::build(&model, t).unwrap();
        let policy = ForwardThresholdPolicy::new(
            1 + (rng.next_u64() as usize) % t,
            1 + (rng.next_u64() as usize) % t,
        );
        let line = avg_reward_linear(&chains, policy).unwrap();
        let occ = occupancy(&chains, policy).unwrap();
        for m in [-1.0, 0.0, 1.0, 2.0] {
            // Direct occupancy-weighted reward: every occupied state
            // contributes its belief, passive states add the subsidy.
            let mut direct = 0.0;
            for id in chains.states() {
                let f = occ.frequency(id);
                if f == 0.0 {
                    continue;
                }
                let is_threshold = (id.omega == Obs::Zero && id.u == policy.x0)
                    || (id.omega == Obs::One && id.u == policy.x1);
                direct += f * (chains.belief(id) + if is_threshold { 0.0 } else { m });
            }
            assert!(
                (direct - line.eval(m)).abs() < 1e-12,
                "m={m}: {direct} vs {}",
                line.eval(m)
            );
        }
    }
}

#[test]
fn on_demand_index_matches_table_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xa11);
    let t = 6;
    for _ in 0..100 {
        let model = random_strict_natural(&mut rng);
        let chains = BeliefChains::build(&model, t).unwrap();
        let table = compute_index_table(&chains);
        for id in chains.states() {
            assert_eq!(whittle_on_demand(&chains, id), table.index(id), "{model:?} {id:?}");
        }
    }
}

/// Samples a non-increasing-belief model that satisfies the forward
/// threshold condition at the given discount.
fn random_forward_nib(rng: &mut impl RngCore, beta: f64, t: usize) -> TransitionModel {
    loop {
        let model = random_strict_natural(rng);
        if !forward_threshold_condition(&model, beta).unwrap() {
            continue;
        }
        let chains = BeliefChains::build(&model, t).unwrap();
        if chains.classify_trend() == BeliefTrend::NonIncreasingBelief {
            return model;
        }
    }
}

#[test]
fn index_brackets_the_enumeration_switch() {
    // At a subsidy just below a state's index, the best threshold policy
    // over the whole T^2 lattice still acts at that state; just above,
    // it no longer does. Checked for interior states of NIB forward
    // models whose assignment traces are monotone.
    let mut rng = ChaCha12Rng::seed_from_u64(0xb4ac4e7);
    let t = 8;
    let eps = 1e-7;
    let mut monotone_models = 0;
    for _ in 0..30 {
        let model = random_forward_nib(&mut rng, 0.2, t);
        let chains = BeliefChains::build(&model, t).unwrap();
        let table = compute_index_table(&chains);
        let trace = table.trace();
        let loop_trace = &trace[..trace.len() - 2];
        if loop_trace.windows(2).any(|w| w[0].subsidy > w[1].subsidy) {
            continue;
        }
        monotone_models += 1;
        for (i, assignment) in loop_trace.iter().enumerate() {
            let w = assignment.subsidy;
            // Skip states whose index ties its neighbors in the trace.
            let prev_gap = i == 0 || loop_trace[i - 1].subsidy < w - 3.0 * eps;
            let next_gap = loop_trace
                .get(i + 1)
                .map_or(true, |next| next.subsidy > w + 3.0 * eps);
            if !prev_gap || !next_gap {
                continue;
            }
            let acts = |m: f64| {
                let (best, _) = enumerate_threshold_policies(&chains, m).unwrap();
                match assignment.omega {
                    Obs::Zero => assignment.u >= best.x0,
                    Obs::One => assignment.u >= best.x1,
                }
            };
            assert!(
                acts(w - eps),
                "{model:?}: best policy passive at {assignment:?} below its index"
            );
            assert!(
                !acts(w + eps),
                "{model:?}: best policy active at {assignment:?} above its index"
            );
        }
    }
    assert!(
        monotone_models >= 24,
        "only {monotone_models}/30 sampled models had monotone traces"
    );
}

#[test]
fn negative_subsidy_enumeration_prefers_acting_at_both_heads() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x9e9);
    for _ in 0..50 {
        let model = random_forward_nib(&mut rng, 0.2, 6);
        let chains = BeliefChains::build(&model, 6).unwrap();
        let table = compute_index_table(&chains);
        let first = table.trace()[0].subsidy;
        let (best, _) = enumerate_threshold_policies(&chains, first - 0.5).unwrap();
        assert_eq!(best, ForwardThresholdPolicy::new(1, 1), "{model:?}");
    }
}
