//! Browser bindings for the index planner.
//!
//! Three interactive operations, each taking plain numbers and returning
//! a JSON string (`{"error": ...}` on invalid input) so the page needs
//! no generated glue beyond the standard wasm-bindgen loader:
//!
//! - [`chain_analysis`] — belief chains, stationary belief, trend, and
//!   the threshold-optimality conditions.
//! - [`index_table`] — fast Whittle indices along both chains.
//! - [`simulate`] — a small jittered cohort rolled out under every
//!   policy, with per-round reward curves and intervention benefit.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use rmab_core::belief::{
    forward_threshold_condition, reverse_threshold_condition, BeliefChains, BeliefTrend, Obs,
};
use rmab_core::model::TransitionModel;
use rmab_core::sim::{
    intervention_benefit, run_trials, Cohort, PolicyKind, SimulationConfig,
};
use rmab_core::whittle::compute_index_table;

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| err_json(e))
}

fn parse_model(p01p: f64, p11p: f64, p01a: f64, p11a: f64) -> Result<TransitionModel, String> {
    TransitionModel::strict_natural(p01p, p11p, p01a, p11a).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ChainAnalysis {
    b_star: f64,
    chain0: Vec<f64>,
    chain1: Vec<f64>,
    trend: &'static str,
    forward_condition: bool,
    reverse_condition: bool,
}

/// Belief chains of one arm at horizon `t`, with the trend class and the
/// forward/reverse threshold-optimality conditions at discount `beta`.
#[wasm_bindgen]
pub fn chain_analysis(p01p: f64, p11p: f64, p01a: f64, p11a: f64, t: usize, beta: f64) -> String {
    let model = match parse_model(p01p, p11p, p01a, p11a) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    let chains = match BeliefChains::build(&model, t.clamp(1, 2000)) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let forward = match forward_threshold_condition(&model, beta) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let reverse = match reverse_threshold_condition(&model, beta) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    to_json(&ChainAnalysis {
        b_star: chains.b_star(),
        chain0: chains.chain(Obs::Zero).to_vec(),
        chain1: chains.chain(Obs::One).to_vec(),
        trend: match chains.classify_trend() {
            BeliefTrend::NonIncreasingBelief => "NIB",
            BeliefTrend::SplitBelief => "SB",
        },
        forward_condition: forward,
        reverse_condition: reverse,
    })
}

#[derive(Serialize)]
struct IndexTable {
    w0: Vec<f64>,
    w1: Vec<f64>,
    beliefs0: Vec<f64>,
    beliefs1: Vec<f64>,
}

/// Whittle index of every belief state of one arm at horizon `t`.
#[wasm_bindgen]
pub fn index_table(p01p: f64, p11p: f64, p01a: f64, p11a: f64, t: usize) -> String {
    let model = match parse_model(p01p, p11p, p01a, p11a) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    let chains = match BeliefChains::build(&model, t.clamp(1, 2000)) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let table = compute_index_table(&chains);
    to_json(&IndexTable {
        w0: table.chain(Obs::Zero).to_vec(),
        w1: table.chain(Obs::One).to_vec(),
        beliefs0: chains.chain(Obs::Zero).to_vec(),
        beliefs1: chains.chain(Obs::One).to_vec(),
    })
}

#[derive(Serialize)]
struct PolicyCurve {
    policy: String,
    ib_percent: f64,
    mean_total_reward: f64,
    mean_round_rewards: Vec<f64>,
}

#[derive(Serialize)]
struct SimulationOutput {
    n: usize,
    k: usize,
    t: usize,
    trials: usize,
    policies: Vec<PolicyCurve>,
}

/// Rolls out a cohort of `n` arms jittered around the given model
/// (uniform +-`jitter` per probability, resampled until valid) under the
/// index, myopic, random, oracle, and never-act policies.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    p01p: f64,
    p11p: f64,
    p01a: f64,
    p11a: f64,
    jitter: f64,
    n: usize,
    k: usize,
    t: usize,
    trials: usize,
    seed: u64,
) -> String {
    if !(0.0..0.5).contains(&jitter) {
        return err_json("jitter must be in [0, 0.5)");
    }
    if n == 0 || n > 1000 {
        return err_json("n must be in 1..=1000");
    }
    if t == 0 || t > 2000 {
        return err_json("t must be in 1..=2000");
    }
    if trials == 0 || trials > 500 {
        return err_json("trials must be in 1..=500");
    }
    let base = match parse_model(p01p, p11p, p01a, p11a) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut models = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0;
        let model = loop {
            attempts += 1;
            if attempts > 10_000 {
                return err_json("jitter keeps violating the model constraints");
            }
            let draw = |v: f64, u: f64| (v + jitter * (2.0 * u - 1.0)).clamp(1e-3, 1.0 - 1e-3);
            let candidate = TransitionModel::strict_natural(
                draw(base.p01p(), uniform()),
                draw(base.p11p(), uniform()),
                draw(base.p01a(), uniform()),
                draw(base.p11a(), uniform()),
            );
            if let Ok(m) = candidate {
                break m;
            }
        };
        models.push(model);
    }
    let config = SimulationConfig {
        k,
        horizon: t,
        trials,
        seed,
        beta: 0.999,
    };
    let cohort = match Cohort::build(&models, &config) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let policies = [
        PolicyKind::ThresholdWhittle,
        PolicyKind::Myopic,
        PolicyKind::Random,
        PolicyKind::NeverAct,
        PolicyKind::Oracle,
    ];
    let results = match run_trials(&cohort, &config, &policies) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let benefits = match intervention_benefit(&results) {
        Ok(b) => b,
        Err(e) => return err_json(e),
    };
    let curves = results
        .iter()
        .map(|r| PolicyCurve {
            policy: r.policy.id().to_string(),
            ib_percent: benefits
                .iter()
                .find(|b| b.policy == r.policy)
                .map(|b| b.ib_percent)
                .unwrap_or(f64::NAN),
            mean_total_reward: r.mean_total_reward,
            mean_round_rewards: r.mean_round_rewards.clone(),
        })
        .collect();
    to_json(&SimulationOutput {
        n,
        k,
        t,
        trials,
        policies: curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_analysis_round_trips() {
        let out = chain_analysis(0.2, 0.6, 0.5, 0.8, 5, 0.2);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["b_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(v["trend"], "NIB");
        assert_eq!(v["forward_condition"], true);
        assert_eq!(v["chain1"][0], 0.8);
    }

    #[test]
    fn invalid_model_reports_error() {
        let out = chain_analysis(0.6, 0.2, 0.5, 0.8, 5, 0.2);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["error"].as_str().unwrap().contains("p01p"));
    }

    #[test]
    fn index_table_matches_hand_values() {
        let out = index_table(0.2, 0.6, 0.5, 0.8, 2);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["w1"][0].as_f64().unwrap() - 11.0 / 35.0).abs() < 1e-12);
        assert!((v["w0"][0].as_f64().unwrap() - 17.0 / 44.0).abs() < 1e-12);
    }

    #[test]
    fn simulate_outputs_all_policies() {
        let out = simulate(0.2, 0.6, 0.5, 0.8, 0.05, 20, 2, 30, 5, 7);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let policies = v["policies"].as_array().unwrap();
        assert_eq!(policies.len(), 5);
        let oracle = policies
            .iter()
            .find(|p| p["policy"] == "oracle")
            .unwrap();
        assert!((oracle["ib_percent"].as_f64().unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(
            oracle["mean_round_rewards"].as_array().unwrap().len(),
            30
        );
    }

    #[test]
    fn simulate_rejects_bad_budget() {
        let out = simulate(0.2, 0.6, 0.5, 0.8, 0.05, 5, 9, 10, 2, 1);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["error"].as_str().unwrap().contains("budget"));
    }

    #[test]
    fn simulate_is_deterministic() {
        let a = simulate(0.2, 0.6, 0.5, 0.8, 0.05, 10, 1, 20, 3, 42);
        let b = simulate(0.2, 0.6, 0.5, 0.8, 0.05, 10, 1, 20, 3, 42);
        assert_eq!(a, b);
    }
}
