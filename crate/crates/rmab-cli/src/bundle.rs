//! Experiment output serialization.
//!
//! The `results` subtree is a pure function of the inputs and seed, so
//! repeated runs produce byte-identical JSON there; wall-clock timings
//! live in a separate `runtime_seconds` subtree.

use std::io::Write;

use serde::Serialize;

use rmab_core::sim::{PolicyBenefit, PolicyResult};
use rmab_core::util::format_sig;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub k: usize,
    pub t_horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub beta: f64,
    pub policies: Vec<String>,
    /// Cohort provenance: file path or generator spec.
    pub source: String,
    pub strictness: String,
    /// Substitutions and caveats worth keeping next to the numbers.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub policy: String,
    pub mean_total_reward: f64,
    pub se_total_reward: f64,
    pub ib_percent: f64,
    pub mean_round_rewards: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResults {
    pub policies: Vec<PolicyReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeReport {
    pub table_precompute: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_precompute: Option<f64>,
    pub simulation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub tool_version: String,
    pub config: ConfigEcho,
    pub results: SimResults,
    pub runtime_seconds: RuntimeReport,
}

impl SimResults {
    pub fn assemble(results: &[PolicyResult], benefits: &[PolicyBenefit]) -> Self {
        let policies = results
            .iter()
            .map(|r| {
                let ib = benefits
                    .iter()
                    .find(|b| b.policy == r.policy)
                    .map(|b| b.ib_percent)
                    .unwrap_or(f64::NAN);
                PolicyReport {
                    policy: r.policy.id().to_string(),
                    mean_total_reward: r.mean_total_reward,
                    se_total_reward: r.se_total_reward,
                    ib_percent: ib,
                    mean_round_rewards: r.mean_round_rewards.clone(),
                }
            })
            .collect();
        Self { policies }
    }
}

/// Per-policy summary rows: `policy,mean_total_reward,se_total_reward,ib_percent`.
pub fn write_summary_csv<W: Write>(out: &mut W, results: &SimResults) -> std::io::Result<()> {
    writeln!(out, "policy,mean_total_reward,se_total_reward,ib_percent")?;
    for p in &results.policies {
        writeln!(
            out,
            "{},{},{},{}",
            p.policy,
            format_sig(p.mean_total_reward, 12),
            format_sig(p.se_total_reward, 12),
            format_sig(p.ib_percent, 12),
        )?;
    }
    Ok(())
}
