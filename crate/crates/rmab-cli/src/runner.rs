//! The simulate pipeline: precompute tables, roll out every policy with
//! common random numbers, and assemble the result bundle.

use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;

use rmab_core::model::{Strictness, TransitionModel};
use rmab_core::oracle::reference_index_table;
use rmab_core::sim::{intervention_benefit, run_trials, Cohort, PolicyKind, SimulationConfig};
use rmab_core::whittle::WhittleTable;

use crate::bundle::{ConfigEcho, ResultBundle, RuntimeReport, SimResults};
use crate::cohort::CohortArm;

/// Parses a comma-separated policy list.
pub fn parse_policies(spec: &str) -> anyhow::Result<Vec<PolicyKind>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<PolicyKind>().map_err(anyhow::Error::msg))
        .collect()
}

/// Reference index tables for every arm, fanned out across the rayon
/// pool (each arm's computation is independent and pure).
pub fn reference_tables_parallel(
    models: &[TransitionModel],
    beta: f64,
    t: usize,
    tol: f64,
) -> anyhow::Result<Vec<WhittleTable>> {
    models
        .par_iter()
        .map(|m| {
            reference_index_table(m, beta, t, tol)
                .with_context(|| format!("reference index table for {m:?}"))
        })
        .collect()
}

pub struct ExperimentSpec {
    pub arms: Vec<CohortArm>,
    pub config: SimulationConfig,
    /// Requested policies; the never-act and oracle baselines are always
    /// run in addition.
    pub policies: Vec<PolicyKind>,
    pub reference_tol: f64,
    pub source: String,
    pub strictness: Strictness,
    pub notes: Vec<String>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> anyhow::Result<ResultBundle> {
    let mut policies = spec.policies.clone();
    for baseline in [PolicyKind::NeverAct, PolicyKind::Oracle] {
        if !policies.contains(&baseline) {
            policies.push(baseline);
        }
    }
    let models: Vec<TransitionModel> = spec.arms.iter().map(|a| a.model).collect();

    let start = Instant::now();
    let mut cohort = Cohort::build(&models, &spec.config).context("building cohort tables")?;
    let table_precompute = start.elapsed().as_secs_f64();

    let reference_precompute = if policies.contains(&PolicyKind::ReferenceWhittle) {
        let start = Instant::now();
        let tables = reference_tables_parallel(
            &models,
            spec.config.beta,
            spec.config.horizon,
            spec.reference_tol,
        )?;
        cohort
            .attach_reference_tables(tables)
            .context("attaching reference tables")?;
        Some(start.elapsed().as_secs_f64())
    } else {
        None
    };

    let start = Instant::now();
    let results = run_trials(&cohort, &spec.config, &policies).context("running trials")?;
    let benefits = intervention_benefit(&results).context("computing intervention benefit")?;
    let simulation = start.elapsed().as_secs_f64();

    Ok(ResultBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: ConfigEcho {
            n: spec.arms.len(),
            k: spec.config.k,
            t_horizon: spec.config.horizon,
            trials: spec.config.trials,
            seed: spec.config.seed,
            beta: spec.config.beta,
            policies: policies.iter().map(|p| p.id().to_string()).collect(),
            source: spec.source.clone(),
            strictness: match spec.strictness {
                Strictness::StrictNatural => "strict-natural".into(),
                Strictness::Relaxed => "relaxed".into(),
            },
            notes: spec.notes.clone(),
        },
        results: SimResults::assemble(&results, &benefits),
        runtime_seconds: RuntimeReport {
            table_precompute,
            reference_precompute,
            simulation,
        },
    })
}
