//! `rmab` — index planning and cohort experiments for binary-state
//! restless bandits whose arms reveal their state when acted on.
//!
//! Exit codes: 0 success, 1 validation or runtime error, 2 verification
//! failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rmab_cli::bench::{run_bench, write_bench_csv, BenchParams};
use rmab_cli::bundle::write_summary_csv;
use rmab_cli::cohort::{
    read_cohort_file, with_sequential_ids, write_cohort_file, CohortArm, COHORT_HEADER,
};
use rmab_cli::generate::{generate_cohort, perturb_matrix, GeneratorSpec, PERTURB_EPS};
use rmab_cli::runner::{parse_policies, run_experiment, ExperimentSpec};
use rmab_cli::verify::{run_verify, VerifyParams};
use rmab_core::belief::BeliefChains;
use rmab_core::model::Strictness;
use rmab_core::sim::SimulationConfig;
use rmab_core::whittle::compute_index_table;

#[derive(Parser)]
#[command(
    name = "rmab",
    version,
    about = "Index planning and cohort simulation for restless bandits with observe-on-action arms"
)]
struct Cli {
    /// Worker threads for per-arm fan-out (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CohortInput {
    /// Cohort CSV (header `arm_id,p01p,p11p,p01a,p11a`).
    #[arg(long, value_name = "PATH", conflicts_with = "generate")]
    arms_file: Option<PathBuf>,
    /// Generator spec, e.g. `uniform-natural` or
    /// `self-correcting-mix:fraction=0.6`.
    #[arg(long, value_name = "SPEC")]
    generate: Option<String>,
    /// Cohort size when generating.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Validate ingested files with the relaxed (0,1)-only constraints.
    #[arg(long)]
    relaxed: bool,
}

impl CohortInput {
    fn strictness(&self) -> Strictness {
        if self.relaxed {
            Strictness::Relaxed
        } else {
            Strictness::StrictNatural
        }
    }

    fn load(&self, seed: u64) -> anyhow::Result<(Vec<CohortArm>, String)> {
        match (&self.arms_file, &self.generate) {
            (Some(path), None) => {
                let arms = read_cohort_file(path, self.strictness())?;
                Ok((arms, path.display().to_string()))
            }
            (None, Some(spec_text)) => {
                let spec: GeneratorSpec = spec_text.parse()?;
                let models = generate_cohort(spec, self.n, seed)?;
                Ok((with_sequential_ids(models), spec_text.clone()))
            }
            _ => bail!("provide exactly one of --arms-file or --generate"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV.
    Generate {
        /// One of: `uniform-natural`, `self-correcting-mix:fraction=F`,
        /// `entropy-sweep:x=X`, `state-one-responsive:fraction=F`,
        /// `threshold-optimal-mix:fraction=F,beta=B`.
        #[arg(long, value_name = "SPEC")]
        spec: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split an averaged transition row pair into passive/active models.
    Perturb {
        /// Average P(0 -> 1).
        #[arg(long)]
        q01: f64,
        /// Average P(1 -> 1).
        #[arg(long)]
        q11: f64,
        /// Subtracted from q01 for the passive matrix.
        #[arg(long)]
        d1: f64,
        /// Subtracted from q11 for the passive matrix.
        #[arg(long)]
        d2: f64,
        /// Added to q01 for the active matrix.
        #[arg(long)]
        d3: f64,
        /// Added to q11 for the active matrix.
        #[arg(long)]
        d4: f64,
        /// Rows to emit (identical perturbed model per row).
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute fast Whittle index tables for every arm.
    Index {
        #[command(flatten)]
        input: CohortInput,
        #[arg(long, default_value_t = 180)]
        t_horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV `arm_id,omega,u,index`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cohort experiment and report intervention benefit.
    Simulate {
        #[command(flatten)]
        input: CohortInput,
        /// Arms acted on per round.
        #[arg(long, conflicts_with = "k_pct")]
        k: Option<usize>,
        /// Budget as a percentage of the cohort size (default 10%).
        #[arg(long)]
        k_pct: Option<f64>,
        #[arg(long, default_value_t = 180)]
        t_horizon: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Discount for oracle/reference index computations.
        #[arg(long, default_value_t = 0.999)]
        beta: f64,
        /// Comma-separated policies (never_act and oracle always run).
        #[arg(long, default_value = "threshold_whittle,myopic,random")]
        policies: String,
        /// Binary-search tolerance for reference_whittle tables.
        #[arg(long, default_value_t = 1e-4)]
        ref_tol: f64,
        /// Result bundle JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-policy summary CSV.
        #[arg(long)]
        summary_csv: Option<PathBuf>,
    },
    /// Time fast index tables against the reference solver.
    Bench {
        /// Comma-separated cohort sizes.
        #[arg(long, default_value = "10,25,50")]
        n_list: String,
        #[arg(long, default_value_t = 180)]
        t_horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.999)]
        beta: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Output CSV `N,t_threshold_whittle,t_reference,speedup`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle verification suites and emit a JSON report.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        agreement_models: usize,
        #[arg(long, default_value_t = 50)]
        indexability_models: usize,
        #[arg(long, default_value_t = 10000)]
        conjecture_models: usize,
        #[arg(long, default_value_t = 200)]
        enum_agreement_pairs: usize,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Generate { spec, n, seed, out } => {
            let spec: GeneratorSpec = spec.parse()?;
            let arms = with_sequential_ids(generate_cohort(spec, n, seed)?);
            write_cohort_file(&out, &arms)?;
            println!("wrote {} arms to {}", arms.len(), out.display());
            Ok(0)
        }
        Command::Perturb {
            q01,
            q11,
            d1,
            d2,
            d3,
            d4,
            count,
            out,
        } => {
            let model = perturb_matrix((q01, q11), (d1, d2, d3, d4), PERTURB_EPS)?;
            let arms = with_sequential_ids(vec![model; count]);
            write_cohort_file(&out, &arms)?;
            println!(
                "perturbed ({q01}, {q11}) -> passive ({}, {}), active ({}, {}); wrote {} rows to {}",
                model.p01p(),
                model.p11p(),
                model.p01a(),
                model.p11a(),
                count,
                out.display()
            );
            Ok(0)
        }
        Command::Index {
            input,
            t_horizon,
            seed,
            out,
        } => {
            let (arms, source) = input.load(seed)?;
            let start = Instant::now();
            let tables: Vec<Vec<u8>> = arms
                .par_iter()
                .map(|arm| {
                    let chains = BeliefChains::build(&arm.model, t_horizon)?;
                    let table = compute_index_table(&chains);
                    let dips = table.chain_monotonicity_violations(1e-12);
                    // The clamped terminal solve may dip; anything
                    // earlier is worth surfacing.
                    if dips.iter().any(|(_, u)| *u + 1 < t_horizon) {
                        log::warn!("arm {}: index not monotone within a chain: {dips:?}", arm.arm_id);
                    }
                    let mut rows = Vec::new();
                    table
                        .append_csv_rows(&arm.arm_id, &mut rows)
                        .expect("in-memory write");
                    Ok::<_, anyhow::Error>(rows)
                })
                .collect::<Result<_, _>>()?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            writeln!(file, "{}", COHORT_HEADER[0].to_owned() + ",omega,u,index")?;
            for rows in tables {
                file.write_all(&rows)?;
            }
            println!(
                "indexed {} arms (T = {t_horizon}, source {source}) in {elapsed:.3} s -> {}",
                arms.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Simulate {
            input,
            k,
            k_pct,
            t_horizon,
            trials,
            seed,
            beta,
            policies,
            ref_tol,
            out,
            summary_csv,
        } => {
            let (arms, source) = input.load(seed)?;
            let n = arms.len();
            let k = match (k, k_pct) {
                (Some(k), None) => k,
                (None, pct) => {
                    let pct = pct.unwrap_or(10.0);
                    if !(0.0..=100.0).contains(&pct) {
                        bail!("--k-pct {pct} must be in [0, 100]");
                    }
                    ((pct / 100.0) * n as f64).round() as usize
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let mut notes = Vec::new();
            if source.contains("state-one-responsive") || source.contains("state_one_responsive") {
                notes.push(
                    "state-one-responsive remainder drawn from uniform-natural (no external \
                     adherence data bundled)"
                        .to_string(),
                );
            }
            let spec = ExperimentSpec {
                config: SimulationConfig {
                    k,
                    horizon: t_horizon,
                    trials,
                    seed,
                    beta,
                },
                policies: parse_policies(&policies)?,
                reference_tol: ref_tol,
                source,
                strictness: input.strictness(),
                notes,
                arms,
            };
            let bundle = run_experiment(&spec)?;
            serde_json::to_writer_pretty(
                std::fs::File::create(&out)
                    .with_context(|| format!("creating {}", out.display()))?,
                &bundle,
            )?;
            if let Some(path) = summary_csv {
                let mut file = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_summary_csv(&mut file, &bundle.results)?;
            }
            println!(
                "simulated {n} arms, k = {k}, T = {t_horizon}, {trials} trials -> {}",
                out.display()
            );
            for p in &bundle.results.policies {
                println!(
                    "  {:<18} mean total reward {:>10.2} +- {:<8.2} IB {:>6.1}%",
                    p.policy, p.mean_total_reward, p.se_total_reward, p.ib_percent
                );
            }
            Ok(0)
        }
        Command::Bench {
            n_list,
            t_horizon,
            seed,
            beta,
            tol,
            out,
        } => {
            let n_list: Vec<usize> = n_list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse().context("parsing --n-list"))
                .collect::<Result<_, _>>()?;
            if n_list.is_empty() {
                bail!("--n-list is empty");
            }
            let max_n = *n_list.iter().max().unwrap();
            let models = generate_cohort(GeneratorSpec::UniformNatural, max_n, seed)?;
            let params = BenchParams {
                n_list,
                t_horizon,
                seed,
                beta,
                tol,
            };
            let rows = run_bench(&models, &params)?;
            let mut file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            write_bench_csv(&mut file, &rows)?;
            for row in &rows {
                println!(
                    "N = {:>4}: fast {:>9.3} s, reference {:>9.3} s, speedup {:.0}x",
                    row.n, row.t_threshold_whittle, row.t_reference, row.speedup
                );
            }
            Ok(0)
        }
        Command::Verify {
            seed,
            agreement_models,
            indexability_models,
            conjecture_models,
            enum_agreement_pairs,
            out,
        } => {
            let params = VerifyParams {
                seed,
                agreement_models,
                indexability_models,
                conjecture_models,
                enum_agreement_pairs,
                ..VerifyParams::default()
            };
            let report = run_verify(&params);
            serde_json::to_writer_pretty(
                std::fs::File::create(&out)
                    .with_context(|| format!("creating {}", out.display()))?,
                &report,
            )?;
            for suite in &report.suites {
                println!(
                    "{} {}: {}",
                    if suite.pass { "PASS" } else { "FAIL" },
                    suite.name,
                    suite.detail
                );
            }
            if report.pass {
                println!("verification passed -> {}", out.display());
                Ok(0)
            } else {
                println!("verification FAILED -> {}", out.display());
                Ok(2)
            }
        }
    }
}
