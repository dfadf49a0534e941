//! Runtime comparison: fast sequential index tables against the
//! reference binary-search-over-value-iteration, both single-threaded.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use rmab_core::belief::BeliefChains;
use rmab_core::model::TransitionModel;
use rmab_core::oracle::{reference_index_table, OracleError};
use rmab_core::whittle::compute_index_table;

#[derive(Debug, Clone, Serialize)]
pub struct BenchParams {
    pub n_list: Vec<usize>,
    pub t_horizon: usize,
    pub seed: u64,
    /// Discount of the reference solver.
    pub beta: f64,
    /// Tolerance of the reference solver.
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub t_threshold_whittle: f64,
    pub t_reference: f64,
    pub speedup: f64,
}

/// Times full index-table construction for the first `n` models of the
/// cohort. The fast side is repeated until it accumulates enough wall
/// time to measure, and the per-pass average is reported.
pub fn run_bench(models: &[TransitionModel], params: &BenchParams) -> Result<Vec<BenchRow>, OracleError> {
    let mut rows = Vec::with_capacity(params.n_list.len());
    for &n in &params.n_list {
        let subset = &models[..n.min(models.len())];

        let fast_pass = || {
            for model in subset {
                let chains = BeliefChains::build(model, params.t_horizon).expect("t >= 1");
                let table = compute_index_table(&chains);
                std::hint::black_box(&table);
            }
        };
        let start = Instant::now();
        fast_pass();
        let mut elapsed = start.elapsed().as_secs_f64();
        if elapsed < 0.05 {
            let repeats = (0.25 / elapsed.max(1e-9)).ceil() as usize;
            let start = Instant::now();
            for _ in 0..repeats {
                fast_pass();
            }
            elapsed = start.elapsed().as_secs_f64() / repeats as f64;
        }
        let t_fast = elapsed;

        let start = Instant::now();
        for model in subset {
            let table = reference_index_table(model, params.beta, params.t_horizon, params.tol)?;
            std::hint::black_box(&table);
        }
        let t_reference = start.elapsed().as_secs_f64();

        rows.push(BenchRow {
            n: subset.len(),
            t_threshold_whittle: t_fast,
            t_reference,
            speedup: t_reference / t_fast.max(1e-12),
        });
    }
    Ok(rows)
}

/// `N,t_threshold_whittle,t_reference,speedup` with runtimes in seconds
/// at millisecond resolution.
pub fn write_bench_csv<W: Write>(out: &mut W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "N,t_threshold_whittle,t_reference,speedup")?;
    for row in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.1}",
            row.n, row.t_threshold_whittle, row.t_reference, row.speedup
        )?;
    }
    Ok(())
}
