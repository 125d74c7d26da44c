//! `compare-theoretical`: learned models against the analytical RC baseline
//! on sampled telemetry tuples.

use std::path::PathBuf;

use anyhow::{Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rackheat::models::ModelBank;
use rackheat::thermal::{rc_temperature, RcParams};

use super::{ensure_dir, ingest::load_datasets, write_json, write_run_config};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareTheoreticalArgs {
    pub model_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Number of tuples to sample across all hosts.
    pub n: usize,
    pub seed: u64,
    pub rc: RcParams,
    /// Elapsed time fed to the RC step response, seconds. Defaults to one
    /// scheduling interval.
    pub rc_horizon_s: f64,
}

impl CompareTheoreticalArgs {
    pub fn new(model_dir: PathBuf, dataset_dir: PathBuf, out_dir: PathBuf, n: usize, seed: u64) -> Self {
        CompareTheoreticalArgs {
            model_dir,
            dataset_dir,
            out_dir,
            n,
            seed,
            rc: RcParams::default(),
            rc_horizon_s: 600.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoreticalSummary {
    /// Tuples actually scored (capped at the pool size).
    pub n: usize,
    pub capped: bool,
    pub learned_mae: f64,
    pub rc_mae: f64,
    pub learned_max_abs_err: f64,
    pub rc_max_abs_err: f64,
}

/// Sample tuples across every host's dataset (seeded), score the trained
/// model and the RC analytical estimate against the recorded target, and
/// emit the rank-ordered absolute-error curves.
pub fn cmd_compare_theoretical(args: &CompareTheoreticalArgs) -> Result<TheoreticalSummary> {
    let bank =
        ModelBank::load_dir(&args.model_dir).context("loading models for comparison")?;
    let datasets = load_datasets(&args.dataset_dir)?;

    // Pool of (dataset index, row) pairs over hosts that have a model and
    // carry the inlet column the RC estimate needs.
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (di, d) in datasets.iter().enumerate() {
        if bank.get(&d.host_id).is_err() {
            continue;
        }
        if d.inlet.is_empty() {
            anyhow::bail!(
                "dataset {} lacks the inlet column; regenerate it with ingest",
                d.host_id
            );
        }
        for row in 0..d.n_rows() {
            pool.push((di, row));
        }
    }
    if pool.is_empty() {
        anyhow::bail!("no datasets matching the model bank under {}", args.dataset_dir.display());
    }

    let capped = args.n > pool.len();
    let n = args.n.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    pool.shuffle(&mut rng);
    pool.truncate(n);
    pool.sort_unstable();

    let power_col = datasets[pool[0].0]
        .feature_names
        .iter()
        .position(|f| f == "P_c")
        .context("datasets must carry the power column")?;

    let mut learned_errs = Vec::with_capacity(n);
    let mut rc_errs = Vec::with_capacity(n);
    for &(di, row) in &pool {
        let d = &datasets[di];
        let model = bank.get(&d.host_id)?;
        let truth = d.target[row];
        let learned = model.predict(&d.rows[row])?;
        // The RC step response estimates the CPU-side temperature above the
        // inlet; adding the recorded inlet maps it into the ambient frame,
        // and the inlet term cancels in the absolute error.
        let rc_cpu =
            rc_temperature(d.rows[row][power_col], d.inlet[row], args.rc_horizon_s, &args.rc)?;
        let rc_ambient = rc_cpu + d.inlet[row];
        learned_errs.push((learned - truth).abs());
        rc_errs.push((rc_ambient - truth).abs());
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
    let summary = TheoreticalSummary {
        n,
        capped,
        learned_mae: mean(&learned_errs),
        rc_mae: mean(&rc_errs),
        learned_max_abs_err: max(&learned_errs),
        rc_max_abs_err: max(&rc_errs),
    };
    if capped {
        eprintln!(
            "warning: requested {} tuples but only {} available; capped",
            args.n,
            pool.len()
        );
    }

    ensure_dir(&args.out_dir)?;
    // Rank-ordered error curves, largest first, one rank per line.
    let mut learned_sorted = learned_errs.clone();
    let mut rc_sorted = rc_errs.clone();
    learned_sorted.sort_by(|a, b| b.total_cmp(a));
    rc_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut csv = String::from("rank,learned_abs_err,rc_abs_err\n");
    for (i, (l, r)) in learned_sorted.iter().zip(&rc_sorted).enumerate() {
        csv.push_str(&format!("{i},{l},{r}\n"));
    }
    std::fs::write(args.out_dir.join("error_ranks.csv"), csv)?;
    write_json(&args.out_dir.join("theoretical_summary.json"), &summary)?;
    write_run_config(&args.out_dir, "compare-theoretical", args)?;
    Ok(summary)
}
