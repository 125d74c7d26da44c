//! Subcommand implementations. Every command resolves its arguments, does
//! its work under an output directory, and records the resolved arguments
//! as `run_config.json` so the run can be reproduced bit for bit.

mod ingest;
mod simulate;
mod synth;
mod theoretical;
mod train;

pub use ingest::{cmd_ingest, IngestArgs, IngestSummary};
pub use simulate::{
    cmd_compare, cmd_simulate, load_sim_config, simulate_tas_with_decisions, CompareArgs,
    PolicyArg, SimulateArgs,
};
pub use synth::{cmd_synth_telemetry, cmd_synth_trace, SynthTelemetryArgs, SynthTraceArgs};
pub use theoretical::{cmd_compare_theoretical, CompareTheoreticalArgs, TheoreticalSummary};
pub use train::{cmd_train, ModelKindArg, TrainArgs, TrainSummary};

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Write pretty JSON plus a trailing newline (stable across runs).
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Record the resolved arguments of a run alongside its outputs.
pub(crate) fn write_run_config<T: Serialize>(out_dir: &Path, command: &str, args: &T) -> Result<()> {
    #[derive(Serialize)]
    struct RunConfig<'a, T> {
        command: &'a str,
        args: &'a T,
    }
    write_json(&out_dir.join("run_config.json"), &RunConfig { command, args })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Sorted `.csv` files directly under a directory, or the path itself when
/// it names a file.
pub(crate) fn csv_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        anyhow::bail!("no .csv files under {}", path.display());
    }
    Ok(files)
}
