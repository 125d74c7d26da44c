//! `synth-telemetry` and `synth-trace`: deterministic input generators so
//! the whole pipeline runs without access to a production data center.

use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use rackheat::sim::write_synthetic_trace;
use rackheat::synth::{synth_trace, write_telemetry, TelemetryGen, TraceGen};
use rackheat::thermal::PowerCurve;

use super::{ensure_dir, write_run_config};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTelemetryArgs {
    pub out_dir: PathBuf,
    pub n_hosts: u32,
    pub rows_per_host: usize,
    pub noise_c: f64,
    pub seed: u64,
    pub idle_hosts: Vec<u32>,
}

pub fn cmd_synth_telemetry(args: &SynthTelemetryArgs) -> Result<Vec<PathBuf>> {
    ensure_dir(&args.out_dir)?;
    let gen = TelemetryGen {
        n_hosts: args.n_hosts,
        rows_per_host: args.rows_per_host,
        noise_c: args.noise_c,
        power_curve: PowerCurve::default_dell_like(),
        seed: args.seed,
        idle_hosts: args.idle_hosts.clone(),
    };
    let paths = write_telemetry(&args.out_dir, &gen)?;
    write_run_config(&args.out_dir, "synth-telemetry", args)?;
    Ok(paths)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTraceArgs {
    pub out: PathBuf,
    pub n_vms: u32,
    pub intervals: usize,
    pub interval_s: f64,
    pub mean_cpu: f64,
    pub swing_cpu: f64,
    pub seed: u64,
}

impl SynthTraceArgs {
    pub fn new(out: PathBuf, n_vms: u32, intervals: usize, seed: u64) -> Self {
        SynthTraceArgs {
            out,
            n_vms,
            intervals,
            interval_s: 600.0,
            mean_cpu: 45.0,
            swing_cpu: 35.0,
            seed,
        }
    }
}

pub fn cmd_synth_trace(args: &SynthTraceArgs) -> Result<()> {
    let gen = TraceGen {
        n_vms: args.n_vms,
        intervals: args.intervals,
        interval_s: args.interval_s,
        mean_cpu: args.mean_cpu,
        swing_cpu: args.swing_cpu,
        seed: args.seed,
    };
    let trace = synth_trace(&gen);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_synthetic_trace(&args.out, &trace)?;
    Ok(())
}
