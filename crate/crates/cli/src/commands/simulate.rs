//! `simulate` and `compare`: run a policy over a trace and compare runs.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rackheat::metrics::{aggregate, compare_runs, ComparisonTable, SimReport};
use rackheat::models::ModelBank;
use rackheat::sched::{BankPredictor, GraniteScheduler, RrScheduler, TasScheduler};
use rackheat::sim::{load_trace, SimConfig, Simulation};

use super::{ensure_dir, write_json, write_run_config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Tas,
    Rr,
    Granite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub policy: PolicyArg,
    pub model_dir: PathBuf,
    pub trace: PathBuf,
    pub out_dir: PathBuf,
    /// TOML simulator config; the desk-scale preset when absent.
    pub config: Option<PathBuf>,
    /// Record every placement decision (thermal-aware policy only).
    pub log_decisions: bool,
}

pub fn load_sim_config(path: Option<&PathBuf>) -> Result<SimConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading sim config {}", p.display()))?;
            let cfg: SimConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            Ok(cfg)
        }
        None => Ok(SimConfig::desk_scale()),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimReport> {
    let cfg = load_sim_config(args.config.as_ref())?;
    cfg.validate()?;
    let trace = load_trace(&args.trace, cfg.interval_s)
        .with_context(|| format!("loading trace {}", args.trace.display()))?;
    let bank = ModelBank::load_dir(&args.model_dir).context("loading model bank")?;
    let predictor = BankPredictor::new(&bank, &cfg)?;

    let (log, decisions) = match args.policy {
        PolicyArg::Tas => {
            let mut s = if args.log_decisions {
                TasScheduler::with_decision_log()
            } else {
                TasScheduler::new()
            };
            let log = Simulation::run(&cfg, &trace, &mut s, &predictor)?;
            let decisions = args.log_decisions.then_some(s.decisions);
            (log, decisions)
        }
        PolicyArg::Rr => {
            let mut s = RrScheduler::new();
            (Simulation::run(&cfg, &trace, &mut s, &predictor)?, None)
        }
        PolicyArg::Granite => {
            let mut s = GraniteScheduler::new(cfg.granite_s, cfg.u_max);
            (Simulation::run(&cfg, &trace, &mut s, &predictor)?, None)
        }
    };
    let report = aggregate(&log)?;

    ensure_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    write_intervals_csv(&args.out_dir, &report)?;
    write_histogram_csv(&args.out_dir, &report)?;
    write_events_csv(&args.out_dir, &log.events)?;
    if let Some(decisions) = decisions {
        write_json(&args.out_dir.join("decisions.json"), &decisions)?;
    }
    write_run_config(&args.out_dir, "simulate", args)?;
    Ok(report)
}

/// Like [`cmd_simulate`] with the thermal-aware policy, returning the
/// decision log for auditing.
pub fn simulate_tas_with_decisions(
    cfg: &SimConfig,
    trace_path: &std::path::Path,
    model_dir: &std::path::Path,
) -> Result<(SimReport, Vec<rackheat::sched::PlacementDecision>)> {
    let trace = load_trace(trace_path, cfg.interval_s)?;
    let bank = ModelBank::load_dir(model_dir)?;
    let predictor = BankPredictor::new(&bank, cfg)?;
    let mut tas = TasScheduler::with_decision_log();
    let log = Simulation::run(cfg, &trace, &mut tas, &predictor)?;
    Ok((aggregate(&log)?, tas.decisions))
}

fn write_intervals_csv(out_dir: &std::path::Path, report: &SimReport) -> Result<()> {
    let mut csv = String::from(
        "interval,mean_temp_active,peak_temp,active_hosts,computing_kwh,cooling_kwh,migrations,overload_debt,guard_events\n",
    );
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.interval,
            r.mean_temp_active,
            r.peak_temp,
            r.active_hosts,
            r.computing_kwh,
            r.cooling_kwh,
            r.migrations_started,
            r.overload_debt,
            r.guard_events
        ));
    }
    std::fs::write(out_dir.join("intervals.csv"), csv)?;

    let mut temps = String::from("interval,host,temp_c,util_pct\n");
    for r in &report.rows {
        for (h, (t, u)) in r.host_temps.iter().zip(&r.host_utils).enumerate() {
            temps.push_str(&format!("{},{h},{t},{u}\n", r.interval));
        }
    }
    std::fs::write(out_dir.join("host_temps.csv"), temps)?;
    Ok(())
}

fn write_histogram_csv(out_dir: &std::path::Path, report: &SimReport) -> Result<()> {
    let mut csv = String::from("bin_lo,count\n");
    for b in &report.histogram {
        csv.push_str(&format!("{},{}\n", b.lo, b.count));
    }
    std::fs::write(out_dir.join("histogram.csv"), csv)?;
    let mut cdf = String::from("temp_c,cumulative_fraction\n");
    for (edge, frac) in &report.cdf {
        cdf.push_str(&format!("{edge},{frac}\n"));
    }
    std::fs::write(out_dir.join("cdf.csv"), cdf)?;
    Ok(())
}

fn write_events_csv(
    out_dir: &std::path::Path,
    events: &[rackheat::sim::MigrationEvent],
) -> Result<()> {
    let mut csv = String::from("vm,source,target,start_interval,duration_s\n");
    for e in events {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            e.vm.0, e.source.0, e.target.0, e.start_interval, e.duration_s
        ));
    }
    std::fs::write(out_dir.join("events.csv"), csv)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareArgs {
    pub reports: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<ComparisonTable> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        reports.push(serde_json::from_str::<SimReport>(&text)?);
    }
    let table = compare_runs(&reports)?;
    println!(
        "{:<10} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "policy", "peak_c", "total_kwh", "active_avg", "sla_v", "migrations"
    );
    for row in &table.rows {
        println!(
            "{:<10} {:>10.2} {:>12.3} {:>12.2} {:>12.3e} {:>12}",
            row.policy,
            row.peak_temp,
            row.total_kwh,
            row.mean_active_hosts,
            row.sla_violation,
            row.n_migrations
        );
    }
    if let Some(out) = &args.out {
        write_json(out, &table)?;
    }
    Ok(table)
}
