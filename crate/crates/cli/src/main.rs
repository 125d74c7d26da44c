use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Parser, Subcommand};

use rackheat::gbt::GbtHyper;
use rackheat::models::ModelBank;
use rackheat::thermal::RcParams;
use rackheat_cli::commands::{
    cmd_compare, cmd_compare_theoretical, cmd_ingest, cmd_simulate, cmd_synth_telemetry,
    cmd_synth_trace, cmd_train, CompareArgs, CompareTheoreticalArgs, IngestArgs, ModelKindArg,
    SimulateArgs, SynthTelemetryArgs, SynthTraceArgs, TrainArgs,
};
use rackheat_cli::serve::{run as serve_run, ServeState};

/// Data-center thermal prediction and scheduling workbench.
#[derive(Parser)]
#[command(name = "rackheat", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic per-host telemetry logs.
    SynthTelemetry {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        hosts: u32,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_c: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Host indices that idle below 1% CPU for the whole log.
        #[arg(long)]
        idle_host: Vec<u32>,
    },
    /// Generate a synthetic diurnal workload trace.
    SynthTrace {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        vms: u32,
        #[arg(long, default_value_t = 144)]
        intervals: usize,
        #[arg(long, default_value_t = 600.0)]
        interval_s: f64,
        #[arg(long, default_value_t = 45.0)]
        mean_cpu: f64,
        #[arg(long, default_value_t = 35.0)]
        swing_cpu: f64,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
    /// Parse, clean and partition raw telemetry into per-host datasets.
    Ingest {
        /// Telemetry CSV file or directory of CSV files.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// TOML file with delimiter and column map.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one temperature model per host dataset.
    Train {
        #[arg(long)]
        datasets: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "gbt")]
        kind: KindOpt,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[arg(long, default_value_t = 4.0)]
        min_child_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        subsample: f64,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        /// Early-stopping patience on a 10% holdout; 0 disables.
        #[arg(long, default_value_t = 0)]
        early_stop: usize,
        /// Learning rate for sgd/mlp.
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        /// Epochs for sgd/mlp.
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// Cross-validation folds; 0 skips CV.
        #[arg(long, default_value_t = 10)]
        cv_k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare trained models against the analytical RC baseline.
    CompareTheoretical {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        datasets: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 0.34)]
        rc_r: f64,
        #[arg(long, default_value_t = 340.0)]
        rc_c: f64,
        #[arg(long, default_value_t = 318.0)]
        rc_t_initial_k: f64,
        #[arg(long, default_value_t = 600.0)]
        rc_horizon_s: f64,
    },
    /// Replay a trace under a placement policy.
    Simulate {
        #[arg(long, value_enum)]
        policy: PolicyOpt,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// TOML simulator config; desk-scale preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record every placement decision (thermal-aware policy only).
        #[arg(long, default_value_t = false)]
        log_decisions: bool,
    },
    /// Compare reports from runs that share a config and trace.
    Compare {
        /// Paths to report.json files.
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve temperature predictions over HTTP.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 10.0)]
        guard_margin_c: f64,
        #[arg(long, default_value_t = false)]
        no_guard: bool,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum KindOpt {
    Gbt,
    Ols,
    Ridge,
    Lasso,
    Sgd,
    Mlp,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum PolicyOpt {
    Tas,
    Rr,
    Granite,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::SynthTelemetry { out_dir, hosts, rows, noise_c, seed, idle_host } => {
            let paths = cmd_synth_telemetry(&SynthTelemetryArgs {
                out_dir,
                n_hosts: hosts,
                rows_per_host: rows,
                noise_c,
                seed,
                idle_hosts: idle_host,
            })?;
            println!("wrote {} telemetry logs", paths.len());
        }
        Cmd::SynthTrace { out, vms, intervals, interval_s, mean_cpu, swing_cpu, seed } => {
            cmd_synth_trace(&SynthTraceArgs {
                out: out.clone(),
                n_vms: vms,
                intervals,
                interval_s,
                mean_cpu,
                swing_cpu,
                seed,
            })?;
            println!("wrote trace {}", out.display());
        }
        Cmd::Ingest { input, out_dir, config } => {
            let summary = cmd_ingest(&IngestArgs { input, out_dir, config })?;
            println!(
                "ingested {} rows into {} hosts ({} dropped, {} duplicate timestamps)",
                summary.rows_read,
                summary.hosts.len(),
                summary.dropped,
                summary.duplicate_drops
            );
        }
        Cmd::Train {
            datasets,
            out_dir,
            kind,
            eta,
            gamma,
            lambda,
            max_depth,
            min_child_weight,
            subsample,
            rounds,
            early_stop,
            lr,
            epochs,
            cv_k,
            seed,
        } => {
            let args = TrainArgs {
                dataset_dir: datasets,
                out_dir,
                kind: match kind {
                    KindOpt::Gbt => ModelKindArg::Gbt,
                    KindOpt::Ols => ModelKindArg::Ols,
                    KindOpt::Ridge => ModelKindArg::Ridge,
                    KindOpt::Lasso => ModelKindArg::Lasso,
                    KindOpt::Sgd => ModelKindArg::Sgd,
                    KindOpt::Mlp => ModelKindArg::Mlp,
                },
                gbt: GbtHyper {
                    eta,
                    gamma,
                    lambda,
                    max_depth,
                    min_child_weight,
                    subsample,
                    rounds,
                    early_stop_patience: (early_stop > 0).then_some(early_stop),
                },
                lambda,
                lr,
                epochs,
                cv_k,
                seed,
            };
            let summary = cmd_train(&args)?;
            for (host, h) in &summary.hosts {
                match h.cv_mean_rmse {
                    Some(rmse) => println!("{host}: {} rows, cv rmse {rmse:.4}", h.rows),
                    None => println!("{host}: {} rows", h.rows),
                }
            }
        }
        Cmd::CompareTheoretical {
            models,
            datasets,
            out_dir,
            n,
            seed,
            rc_r,
            rc_c,
            rc_t_initial_k,
            rc_horizon_s,
        } => {
            let summary = cmd_compare_theoretical(&CompareTheoreticalArgs {
                model_dir: models,
                dataset_dir: datasets,
                out_dir,
                n,
                seed,
                rc: RcParams { r: rc_r, c: rc_c, t_initial_k: rc_t_initial_k },
                rc_horizon_s,
            })?;
            println!(
                "learned MAE {:.3} C vs RC MAE {:.3} C over {} tuples",
                summary.learned_mae, summary.rc_mae, summary.n
            );
        }
        Cmd::Simulate { policy, models, trace, out_dir, config, log_decisions } => {
            let report = cmd_simulate(&SimulateArgs {
                policy: match policy {
                    PolicyOpt::Tas => rackheat_cli::commands::PolicyArg::Tas,
                    PolicyOpt::Rr => rackheat_cli::commands::PolicyArg::Rr,
                    PolicyOpt::Granite => rackheat_cli::commands::PolicyArg::Granite,
                },
                model_dir: models,
                trace,
                out_dir,
                config,
                log_decisions,
            })?;
            println!(
                "{}: peak {:.2} C, total {:.3} kWh, mean active hosts {:.2}, {} migrations",
                report.policy,
                report.peak_temp,
                report.total_kwh,
                report.mean_active_hosts,
                report.sla.n_migrations
            );
        }
        Cmd::Compare { reports, out } => {
            cmd_compare(&CompareArgs { reports, out })?;
        }
        Cmd::Serve { models, port, guard_margin_c, no_guard } => {
            let bank = ModelBank::load_dir(&models)?;
            let state = Arc::new(ServeState {
                bank,
                guard_margin_c,
                guard_enabled: !no_guard,
            });
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve_run(addr, state, |bound| {
                println!("serving predictions on http://{bound}");
            }))?;
        }
    }
    Ok(())
}
