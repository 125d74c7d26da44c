//! Deterministic synthetic data: per-host telemetry logs for model training
//! and diurnal workload traces for the simulator.
//!
//! Hosts are heterogeneous on purpose — each gets its own inlet baseline and
//! thermal slope so that two hosts at the same load run at different
//! temperatures, which is what a thermal-aware placement policy exploits.
//! The CPU-temperature response is a kinked (piecewise-linear) function of
//! power, load and fan speed plus Gaussian noise, so tree ensembles and a
//! small rectifier network can fit it closely while a plain linear model
//! cannot.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sim::{Trace, VmDemand, VmTraceSeries};
use crate::telemetry::TelemetryError;
use crate::thermal::{power_at, PowerCurve};

/// Stable zero-padded host naming shared by generators, training and the
/// simulator's host-index mapping.
pub fn host_name(index: u32) -> String {
    format!("h{index:03}")
}

/// Thermal personality of one synthetic host.
#[derive(Debug, Clone, Copy)]
pub struct HostProfile {
    /// Inlet air temperature baseline, °C; hot spots run several degrees
    /// warmer.
    pub inlet_base: f64,
    /// Degrees per watt of draw above idle.
    pub heat_slope: f64,
    /// Idle CPU temperature, °C.
    pub idle_cpu_temp: f64,
}

impl HostProfile {
    /// Deterministic per-host profile derived from the seed and host index.
    /// The spread is wide on purpose: hosts at the same load differ by well
    /// over ten degrees, which is the regime where thermal-aware placement
    /// pays off.
    pub fn for_host(seed: u64, host: u32) -> HostProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(u64::from(host) + 1)));
        HostProfile {
            inlet_base: rng.gen_range(13.0..24.0),
            heat_slope: rng.gen_range(0.08..0.18),
            idle_cpu_temp: rng.gen_range(25.0..33.0),
        }
    }
}

/// Options for the telemetry generator.
#[derive(Debug, Clone)]
pub struct TelemetryGen {
    pub n_hosts: u32,
    pub rows_per_host: usize,
    /// Gaussian noise on the CPU temperature, °C.
    pub noise_c: f64,
    pub power_curve: PowerCurve,
    pub seed: u64,
    /// Hosts whose load stays below 1%, mimicking machines that idled
    /// through the whole collection window.
    pub idle_hosts: Vec<u32>,
}

impl Default for TelemetryGen {
    fn default() -> Self {
        TelemetryGen {
            n_hosts: 4,
            rows_per_host: 1000,
            noise_c: 1.0,
            power_curve: PowerCurve::default_dell_like(),
            seed: 7,
            idle_hosts: Vec::new(),
        }
    }
}

/// The ground-truth CPU temperature response used by the generator (before
/// noise): linear in power with a throttling kink above 70% load and a
/// cooling credit for fan speed.
pub fn true_cpu_temp(profile: &HostProfile, power_w: f64, cpu_load: f64, fan_rpm: f64) -> f64 {
    profile.idle_cpu_temp
        + profile.heat_slope * (power_w - 56.0).max(0.0)
        + 0.18 * (cpu_load - 70.0).max(0.0)
        - 0.0012 * (fan_rpm - 9000.0)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Write one raw telemetry CSV per host under `dir`, in the canonical
/// column layout the default ingest config expects. Returns the file paths.
pub fn write_telemetry(dir: &Path, gen: &TelemetryGen) -> Result<Vec<PathBuf>, TelemetryError> {
    let mut paths = Vec::with_capacity(gen.n_hosts as usize);
    for host in 0..gen.n_hosts {
        let name = host_name(host);
        let path = dir.join(format!("{name}.csv"));
        let file = File::create(&path)
            .map_err(|source| TelemetryError::Io { path: path.clone(), source })?;
        let mut w = BufWriter::new(file);
        let io_err = |source| TelemetryError::Io { path: path.clone(), source };
        writeln!(
            w,
            "host_id,timestamp,cpu_load,ram_total,ram_used,n_cpu,n_cpu_used,net_rx,net_tx,power,t_cpu1,t_cpu2,fan1,fan2,fan3,fan4,t_inlet,n_vms"
        )
        .map_err(io_err)?;

        let profile = HostProfile::for_host(gen.seed, host);
        let idle = gen.idle_hosts.contains(&host);
        let mut rng = ChaCha8Rng::seed_from_u64(gen.seed.wrapping_add(1000 + u64::from(host)));
        for i in 0..gen.rows_per_host {
            let phase = i as f64 / gen.rows_per_host as f64 * std::f64::consts::TAU * 3.0;
            let cpu_load = if idle {
                (0.3 + 0.3 * rng.gen::<f64>()).min(0.99)
            } else {
                // Diurnal swing plus jitter covering the full range.
                let base = 45.0 + 35.0 * phase.sin() + 12.0 * gaussian(&mut rng);
                base.clamp(0.0, 100.0)
            };
            let power = power_at(&gen.power_curve, cpu_load).expect("load in range")
                + 3.0 * gaussian(&mut rng).clamp(-2.5, 2.5);
            let power = power.max(40.0);
            let fan_base = 5800.0 + 60.0 * (power - 56.0).max(0.0);
            let fans: Vec<f64> = (0..4)
                .map(|_| (fan_base + 120.0 * gaussian(&mut rng)).clamp(5600.0, 13500.0))
                .collect();
            let t_inlet = (profile.inlet_base + 0.8 * phase.sin() + 0.3 * gaussian(&mut rng))
                .max(10.0);
            let noise = gen.noise_c * gaussian(&mut rng);
            let t_cpu_hot =
                (true_cpu_temp(&profile, power, cpu_load, fans[0]) + noise).max(20.0);
            let t_cpu_cold = (t_cpu_hot - (2.0 + 3.0 * rng.gen::<f64>())).max(18.0);
            let n_vms = if idle { 1 } else { (cpu_load / 10.0).round() as u32 + 1 };
            let ram_used = 20_000.0 + 3000.0 * f64::from(n_vms) + 500.0 * gaussian(&mut rng);
            let net_rx = (50.0 * cpu_load + 200.0 * rng.gen::<f64>()).max(0.0);
            let net_tx = (30.0 * cpu_load + 150.0 * rng.gen::<f64>()).max(0.0);
            writeln!(
                w,
                "{name},{ts},{cpu_load},{ram_total},{ram_used},{n_cpu},{n_cpu_used},{net_rx},{net_tx},{power},{t1},{t2},{f1},{f2},{f3},{f4},{t_in},{n_vms}",
                ts = 1_600_000_000i64 + i as i64 * 600,
                ram_total = 524_288.0,
                ram_used = ram_used.clamp(0.0, 524_288.0),
                n_cpu = 64,
                n_cpu_used = (cpu_load / 100.0 * 64.0).round() as u32,
                t1 = t_cpu_hot,
                t2 = t_cpu_cold,
                f1 = fans[0],
                f2 = fans[1],
                f3 = fans[2],
                f4 = fans[3],
                t_in = t_inlet,
            )
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Options for the workload-trace generator.
#[derive(Debug, Clone)]
pub struct TraceGen {
    pub n_vms: u32,
    pub intervals: usize,
    pub interval_s: f64,
    /// Mean CPU level in percent around which the diurnal wave swings.
    pub mean_cpu: f64,
    /// Amplitude of the diurnal wave, percent.
    pub swing_cpu: f64,
    pub seed: u64,
}

impl Default for TraceGen {
    fn default() -> Self {
        TraceGen {
            n_vms: 100,
            intervals: 144,
            interval_s: 600.0,
            mean_cpu: 45.0,
            swing_cpu: 35.0,
            seed: 11,
        }
    }
}

/// A diurnal workload: every VM follows one shared day curve with its own
/// phase jitter, level scale and noise, so cluster load breathes between a
/// quiet trough and a busy peak.
pub fn synth_trace(gen: &TraceGen) -> Trace {
    let mut vms = Vec::with_capacity(gen.n_vms as usize);
    for vm in 0..gen.n_vms {
        let mut rng = ChaCha8Rng::seed_from_u64(gen.seed.wrapping_add(77_000 + u64::from(vm)));
        let phase_jitter = rng.gen_range(-0.35..0.35);
        let scale = rng.gen_range(0.55..1.35);
        let ram_base = rng.gen_range(0.25..0.75);
        let mut points = Vec::with_capacity(gen.intervals);
        for i in 0..gen.intervals {
            let day_pos = i as f64 / gen.intervals as f64 * std::f64::consts::TAU;
            let wave = (day_pos + phase_jitter - std::f64::consts::FRAC_PI_2).sin();
            let cpu = (gen.mean_cpu + gen.swing_cpu * wave) * scale
                + 6.0 * gaussian(&mut rng);
            let cpu = cpu.clamp(0.5, 100.0);
            let ram = ram_base * 4096.0 + 64.0 * gaussian(&mut rng).abs();
            points.push(VmDemand {
                cpu_pct: cpu,
                ram_mb: ram.clamp(128.0, 32_768.0),
                net_rx: (cpu * 20.0 + 50.0 * rng.gen::<f64>()).max(0.0),
                net_tx: (cpu * 12.0 + 40.0 * rng.gen::<f64>()).max(0.0),
            });
        }
        vms.push(VmTraceSeries { points });
    }
    Trace { interval_s: gen.interval_s, vms, gaps_filled: 0 }
}
