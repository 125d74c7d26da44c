//! SLA, energy and thermal reporting: per-run aggregation and side-by-side
//! comparison of runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{IntervalRow, RunLog, SimConfig};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric undefined: no host was ever active")]
    NoActiveHosts,
    #[error("report has no interval rows")]
    EmptyReport,
    #[error("need at least two reports to compare")]
    TooFewReports,
    #[error("reports disagree on config/trace: {0}")]
    MismatchedConfigs(String),
}

/// Time accounting for one host over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HostActivity {
    pub active_s: f64,
    /// Time spent at 100% (capped) utilization while active.
    pub saturated_s: f64,
}

/// Migration-window CPU accounting for one VM over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VmMigrationTotals {
    /// Core-seconds requested while in migration.
    pub requested_units: f64,
    /// Core-seconds actually allocated while in migration.
    pub allocated_units: f64,
    pub migrations: usize,
}

/// The three SLA figures plus the migration count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaMetrics {
    pub sla_tah: f64,
    pub pdm: f64,
    pub sla_violation: f64,
    pub n_migrations: usize,
    /// VMs skipped from the PDM mean because they requested no CPU during
    /// their migration windows.
    pub pdm_skipped: usize,
}

/// SLA violation time per active host: the mean over hosts that were ever
/// active of (time saturated / time active). Hosts never active are
/// excluded; if none was ever active the metric is undefined.
pub fn sla_tah(hosts: &[HostActivity]) -> Result<f64, MetricsError> {
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for h in hosts {
        if h.active_s > 0.0 {
            sum += h.saturated_s / h.active_s;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoActiveHosts);
    }
    Ok(sum / n as f64)
}

/// Performance degradation due to migration: the mean over all VMs of the
/// migration-window CPU shortfall fraction `|C_R - C_A| / C_R`. VMs that
/// never migrated contribute zero; migrated VMs that requested no CPU are
/// skipped and counted.
pub fn pdm(vms: &[VmMigrationTotals]) -> (f64, usize) {
    if vms.is_empty() {
        return (0.0, 0);
    }
    let mut sum = 0.0f64;
    let mut skipped = 0usize;
    for v in vms {
        if v.migrations == 0 {
            continue;
        }
        if v.requested_units <= 0.0 {
            skipped += 1;
            continue;
        }
        sum += (v.requested_units - v.allocated_units).abs() / v.requested_units;
    }
    (sum / vms.len() as f64, skipped)
}

/// Overall SLA violation: the product of the two components.
pub fn sla_violation(tah: f64, pdm: f64) -> f64 {
    tah * pdm
}

/// Streaming accumulator the simulator feeds once per interval.
#[derive(Debug, Clone)]
pub struct SlaAccumulator {
    pub hosts: Vec<HostActivity>,
    pub vms: Vec<VmMigrationTotals>,
}

impl SlaAccumulator {
    pub fn new(n_hosts: usize, n_vms: usize) -> SlaAccumulator {
        SlaAccumulator {
            hosts: vec![HostActivity::default(); n_hosts],
            vms: vec![VmMigrationTotals::default(); n_vms],
        }
    }

    pub fn record_host_interval(
        &mut self,
        host: usize,
        active: bool,
        saturated: bool,
        interval_s: f64,
    ) {
        if active {
            self.hosts[host].active_s += interval_s;
            if saturated {
                self.hosts[host].saturated_s += interval_s;
            }
        }
    }

    pub fn record_migration_started(&mut self, vm: usize) {
        self.vms[vm].migrations += 1;
    }

    /// CPU accounting for the part of a migration window inside one interval.
    pub fn record_migration_slice(&mut self, vm: usize, requested: f64, allocated: f64) {
        self.vms[vm].requested_units += requested;
        self.vms[vm].allocated_units += allocated;
    }

    pub fn finish(&self, n_migrations: usize) -> Result<SlaMetrics, MetricsError> {
        let tah = sla_tah(&self.hosts)?;
        let (pdm_value, pdm_skipped) = pdm(&self.vms);
        Ok(SlaMetrics {
            sla_tah: tah,
            pdm: pdm_value,
            sla_violation: sla_violation(tah, pdm_value),
            n_migrations,
            pdm_skipped,
        })
    }
}

/// One histogram bin: `[lo, lo + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub count: usize,
}

/// Aggregated outcome of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub fingerprint: String,
    pub config: SimConfig,
    pub intervals: usize,
    /// Max over intervals of the per-interval peak temperature.
    pub peak_temp: f64,
    /// Mean over intervals of the active-host mean temperature.
    pub mean_temp: f64,
    pub computing_kwh: f64,
    pub cooling_kwh: f64,
    pub total_kwh: f64,
    pub mean_active_hosts: f64,
    pub sla: SlaMetrics,
    /// Histogram of all (host, interval) temperatures.
    pub histogram: Vec<HistBin>,
    pub histogram_bin_width: f64,
    /// Cumulative fraction at each bin's upper edge; ends at 1.
    pub cdf: Vec<(f64, f64)>,
    pub rows: Vec<IntervalRow>,
}

pub const HISTOGRAM_BIN_WIDTH_C: f64 = 2.0;

/// Fold a run log into a report: totals, peak, SLA metrics, and the
/// temperature histogram with its cumulative distribution.
pub fn aggregate(log: &RunLog) -> Result<SimReport, MetricsError> {
    if log.rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut computing = 0.0f64;
    let mut cooling = 0.0f64;
    let mut active_sum = 0usize;
    let mut mean_temp_sum = 0.0f64;
    let mut temps: Vec<f64> = Vec::with_capacity(log.rows.len() * log.config.n_hosts as usize);
    for row in &log.rows {
        peak = peak.max(row.peak_temp);
        computing += row.computing_kwh;
        cooling += row.cooling_kwh;
        active_sum += row.active_hosts;
        mean_temp_sum += row.mean_temp_active;
        temps.extend_from_slice(&row.host_temps);
    }

    let width = HISTOGRAM_BIN_WIDTH_C;
    let t_min = temps.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = temps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let origin = (t_min / width).floor() * width;
    let n_bins = (((t_max - origin) / width).floor() as usize + 1).max(1);
    let mut histogram: Vec<HistBin> =
        (0..n_bins).map(|i| HistBin { lo: origin + i as f64 * width, count: 0 }).collect();
    for &t in &temps {
        let idx = (((t - origin) / width).floor() as usize).min(n_bins - 1);
        histogram[idx].count += 1;
    }
    let total = temps.len() as f64;
    let mut cum = 0usize;
    let cdf: Vec<(f64, f64)> = histogram
        .iter()
        .map(|b| {
            cum += b.count;
            (b.lo + width, cum as f64 / total)
        })
        .collect();

    let sla = SlaAccumulator { hosts: log.activity.clone(), vms: log.vm_totals.clone() }
        .finish(log.events.len())?;

    let n = log.rows.len();
    Ok(SimReport {
        policy: log.policy.clone(),
        fingerprint: log.fingerprint.clone(),
        config: log.config.clone(),
        intervals: n,
        peak_temp: peak,
        mean_temp: mean_temp_sum / n as f64,
        computing_kwh: computing,
        cooling_kwh: cooling,
        total_kwh: computing + cooling,
        mean_active_hosts: active_sum as f64 / n as f64,
        sla,
        histogram,
        histogram_bin_width: width,
        cdf,
        rows: log.rows.clone(),
    })
}

/// One line of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub peak_temp: f64,
    pub total_kwh: f64,
    pub mean_active_hosts: f64,
    pub sla_tah: f64,
    pub pdm: f64,
    pub sla_violation: f64,
    pub n_migrations: usize,
    /// Energy saving of the best run relative to this one, as a fraction.
    pub energy_saving_of_best: f64,
}

/// Side-by-side aggregates plus pairwise deltas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub best_energy_policy: String,
    /// `energy_delta_kwh[i][j] = total_kwh(i) - total_kwh(j)`.
    pub energy_delta_kwh: Vec<Vec<f64>>,
    /// `peak_delta_c[i][j] = peak_temp(i) - peak_temp(j)`.
    pub peak_delta_c: Vec<Vec<f64>>,
}

/// Compare runs that share a config/trace fingerprint. Mismatched runs are
/// refused with a field-level diff of their configs.
pub fn compare_runs(reports: &[SimReport]) -> Result<ComparisonTable, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewReports);
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.fingerprint != first.fingerprint {
            return Err(MetricsError::MismatchedConfigs(config_diff(&first.config, &r.config)));
        }
    }
    let best_kwh = reports.iter().map(|r| r.total_kwh).fold(f64::INFINITY, f64::min);
    let best_energy_policy = reports
        .iter()
        .filter(|r| r.total_kwh == best_kwh)
        .map(|r| r.policy.clone())
        .next()
        .unwrap_or_default();
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy.clone(),
            peak_temp: r.peak_temp,
            total_kwh: r.total_kwh,
            mean_active_hosts: r.mean_active_hosts,
            sla_tah: r.sla.sla_tah,
            pdm: r.sla.pdm,
            sla_violation: r.sla.sla_violation,
            n_migrations: r.sla.n_migrations,
            energy_saving_of_best: 1.0 - best_kwh / r.total_kwh,
        })
        .collect();
    let energy_delta_kwh = reports
        .iter()
        .map(|a| reports.iter().map(|b| a.total_kwh - b.total_kwh).collect())
        .collect();
    let peak_delta_c = reports
        .iter()
        .map(|a| reports.iter().map(|b| a.peak_temp - b.peak_temp).collect())
        .collect();
    Ok(ComparisonTable { rows, best_energy_policy, energy_delta_kwh, peak_delta_c })
}

fn config_diff(a: &SimConfig, b: &SimConfig) -> String {
    let aj = serde_json::to_value(a).unwrap_or_default();
    let bj = serde_json::to_value(b).unwrap_or_default();
    let (Some(ao), Some(bo)) = (aj.as_object(), bj.as_object()) else {
        return "configs not comparable".into();
    };
    let mut diffs = Vec::new();
    for (key, av) in ao {
        if let Some(bv) = bo.get(key) {
            if av != bv {
                diffs.push(format!("{key}: {av} vs {bv}"));
            }
        }
    }
    if diffs.is_empty() {
        // Same config, different trace digest.
        "identical configs but different traces".to_string()
    } else {
        diffs.join("; ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sla_tah_hand_values() {
        let none_saturated = [HostActivity { active_s: 100.0, saturated_s: 0.0 }];
        assert_eq!(sla_tah(&none_saturated).unwrap(), 0.0);

        let half = [HostActivity { active_s: 100.0, saturated_s: 50.0 }];
        assert_eq!(sla_tah(&half).unwrap(), 0.5);

        let two = [
            HostActivity { active_s: 100.0, saturated_s: 10.0 },
            HostActivity { active_s: 50.0, saturated_s: 0.0 },
        ];
        assert_eq!(sla_tah(&two).unwrap(), 0.05);
    }

    #[test]
    fn sla_tah_excludes_never_active() {
        let hosts = [
            HostActivity { active_s: 0.0, saturated_s: 0.0 },
            HostActivity { active_s: 100.0, saturated_s: 25.0 },
        ];
        assert_eq!(sla_tah(&hosts).unwrap(), 0.25);
        assert!(matches!(
            sla_tah(&[HostActivity::default()]),
            Err(MetricsError::NoActiveHosts)
        ));
    }

    #[test]
    fn pdm_hand_values() {
        assert_eq!(pdm(&[]).0, 0.0);
        let vms = [
            VmMigrationTotals { requested_units: 1000.0, allocated_units: 995.0, migrations: 1 },
            VmMigrationTotals::default(),
        ];
        let (v, skipped) = pdm(&vms);
        assert_eq!(v, 0.0025);
        assert_eq!(skipped, 0);
    }

    #[test]
    fn pdm_skips_zero_request_migrations() {
        let vms = [
            VmMigrationTotals { requested_units: 0.0, allocated_units: 0.0, migrations: 2 },
            VmMigrationTotals { requested_units: 100.0, allocated_units: 90.0, migrations: 1 },
        ];
        let (v, skipped) = pdm(&vms);
        assert_eq!(skipped, 1);
        assert_eq!(v, 0.05);
    }

    #[test]
    fn zero_degradation_means_zero_pdm() {
        let vms = [VmMigrationTotals {
            requested_units: 500.0,
            allocated_units: 500.0,
            migrations: 3,
        }];
        assert_eq!(pdm(&vms).0, 0.0);
    }

    #[test]
    fn violation_is_exact_product() {
        let t = 0.34e-2;
        let p = 0.64e-4;
        assert_eq!(sla_violation(t, p), t * p);
    }

    #[test]
    fn paper_scale_energy_savings() {
        // Savings fractions for the reference energy magnitudes.
        let save = |best: f64, other: f64| 1.0 - best / other;
        assert!((save(172.20, 263.20) - 0.3457).abs() < 1e-4);
        assert!((save(172.20, 391.57) - 0.5602).abs() < 1e-4);
    }
}
