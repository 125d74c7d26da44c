//! Workload trace loading and resampling.
//!
//! Two layouts are accepted:
//!
//! * a single synthetic trace file (`vm,interval,cpu_pct,ram_mb,net_rx_kbps,
//!   net_tx_kbps` with a header), one row per VM per interval;
//! * a directory of per-VM delimited files in the business-workload style:
//!   a timestamp column plus `CPU usage [%]`, `Memory usage [KB]` and
//!   network throughput columns, which are resampled onto the interval grid
//!   (mean within each bin, gaps carried forward from the last value).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SimError, VmDemand, VmId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmTraceSeries {
    pub points: Vec<VmDemand>,
}

/// Per-VM demand series aligned to the scheduling-interval grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub interval_s: f64,
    pub vms: Vec<VmTraceSeries>,
    /// Bins that had no samples and were carried forward.
    pub gaps_filled: usize,
}

impl Trace {
    pub fn n_vms(&self) -> usize {
        self.vms.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.vms.iter().map(|v| v.points.len()).max().unwrap_or(0)
    }

    /// Demand of a VM at an interval; series shorter than the horizon hold
    /// their last value.
    pub fn demand(&self, vm: VmId, interval: usize) -> VmDemand {
        let series = &self.vms[vm.0 as usize].points;
        if series.is_empty() {
            return VmDemand::IDLE;
        }
        series[interval.min(series.len() - 1)]
    }
}

/// Load a trace from either layout, resampled to `interval_s`.
pub fn load_trace(path: &Path, interval_s: f64) -> Result<Trace, SimError> {
    if interval_s.is_nan() || interval_s <= 0.0 {
        return Err(SimError::BadTrace("interval must be positive".into()));
    }
    if path.is_dir() {
        load_per_vm_dir(path, interval_s)
    } else {
        load_synthetic(path, interval_s)
    }
}

/// Write the synthetic single-file format.
pub fn write_synthetic_trace(path: &Path, trace: &Trace) -> Result<(), SimError> {
    let file =
        File::create(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| SimError::Io { path: path.to_path_buf(), source };
    writeln!(w, "vm,interval,cpu_pct,ram_mb,net_rx_kbps,net_tx_kbps").map_err(io_err)?;
    for (vm, series) in trace.vms.iter().enumerate() {
        for (i, p) in series.points.iter().enumerate() {
            writeln!(w, "{vm},{i},{},{},{},{}", p.cpu_pct, p.ram_mb, p.net_rx, p.net_tx)
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn load_synthetic(path: &Path, interval_s: f64) -> Result<Trace, SimError> {
    let file =
        File::open(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|source| SimError::Io { path: path.to_path_buf(), source })?
        .ok_or_else(|| SimError::BadTrace(format!("{} is empty", path.display())))?;
    let expect = "vm,interval,cpu_pct,ram_mb,net_rx_kbps,net_tx_kbps";
    if header.trim() != expect {
        return Err(SimError::BadTrace(format!(
            "unexpected synthetic trace header `{header}` (want `{expect}`)"
        )));
    }
    let mut vms: Vec<Vec<(usize, VmDemand)>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(SimError::BadTrace(format!("row {}: wrong field count", lineno + 2)));
        }
        let bad = |what: &str| SimError::BadTrace(format!("row {}: bad {what}", lineno + 2));
        let vm: usize = fields[0].trim().parse().map_err(|_| bad("vm"))?;
        let interval: usize = fields[1].trim().parse().map_err(|_| bad("interval"))?;
        let num = |i: usize, what: &str| -> Result<f64, SimError> {
            let v: f64 = fields[i].trim().parse().map_err(|_| bad(what))?;
            if !v.is_finite() || v < 0.0 {
                return Err(bad(what));
            }
            Ok(v)
        };
        let demand = VmDemand {
            cpu_pct: num(2, "cpu_pct")?.min(100.0),
            ram_mb: num(3, "ram_mb")?,
            net_rx: num(4, "net_rx")?,
            net_tx: num(5, "net_tx")?,
        };
        if vms.len() <= vm {
            vms.resize_with(vm + 1, Vec::new);
        }
        vms[vm].push((interval, demand));
    }
    if vms.is_empty() {
        return Err(SimError::BadTrace(format!("{} has no rows", path.display())));
    }
    let mut gaps = 0usize;
    let mut out = Vec::with_capacity(vms.len());
    for (vm, mut rows) in vms.into_iter().enumerate() {
        if rows.is_empty() {
            return Err(SimError::BadTrace(format!("vm {vm} has no rows")));
        }
        rows.sort_by_key(|(i, _)| *i);
        let last = rows[rows.len() - 1].0;
        let mut points = Vec::with_capacity(last + 1);
        let mut it = rows.into_iter().peekable();
        let mut hold = VmDemand::IDLE;
        for i in 0..=last {
            match it.peek() {
                Some((idx, d)) if *idx == i => {
                    hold = *d;
                    it.next();
                }
                _ => gaps += 1,
            }
            points.push(hold);
        }
        out.push(VmTraceSeries { points });
    }
    Ok(Trace { interval_s, vms: out, gaps_filled: gaps })
}

fn load_per_vm_dir(dir: &Path, interval_s: f64) -> Result<Trace, SimError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| SimError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(SimError::BadTrace(format!("no .csv files under {}", dir.display())));
    }
    let mut vms = Vec::with_capacity(files.len());
    let mut gaps = 0usize;
    for f in files {
        let (series, g) = load_one_vm_file(&f, interval_s)?;
        gaps += g;
        vms.push(series);
    }
    Ok(Trace { interval_s, vms, gaps_filled: gaps })
}

/// A column header matcher tolerant of unit suffixes and quoting.
fn find_col(headers: &[String], needle: &str) -> Option<usize> {
    headers.iter().position(|h| h.to_ascii_lowercase().contains(&needle.to_ascii_lowercase()))
}

fn load_one_vm_file(path: &Path, interval_s: f64) -> Result<(VmTraceSeries, usize), SimError> {
    let file =
        File::open(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|source| SimError::Io { path: path.to_path_buf(), source })?
        .ok_or_else(|| SimError::BadTrace(format!("{} is empty", path.display())))?;
    let delim = if header.contains(';') { ';' } else { ',' };
    let headers: Vec<String> =
        header.split(delim).map(|h| h.trim().trim_matches('"').to_string()).collect();

    let col = |name: &str| {
        find_col(&headers, name).ok_or_else(|| {
            SimError::BadTrace(format!("{}: missing column `{name}`", path.display()))
        })
    };
    let ts_col = col("timestamp")?;
    let cpu_col = col("cpu usage [%]")?;
    let ram_col = col("memory usage")?;
    let rx_col = find_col(&headers, "network received");
    let tx_col = find_col(&headers, "network transmitted");

    let mut samples: Vec<(f64, VmDemand)> = Vec::new();
    for line in lines {
        let line = line.map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        let get = |i: usize| -> Option<f64> { fields.get(i)?.parse::<f64>().ok() };
        let (Some(ts), Some(cpu), Some(ram_kb)) = (get(ts_col), get(cpu_col), get(ram_col))
        else {
            continue; // unparseable sample rows are skipped
        };
        if !ts.is_finite() || !cpu.is_finite() || !ram_kb.is_finite() {
            continue;
        }
        // Millisecond epochs are folded down to seconds.
        let ts = if ts > 1e12 { ts / 1000.0 } else { ts };
        let demand = VmDemand {
            cpu_pct: cpu.clamp(0.0, 100.0),
            ram_mb: (ram_kb / 1024.0).max(0.0),
            // KB/s to Kbps.
            net_rx: rx_col.and_then(get).unwrap_or(0.0).max(0.0) * 8.0,
            net_tx: tx_col.and_then(get).unwrap_or(0.0).max(0.0) * 8.0,
        };
        samples.push((ts, demand));
    }
    if samples.is_empty() {
        return Err(SimError::BadTrace(format!("{}: no parsable rows", path.display())));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t0 = samples[0].0;
    let n_bins = ((samples[samples.len() - 1].0 - t0) / interval_s).floor() as usize + 1;

    // Mean within each bin; empty bins carry the previous value forward.
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64, 0.0f64, 0usize); n_bins];
    for (ts, d) in &samples {
        let bin = (((ts - t0) / interval_s).floor() as usize).min(n_bins - 1);
        let s = &mut sums[bin];
        s.0 += d.cpu_pct;
        s.1 += d.ram_mb;
        s.2 += d.net_rx;
        s.3 += d.net_tx;
        s.4 += 1;
    }
    let mut points = Vec::with_capacity(n_bins);
    let mut hold = VmDemand::IDLE;
    let mut gaps = 0usize;
    for (cpu, ram, rx, tx, count) in sums {
        if count > 0 {
            let k = count as f64;
            hold = VmDemand { cpu_pct: cpu / k, ram_mb: ram / k, net_rx: rx / k, net_tx: tx / k };
        } else {
            gaps += 1;
        }
        points.push(hold);
    }
    Ok((VmTraceSeries { points }, gaps))
}
