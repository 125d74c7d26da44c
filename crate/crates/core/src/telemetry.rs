//! Telemetry ingestion: parse raw host logs, clean them, and partition them
//! into per-host training datasets with an ambient-temperature target.
//!
//! The prediction target folds the inlet and CPU temperature sensors into a
//! single ambient value; the remaining 13 counters become the feature matrix.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Feature columns, in the fixed order shared by every dataset and model.
pub const FEATURE_NAMES: [&str; 13] = [
    "CPU", "R", "R_x", "N_CPU", "N_CPUx", "N_Rx", "N_Tx", "N_vm", "P_c", "fs_1", "fs_2", "fs_3",
    "fs_4",
];

/// Name of the prediction target column in dataset files.
pub const TARGET_NAME: &str = "T_amb";

/// Name of the auxiliary inlet-temperature column in dataset files.
pub const INLET_NAME: &str = "T_in";

/// Logical field names accepted in an ingest column map.
pub const RECORD_FIELDS: [&str; 18] = [
    "host_id",
    "timestamp",
    "cpu_load",
    "ram_total",
    "ram_used",
    "n_cpu",
    "n_cpu_used",
    "net_rx",
    "net_tx",
    "power",
    "t_cpu1",
    "t_cpu2",
    "fan1",
    "fan2",
    "fan3",
    "fan4",
    "t_inlet",
    "n_vms",
];

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("empty input: {0}")]
    EmptyInput(PathBuf),
    #[error("bad dataset header in {path}: {detail}")]
    BadHeader { path: PathBuf, detail: String },
    #[error("dataset {0} has no rows")]
    NoRows(PathBuf),
    #[error("bad ingest config: {0}")]
    BadConfig(String),
}

/// One cleaned telemetry tuple for a single host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostRecord {
    pub host_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
    /// CPU load in percent, 0..=100.
    pub cpu_load: f64,
    /// Installed RAM, MB.
    pub ram_total: f64,
    /// RAM in use, MB.
    pub ram_used: f64,
    pub n_cpu: u32,
    /// Cores in use. May exceed `n_cpu` because of hyper-thread accounting;
    /// stored as reported.
    pub n_cpu_used: u32,
    /// Network inbound, Kbps.
    pub net_rx: f64,
    /// Network outbound, Kbps.
    pub net_tx: f64,
    /// Host power draw, watts.
    pub power: f64,
    pub t_cpu1: f64,
    pub t_cpu2: f64,
    pub fans: [f64; 4],
    pub t_inlet: f64,
    pub n_vms: u32,
}

impl HostRecord {
    /// Cleaning rules applied to every parsed row. Rows failing any of these
    /// are dropped and counted rather than erroring the whole file.
    pub fn is_clean(&self) -> bool {
        let nums = [
            self.cpu_load,
            self.ram_total,
            self.ram_used,
            self.net_rx,
            self.net_tx,
            self.power,
            self.t_cpu1,
            self.t_cpu2,
            self.fans[0],
            self.fans[1],
            self.fans[2],
            self.fans[3],
            self.t_inlet,
        ];
        nums.iter().all(|v| v.is_finite())
            && (0.0..=100.0).contains(&self.cpu_load)
            && self.ram_used <= self.ram_total
            && self.ram_total >= 0.0
            && self.ram_used >= 0.0
            && self.net_rx >= 0.0
            && self.net_tx >= 0.0
            && self.power >= 0.0
            && self.t_cpu1 >= 0.0
            && self.t_cpu2 >= 0.0
            && self.t_inlet >= 0.0
            && self.fans.iter().all(|f| *f >= 0.0)
    }

    /// Feature vector in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> Vec<f64> {
        vec![
            self.cpu_load,
            self.ram_total,
            self.ram_used,
            f64::from(self.n_cpu),
            f64::from(self.n_cpu_used),
            self.net_rx,
            self.net_tx,
            f64::from(self.n_vms),
            self.power,
            self.fans[0],
            self.fans[1],
            self.fans[2],
            self.fans[3],
        ]
    }
}

/// The host's effective CPU temperature: both sockets are jointly scheduled,
/// so the hotter one is the one that matters.
pub fn effective_cpu_temp(r: &HostRecord) -> f64 {
    r.t_cpu1.max(r.t_cpu2)
}

/// Ambient prediction target: inlet temperature plus effective CPU
/// temperature. Monotone in all three sensor inputs.
pub fn ambient_target(r: &HostRecord) -> f64 {
    r.t_inlet + effective_cpu_temp(r)
}

/// Ingest configuration: delimiter plus a map from logical record fields to
/// the column names used in a particular site's log files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// logical field name -> column header in the raw file. Fields absent
    /// from the map default to their logical name.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
}

fn default_delimiter() -> char {
    ','
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { delimiter: ',', columns: BTreeMap::new() }
    }
}

impl IngestConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, TelemetryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TelemetryError::Io { path: path.to_path_buf(), source })?;
        let cfg: IngestConfig =
            toml::from_str(&text).map_err(|e| TelemetryError::BadConfig(e.to_string()))?;
        for key in cfg.columns.keys() {
            if !RECORD_FIELDS.contains(&key.as_str()) {
                return Err(TelemetryError::BadConfig(format!("unknown field `{key}`")));
            }
        }
        Ok(cfg)
    }

    fn column_for<'a>(&'a self, field: &'a str) -> &'a str {
        self.columns.get(field).map(String::as_str).unwrap_or(field)
    }
}

/// Result of parsing one raw log file.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub records: Vec<HostRecord>,
    /// Data rows seen in the file (excluding the header).
    pub rows_read: usize,
    /// Rows dropped because a field failed to parse or failed cleaning.
    pub dropped: usize,
}

/// Parse a delimited telemetry log into cleaned [`HostRecord`]s.
///
/// The header row is required and must contain every mapped column; rows with
/// unparseable, non-finite or out-of-range fields are dropped and counted.
pub fn parse_log(path: &Path, cfg: &IngestConfig) -> Result<ParsedLog, TelemetryError> {
    let file = File::open(path)
        .map_err(|source| TelemetryError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(TelemetryError::EmptyInput(path.to_path_buf()));
    }
    let mut idx = BTreeMap::new();
    for field in RECORD_FIELDS {
        let col = cfg.column_for(field);
        let pos = headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| TelemetryError::MissingColumn(col.to_string()))?;
        idx.insert(field, pos);
    }

    let mut records = Vec::new();
    let mut rows_read = 0usize;
    let mut dropped = 0usize;
    for row in reader.records() {
        let row = row?;
        rows_read += 1;
        match record_from_row(&row, &idx) {
            Some(rec) if rec.is_clean() => records.push(rec),
            _ => dropped += 1,
        }
    }
    if rows_read == 0 {
        return Err(TelemetryError::EmptyInput(path.to_path_buf()));
    }
    Ok(ParsedLog { records, rows_read, dropped })
}

fn record_from_row(row: &csv::StringRecord, idx: &BTreeMap<&str, usize>) -> Option<HostRecord> {
    let get = |field: &str| -> Option<&str> { row.get(idx[field]).map(str::trim) };
    let num = |field: &str| -> Option<f64> { get(field)?.parse::<f64>().ok() };
    let count = |field: &str| -> Option<u32> {
        let v = num(field)?;
        if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
            Some(v as u32)
        } else {
            None
        }
    };
    Some(HostRecord {
        host_id: {
            let id = get("host_id")?;
            if id.is_empty() {
                return None;
            }
            id.to_string()
        },
        timestamp: get("timestamp")?.parse::<i64>().ok()?,
        cpu_load: num("cpu_load")?,
        ram_total: num("ram_total")?,
        ram_used: num("ram_used")?,
        n_cpu: count("n_cpu")?,
        n_cpu_used: count("n_cpu_used")?,
        net_rx: num("net_rx")?,
        net_tx: num("net_tx")?,
        power: num("power")?,
        t_cpu1: num("t_cpu1")?,
        t_cpu2: num("t_cpu2")?,
        fans: [num("fan1")?, num("fan2")?, num("fan3")?, num("fan4")?],
        t_inlet: num("t_inlet")?,
        n_vms: count("n_vms")?,
    })
}

/// A per-host training dataset with named feature columns, the ambient
/// target, and the observed per-column bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub host_id: String,
    pub feature_names: Vec<String>,
    /// Row-major feature matrix; every row has `feature_names.len()` entries.
    pub rows: Vec<Vec<f64>>,
    /// Ambient temperature per row, °C.
    pub target: Vec<f64>,
    /// Inlet temperature per row, °C. Empty when the dataset was built from
    /// bare feature matrices rather than telemetry.
    pub inlet: Vec<f64>,
    /// Observed (min, max) per feature column.
    pub bounds: Vec<(f64, f64)>,
}

impl Dataset {
    /// Build a dataset from raw parts, computing bounds.
    pub fn from_parts(
        host_id: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
        inlet: Vec<f64>,
    ) -> Self {
        assert_eq!(rows.len(), target.len(), "rows/target length mismatch");
        assert!(inlet.is_empty() || inlet.len() == target.len());
        let bounds = column_bounds(&feature_names, &rows);
        Dataset { host_id: host_id.into(), feature_names, rows, target, inlet, bounds }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Observed (min, max) of the target column.
    pub fn target_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in &self.target {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        (lo, hi)
    }

    /// New dataset containing the given rows, bounds recomputed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let target: Vec<f64> = indices.iter().map(|&i| self.target[i]).collect();
        let inlet: Vec<f64> = if self.inlet.is_empty() {
            Vec::new()
        } else {
            indices.iter().map(|&i| self.inlet[i]).collect()
        };
        Dataset::from_parts(self.host_id.clone(), self.feature_names.clone(), rows, target, inlet)
    }

    /// New dataset keeping only the given feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        let feature_names: Vec<String> =
            columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        let rows: Vec<Vec<f64>> =
            self.rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect();
        Dataset::from_parts(
            self.host_id.clone(),
            feature_names,
            rows,
            self.target.clone(),
            self.inlet.clone(),
        )
    }

    /// Write the canonical dataset file: a header of feature names, the
    /// target name and (when present) the inlet column, then one numeric row
    /// per observation. Floats print in shortest round-trip form, so a
    /// save/load cycle is bit-exact.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(TARGET_NAME);
        if !self.inlet.is_empty() {
            header.push(INLET_NAME);
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", self.target[i]));
            if !self.inlet.is_empty() {
                fields.push(format!("{}", self.inlet[i]));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Save under `dir/<host_id>.csv`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, TelemetryError> {
        let path = dir.join(format!("{}.csv", self.host_id));
        let file = File::create(&path)
            .map_err(|source| TelemetryError::Io { path: path.clone(), source })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|()| w.flush())
            .map_err(|source| TelemetryError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    /// Load a canonical dataset file; the host id is the file stem.
    pub fn load(path: &Path) -> Result<Dataset, TelemetryError> {
        let host_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".to_string());
        let file = File::open(path)
            .map_err(|source| TelemetryError::Io { path: path.to_path_buf(), source })?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|source| TelemetryError::Io { path: path.to_path_buf(), source })?,
            None => return Err(TelemetryError::EmptyInput(path.to_path_buf())),
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let has_inlet = cols.last() == Some(&INLET_NAME);
        let target_pos = if has_inlet { cols.len().checked_sub(2) } else { cols.len().checked_sub(1) }
            .filter(|&p| p >= 1)
            .ok_or_else(|| TelemetryError::BadHeader {
                path: path.to_path_buf(),
                detail: "header needs at least one feature and a target".into(),
            })?;
        if cols[target_pos] != TARGET_NAME {
            return Err(TelemetryError::BadHeader {
                path: path.to_path_buf(),
                detail: format!("expected target column `{TARGET_NAME}`, found `{}`", cols[target_pos]),
            });
        }
        let feature_names: Vec<String> = cols[..target_pos].iter().map(|s| s.to_string()).collect();

        let mut rows = Vec::new();
        let mut target = Vec::new();
        let mut inlet = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|source| TelemetryError::Io { path: path.to_path_buf(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(TelemetryError::BadHeader {
                    path: path.to_path_buf(),
                    detail: format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), cols.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64, TelemetryError> {
                s.trim().parse::<f64>().map_err(|_| TelemetryError::BadHeader {
                    path: path.to_path_buf(),
                    detail: format!("row {}: bad {what} `{s}`", lineno + 2),
                })
            };
            let mut row = Vec::with_capacity(target_pos);
            for f in &fields[..target_pos] {
                row.push(parse(f, "feature")?);
            }
            rows.push(row);
            target.push(parse(fields[target_pos], "target")?);
            if has_inlet {
                inlet.push(parse(fields[target_pos + 1], "inlet")?);
            }
        }
        if rows.is_empty() {
            return Err(TelemetryError::NoRows(path.to_path_buf()));
        }
        Ok(Dataset::from_parts(host_id, feature_names, rows, target, inlet))
    }
}

fn column_bounds(names: &[String], rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); names.len()];
    for row in rows {
        for (b, &v) in bounds.iter_mut().zip(row.iter()) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    bounds
}

/// Outcome of partitioning cleaned records by host.
#[derive(Debug)]
pub struct Partitioned {
    pub datasets: BTreeMap<String, Dataset>,
    /// Rows dropped because a later record re-emitted the same timestamp.
    pub duplicate_drops: usize,
}

/// Group records by host id, order each host chronologically, drop duplicate
/// timestamps keeping the last occurrence, and build one dataset per host.
pub fn partition_by_host(records: &[HostRecord]) -> Partitioned {
    let mut by_host: BTreeMap<String, Vec<&HostRecord>> = BTreeMap::new();
    for rec in records {
        by_host.entry(rec.host_id.clone()).or_default().push(rec);
    }

    let mut duplicate_drops = 0usize;
    let mut datasets = BTreeMap::new();
    for (host_id, mut recs) in by_host {
        // Stable sort keeps input order within equal timestamps, so the last
        // element of each equal run is the re-emission to keep.
        recs.sort_by_key(|r| r.timestamp);
        let mut kept: Vec<&HostRecord> = Vec::with_capacity(recs.len());
        for rec in recs {
            match kept.last() {
                Some(prev) if prev.timestamp == rec.timestamp => {
                    duplicate_drops += 1;
                    *kept.last_mut().unwrap() = rec;
                }
                _ => kept.push(rec),
            }
        }
        let rows: Vec<Vec<f64>> = kept.iter().map(|r| r.features()).collect();
        let target: Vec<f64> = kept.iter().map(|r| ambient_target(r)).collect();
        let inlet: Vec<f64> = kept.iter().map(|r| r.t_inlet).collect();
        let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        datasets.insert(host_id.clone(), Dataset::from_parts(host_id, names, rows, target, inlet));
    }
    Partitioned { datasets, duplicate_drops }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(host: &str, ts: i64) -> HostRecord {
        HostRecord {
            host_id: host.to_string(),
            timestamp: ts,
            cpu_load: 25.0,
            ram_total: 524288.0,
            ram_used: 300000.0,
            n_cpu: 64,
            n_cpu_used: 40,
            net_rx: 2800.0,
            net_tx: 1300.0,
            power: 220.0,
            t_cpu1: 60.0,
            t_cpu2: 55.0,
            fans: [9000.0, 9100.0, 9050.0, 9020.0],
            t_inlet: 17.0,
            n_vms: 9,
        }
    }

    const HEADER: &str = "host_id,timestamp,cpu_load,ram_total,ram_used,n_cpu,n_cpu_used,net_rx,net_tx,power,t_cpu1,t_cpu2,fan1,fan2,fan3,fan4,t_inlet,n_vms";

    fn row_line(host: &str, ts: i64, t_cpu1: &str) -> String {
        format!(
            "{host},{ts},25,524288,300000,64,40,2800,1300,220,{t_cpu1},55,9000,9100,9050,9020,17,9"
        )
    }

    fn write_log(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{HEADER}").unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn effective_cpu_temp_is_max() {
        let mut r = record("a", 0);
        r.t_cpu1 = 82.0;
        r.t_cpu2 = 75.96;
        assert_eq!(effective_cpu_temp(&r), 82.0);
        r.t_cpu1 = 29.14;
        r.t_cpu2 = 35.0;
        assert_eq!(effective_cpu_temp(&r), 35.0);
        r.t_cpu1 = 50.0;
        r.t_cpu2 = 50.0;
        assert_eq!(effective_cpu_temp(&r), 50.0);
    }

    #[test]
    fn ambient_target_is_inlet_plus_cpu() {
        let mut r = record("a", 0);
        r.t_inlet = 0.0;
        r.t_cpu1 = 70.0;
        r.t_cpu2 = 60.0;
        assert_eq!(ambient_target(&r), 70.0);
        r.t_inlet = 18.05;
        r.t_cpu1 = 82.0;
        r.t_cpu2 = 75.0;
        assert!((ambient_target(&r) - 100.05).abs() < 1e-12);
        r.t_inlet = 25.75;
        r.t_cpu1 = 59.50;
        r.t_cpu2 = 59.50;
        assert!((ambient_target(&r) - 85.25).abs() < 1e-12);
    }

    #[test]
    fn parse_drops_nan_rows() {
        let f = write_log(&[row_line("h1", 0, "NaN"), row_line("h1", 600, "61.5")]);
        let parsed = parse_log(f.path(), &IngestConfig::default()).unwrap();
        assert_eq!(parsed.rows_read, 2);
        assert_eq!(parsed.dropped, 1);
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].t_cpu1, 61.5);
    }

    #[test]
    fn parse_counts_malformed_rows() {
        let f = write_log(&[
            row_line("h1", 0, "60"),
            "h1,not_a_ts,25,524288,300000,64,40,2800,1300,220,60,55,9000,9100,9050,9020,17,9"
                .to_string(),
            row_line("h1", 600, "60"),
            "h1,1200,25,524288".to_string(),
            row_line("h2", 0, "58"),
        ]);
        let parsed = parse_log(f.path(), &IngestConfig::default()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert_eq!(parsed.dropped, 2);
        assert_eq!(parsed.rows_read, 5);
    }

    #[test]
    fn parse_rejects_out_of_range() {
        // cpu_load > 100 and negative power both fail cleaning.
        let bad1 =
            "h1,0,101,524288,300000,64,40,2800,1300,220,60,55,9000,9100,9050,9020,17,9".to_string();
        let bad2 =
            "h1,600,25,524288,300000,64,40,2800,1300,-5,60,55,9000,9100,9050,9020,17,9".to_string();
        let f = write_log(&[bad1, bad2, row_line("h1", 1200, "60")]);
        let parsed = parse_log(f.path(), &IngestConfig::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.dropped, 2);
    }

    #[test]
    fn parse_missing_column_names_it() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "host_id,timestamp,cpu_load").unwrap();
        writeln!(f, "h1,0,25").unwrap();
        let err = parse_log(f.path(), &IngestConfig::default()).unwrap_err();
        match err {
            TelemetryError::MissingColumn(c) => assert_eq!(c, "ram_total"),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn parse_empty_file_errors() {
        let f = write_log(&[]);
        assert!(matches!(
            parse_log(f.path(), &IngestConfig::default()),
            Err(TelemetryError::EmptyInput(_))
        ));
    }

    #[test]
    fn column_map_renames_headers() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "node,ts,cpu_load,ram_total,ram_used,n_cpu,n_cpu_used,net_rx,net_tx,power,t_cpu1,t_cpu2,fan1,fan2,fan3,fan4,t_inlet,n_vms"
        )
        .unwrap();
        writeln!(f, "{}", row_line("h9", 0, "60")).unwrap();
        let mut cfg = IngestConfig::default();
        cfg.columns.insert("host_id".into(), "node".into());
        cfg.columns.insert("timestamp".into(), "ts".into());
        let parsed = parse_log(f.path(), &cfg).unwrap();
        assert_eq!(parsed.records[0].host_id, "h9");
    }

    #[test]
    fn partition_groups_and_orders() {
        let mut records = Vec::new();
        for ts in [600, 0, 1800, 1200] {
            let mut r = record("a", ts);
            r.cpu_load = ts as f64 / 100.0; // marks the row with its timestamp
            records.push(r);
        }
        records.push(record("b", 600));
        records.push(record("b", 0));
        let part = partition_by_host(&records);
        assert_eq!(part.datasets.len(), 2);
        assert_eq!(part.datasets["a"].n_rows(), 4);
        assert_eq!(part.datasets["b"].n_rows(), 2);
        assert_eq!(part.duplicate_drops, 0);
        // Row order within a host equals timestamp order.
        let loads: Vec<f64> = part.datasets["a"].rows.iter().map(|r| r[0]).collect();
        assert_eq!(loads, vec![0.0, 6.0, 12.0, 18.0]);
    }

    proptest::proptest! {
        #[test]
        fn ambient_monotone_in_sensors(
            t_in in 0.0f64..40.0,
            t1 in 0.0f64..100.0,
            t2 in 0.0f64..100.0,
            bump in 0.0f64..10.0,
        ) {
            let mut r = record("a", 0);
            r.t_inlet = t_in;
            r.t_cpu1 = t1;
            r.t_cpu2 = t2;
            let base = ambient_target(&r);
            let mut up = r.clone();
            up.t_inlet += bump;
            proptest::prop_assert!(ambient_target(&up) >= base);
            let mut up = r.clone();
            up.t_cpu1 += bump;
            proptest::prop_assert!(ambient_target(&up) >= base);
            let mut up = r.clone();
            up.t_cpu2 += bump;
            proptest::prop_assert!(ambient_target(&up) >= base);
        }
    }

    #[test]
    fn partition_single_record_degenerate_bounds() {
        let part = partition_by_host(&[record("a", 0)]);
        let d = &part.datasets["a"];
        for (lo, hi) in &d.bounds {
            assert_eq!(lo, hi);
        }
    }

    #[test]
    fn partition_bounds_are_min_max() {
        let mut records = Vec::new();
        for (i, load) in [10.0, 20.0, 55.0, 30.0, 42.0, 17.0, 25.0, 49.0, 11.0, 39.0]
            .iter()
            .enumerate()
        {
            let mut r = record("a", i as i64 * 600);
            r.cpu_load = *load;
            records.push(r);
        }
        let part = partition_by_host(&records);
        assert_eq!(part.datasets["a"].bounds[0], (10.0, 55.0));
    }

    #[test]
    fn partition_keeps_last_duplicate() {
        let mut first = record("a", 600);
        first.cpu_load = 10.0;
        let mut second = record("a", 600);
        second.cpu_load = 90.0;
        let part = partition_by_host(&[record("a", 0), first, second]);
        let d = &part.datasets["a"];
        assert_eq!(d.n_rows(), 2);
        assert_eq!(part.duplicate_drops, 1);
        assert_eq!(d.rows[1][0], 90.0);
    }

    #[test]
    fn row_accounting_balances() {
        let f = write_log(&[
            row_line("a", 0, "60"),
            row_line("a", 0, "61"), // duplicate timestamp
            row_line("b", 0, "NaN"),
            row_line("b", 600, "59"),
        ]);
        let parsed = parse_log(f.path(), &IngestConfig::default()).unwrap();
        let part = partition_by_host(&parsed.records);
        let kept: usize = part.datasets.values().map(Dataset::n_rows).sum();
        assert_eq!(kept + parsed.dropped + part.duplicate_drops, parsed.rows_read);
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let mut r1 = record("hx", 0);
        r1.cpu_load = 33.333333333333336;
        r1.power = 221.00000000000003;
        let r2 = record("hx", 600);
        let part = partition_by_host(&[r1, r2]);
        let d = &part.datasets["hx"];
        let dir = tempfile::tempdir().unwrap();
        let path = d.save(dir.path()).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(*d, loaded);
    }

    #[test]
    fn select_columns_reorders() {
        let part = partition_by_host(&[record("a", 0)]);
        let d = &part.datasets["a"];
        let sub = d.select_columns(&[8, 0]);
        assert_eq!(sub.feature_names, vec!["P_c".to_string(), "CPU".to_string()]);
        assert_eq!(sub.rows[0], vec![220.0, 25.0]);
    }
}
