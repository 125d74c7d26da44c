//! `ingest`: raw telemetry logs in, per-host dataset files out.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rackheat::telemetry::{parse_log, partition_by_host, Dataset, HostRecord, IngestConfig};

use super::{csv_inputs, ensure_dir, write_json, write_run_config};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestArgs {
    /// A telemetry CSV file or a directory of them.
    pub input: PathBuf,
    pub out_dir: PathBuf,
    /// Optional TOML file with delimiter and column map.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HostIngest {
    pub rows: usize,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub dropped: usize,
    pub duplicate_drops: usize,
    pub hosts: BTreeMap<String, HostIngest>,
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<IngestSummary> {
    let cfg = match &args.config {
        Some(path) => IngestConfig::from_toml_file(path)
            .with_context(|| format!("loading ingest config {}", path.display()))?,
        None => IngestConfig::default(),
    };
    let files = csv_inputs(&args.input)?;
    let mut records: Vec<HostRecord> = Vec::new();
    let mut rows_read = 0usize;
    let mut dropped = 0usize;
    for file in &files {
        let parsed =
            parse_log(file, &cfg).with_context(|| format!("parsing {}", file.display()))?;
        rows_read += parsed.rows_read;
        dropped += parsed.dropped;
        records.extend(parsed.records);
    }
    let part = partition_by_host(&records);

    ensure_dir(&args.out_dir)?;
    let mut hosts = BTreeMap::new();
    for (host, dataset) in &part.datasets {
        dataset.save(&args.out_dir)?;
        hosts.insert(
            host.clone(),
            HostIngest { rows: dataset.n_rows(), bounds: dataset.bounds.clone() },
        );
    }
    let summary = IngestSummary {
        rows_read,
        dropped,
        duplicate_drops: part.duplicate_drops,
        hosts,
    };
    let kept: usize = summary.hosts.values().map(|h| h.rows).sum();
    debug_assert_eq!(kept + summary.dropped + summary.duplicate_drops, summary.rows_read);

    write_json(&args.out_dir.join("ingest_summary.json"), &summary)?;
    write_run_config(&args.out_dir, "ingest", args)?;
    Ok(summary)
}

/// Sorted datasets under a directory, loaded from the canonical format.
pub(crate) fn load_datasets(dir: &std::path::Path) -> Result<Vec<Dataset>> {
    let files = csv_inputs(dir)?;
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        out.push(Dataset::load(&f).with_context(|| format!("loading dataset {}", f.display()))?);
    }
    Ok(out)
}
