//! Artifact writers shared by the commands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tcs_core::day2day::{DayMetrics, RunOutcome, Stat};

use crate::CliError;

/// Bumped whenever a column or summary field is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `days.csv`, written one row per day as the run progresses.
pub struct DaysCsv {
    out: BufWriter<File>,
}

impl DaysCsv {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut out = create(path)?;
        DayMetrics::write_header(&mut out)?;
        Ok(DaysCsv { out })
    }

    pub fn push(&mut self, m: &DayMetrics) -> Result<(), CliError> {
        m.write_row(&mut self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Mean and std with NaN mapped to null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatJson {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl From<Stat> for StatJson {
    fn from(s: Stat) -> Self {
        let ok = |v: f64| v.is_finite().then_some(v);
        StatJson { mean: ok(s.mean), std: ok(s.std) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub scheme: String,
    pub converged: bool,
    pub converged_day: Option<u32>,
    /// Days carrying metrics, i.e. excluding the initial day of a cold start.
    pub metric_days: usize,
    pub window_first_day: u32,
    pub window_last_day: u32,
    pub min_endowment: Option<f64>,
    /// Per-capita credits the toll would use at the no-toll equilibrium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_toll_credit_use: Option<StatJson>,
    pub columns: Vec<String>,
    pub stats: BTreeMap<String, StatJson>,
}

impl Summary {
    pub fn new(name: &str, outcome: &RunOutcome, no_toll_credit_use: Option<Stat>) -> Self {
        Summary {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            scheme: outcome.scheme.label().to_string(),
            converged: outcome.converged,
            converged_day: outcome.converged_day,
            metric_days: outcome.days.len(),
            window_first_day: outcome.summary.first_day,
            window_last_day: outcome.summary.last_day,
            min_endowment: outcome.min_endowment,
            no_toll_credit_use: no_toll_credit_use.map(StatJson::from),
            columns: DayMetrics::COLUMNS.iter().map(|s| s.to_string()).collect(),
            stats: outcome.summary.stats.iter().map(|(k, &v)| (k.clone(), v.into())).collect(),
        }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.stats.get(metric).and_then(|s| s.mean)
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn begin(command: &str, config_hash: String, seed: u64) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: String::new(),
            files: Vec::new(),
        }
    }

    /// Inventories `out` and writes the manifest into it.
    pub fn finish(mut self, out: &Path) -> Result<Self, CliError> {
        self.finished = now();
        self.files = inventory(out)?;
        write_json(&out.join(MANIFEST_FILE), &self)?;
        Ok(self)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Every file under `root` except the manifest, sorted by path.
pub fn inventory(root: &Path) -> Result<Vec<FileEntry>, CliError> {
    let mut paths = Vec::new();
    collect(root, &mut paths)?;
    paths.sort();
    let mut files = Vec::new();
    for p in paths {
        let rel = p.strip_prefix(root).unwrap_or(&p);
        let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        let rel = rel.join("/");
        if rel == MANIFEST_FILE {
            continue;
        }
        let bytes = std::fs::read(&p)?;
        files.push(FileEntry {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    Ok(files)
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
