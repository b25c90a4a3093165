//! Report assembly and atomic file output.
//!
//! Every artifact is written to a temporary sibling and renamed into
//! place, so a crash never leaves a partial file behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;

/// The canonical JSON envelope of every run.
#[derive(Serialize)]
pub struct Report<'a> {
    pub version: &'a str,
    pub subcommand: &'a str,
    /// Effective key=value configuration; feeding it back as a config
    /// file reproduces the run.
    pub config: &'a BTreeMap<String, String>,
    pub warnings: &'a [String],
    pub duration_ms: u64,
    pub results: &'a serde_json::Value,
}

/// Where artifacts go and which formats are on.
pub struct Outputs {
    dir: PathBuf,
    pub json: bool,
    pub csv: bool,
}

impl Outputs {
    pub fn from_settings(settings: &Settings) -> Result<Outputs, CliError> {
        let dir = PathBuf::from(settings.require("out_dir")?);
        let mut json = false;
        let mut csv = false;
        for fmt in settings.require("formats")?.split(',') {
            match fmt.trim() {
                "json" => json = true,
                "csv" => csv = true,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown output format '{other}': expected json or csv"
                    )))
                }
            }
        }
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Internal(format!("creating {}: {e}", dir.display())))?;
        Ok(Outputs { dir, json, csv })
    }

    pub fn write_report(&self, report: &Report) -> Result<(), CliError> {
        if !self.json {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(report)?;
        bytes.push(b'\n');
        let name = format!("{}_report.json", report.subcommand);
        atomic_write(&self.dir.join(name), &bytes)
    }

    /// Writes one plot-ready CSV companion; a no-op unless csv output is
    /// enabled.
    pub fn write_csv<R, F>(&self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = F>,
        F: IntoIterator<Item = String>,
    {
        if !self.csv {
            return Ok(());
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Internal(format!("writing {name}: {e}"));
        writer.write_record(header).map_err(fail)?;
        for row in rows {
            writer.write_record(row).map_err(fail)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::Internal(format!("writing {name}: {e}")))?;
        atomic_write(&self.dir.join(name), &bytes)
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Internal(format!("no file name in {}", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Internal(format!("renaming into {}: {e}", path.display())))
}

/// Shortest round-trippable text for a float cell.
pub fn num(v: f64) -> String {
    v.to_string()
}
