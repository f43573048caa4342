//! CSV tables and key=value summaries.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a table back gives the exact values that were written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use phasecool::{EnsembleStats, TrajectoryRecord};

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "t,q,p,n,phi";
pub const ENSEMBLE_HEADER: &str = "t,mean_n,var_n,mean_q2,mean_p2";

pub fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::with_capacity(64 * record.samples.len());
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &record.samples {
        writeln!(out, "{},{},{},{},{}", s.t, s.q, s.p, s.n, s.phi).unwrap();
    }
    out
}

pub fn ensemble_csv(stats: &EnsembleStats) -> String {
    let mut out = String::with_capacity(64 * stats.time_bins.len());
    out.push_str(ENSEMBLE_HEADER);
    out.push('\n');
    for i in 0..stats.time_bins.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            stats.time_bins[i], stats.mean_n[i], stats.var_n[i], stats.mean_q2[i], stats.mean_p2[i]
        )
        .unwrap();
    }
    out
}

pub fn write_trajectory(record: &TrajectoryRecord, path: &Path) -> Result<PathBuf, CliError> {
    write_file(path, &trajectory_csv(record))
}

pub fn write_ensemble(stats: &EnsembleStats, path: &Path) -> Result<PathBuf, CliError> {
    write_file(path, &ensemble_csv(stats))
}

/// Rows of a CSV table with the given header, parsed as floats.
pub fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_table(&text, header).map_err(|msg| CliError::Validation(format!("{}: {msg}", path.display())))
}

pub fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        Some(h) => return Err(format!("header `{h}` does not match `{header}`")),
        None => return Err("empty table".into()),
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != width {
                return Err(format!("line {}: {} fields, expected {width}", i + 2, row.len()));
            }
            Ok(row)
        })
        .collect()
}

/// Ordered key=value summary, one pair per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pairs: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        self.pairs.push((key, value.to_string().replace('\n', " ")));
        self
    }

    /// Adds `prefix.key` for every pair.
    pub fn extend_prefixed<I, K, V>(&mut self, prefix: &str, pairs: I) -> &mut Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: ToString,
    {
        for (k, v) in pairs {
            self.push(format!("{prefix}.{}", k.as_ref()), v);
        }
        self
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf, CliError> {
        write_file(path, &self.render())
    }
}

pub fn read_summary(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_summary(&text))
}

pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
