//! File output shared by the subcommands. Every writer is deterministic: no
//! timestamps, maps are ordered, floats use a fixed format.

use std::fs;
use std::path::{Path, PathBuf};

use gradpred::projection::load_projection;
use gradpred::{apply_projection, load_trace, Error, GradientTrace, Result, TraceFormat};
use serde::Serialize;

use crate::TraceInput;

/// CSV float: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rows joined with commas and terminated by newlines.
pub fn csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `dir/name.ext` → `dir/name.<tag>.ext`.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

/// Load the trace and apply the stored projection, if any.
pub fn load_input(input: &TraceInput) -> Result<GradientTrace> {
    let trace = load_trace(&input.trace, TraceFormat::from_path(&input.trace))?;
    match &input.proj {
        Some(p) => apply_projection(&load_projection(p)?, &trace),
        None => Ok(trace),
    }
}

/// Label for report rows: explicit, then `run` metadata, then the file stem.
pub fn run_label(explicit: Option<&str>, trace: &GradientTrace, path: &Path) -> String {
    explicit
        .map(str::to_string)
        .or_else(|| trace.meta().get("run").cloned())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".into())
        })
}

/// Run `f` for each seed and collect results in seed order.
pub fn sweep<T>(first: u64, count: u64, mut f: impl FnMut(u64) -> Result<T>) -> Result<Vec<T>> {
    if count == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    (first..first + count).map(&mut f).collect()
}
