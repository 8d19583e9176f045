//! Gradient traces and their on-disk formats.
//!
//! A trace is the ordered sequence `g_0..g_T` of logged gradient vectors. The
//! values are stored step-major: the `dim` entries of `g_t` are contiguous.
//!
//! Two formats are supported:
//!
//! * `GTRC` binary, little-endian:
//!
//!   ```text
//!   offset  size  field
//!   0       4     magic "GTRC" (0x47 0x54 0x52 0x43)
//!   4       4     version, u32 = 1
//!   8       1     dtype, u8 (0 = float32, 1 = float64)
//!   9       3     reserved, zero
//!   12      8     dim, u64
//!   20      8     count, u64 (number of logged vectors)
//!   28      ...   payload, count vectors of dim values, step-major
//!   ```
//!
//! * CSV: one row per step, `dim` comma-separated decimals, no header.
//!
//! Free-form metadata does not fit either format; it travels in an optional
//! JSON sidecar `<file>.meta.json` next to the trace.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sq_norm, CompensatedSum};

pub const MAGIC: [u8; 4] = *b"GTRC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

/// Free-form run metadata (run name, optimizer tag, projection lineage, ...).
pub type Meta = BTreeMap<String, String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Binary,
    Csv,
}

impl TraceFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

/// Validated sequence of gradient vectors. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTrace {
    dim: usize,
    steps: usize,
    values: Vec<f64>,
    meta: Meta,
}

impl GradientTrace {
    /// Build from step-major values; `values.len()` must be a positive
    /// multiple of `dim` and every entry finite.
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Precondition(
                "trace dimension must be positive".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::Precondition("trace needs at least one step".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::dims(
                format!("a multiple of dim={dim}"),
                format!("{} values", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i % dim,
                step: i / dim,
            });
        }
        Ok(Self {
            dim,
            steps: values.len() / dim,
            values,
            meta: Meta::new(),
        })
    }

    /// Build from one vector per step.
    pub fn from_steps<V: AsRef<[f64]>>(steps: &[V]) -> Result<Self> {
        let dim = steps.first().map(|s| s.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(dim * steps.len());
        for (t, s) in steps.iter().enumerate() {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::dims(
                    format!("dim {dim}"),
                    format!("{} values at step {t}", s.len()),
                ));
            }
            values.extend_from_slice(s);
        }
        Self::new(dim, values)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }

    pub fn insert_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of logged vectors, `T + 1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Step-major payload.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `g_t`.
    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    /// Apply `f` to every step vector, producing a trace of dimension `out_dim`.
    pub fn map_columns(
        &self,
        out_dim: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let mut out = vec![0.0; out_dim * self.steps];
        for (src, dst) in self.columns().zip(out.chunks_exact_mut(out_dim)) {
            f(src, dst);
        }
        Ok(Self::new(out_dim, out)?.with_meta(self.meta.clone()))
    }

    /// Steps `start..end` as a new trace (metadata is kept).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.steps {
            return Err(Error::Precondition(format!(
                "step range {start}..{end} outside 0..{}",
                self.steps
            )));
        }
        Ok(Self::new(
            self.dim,
            self.values[start * self.dim..end * self.dim].to_vec(),
        )?
        .with_meta(self.meta.clone()))
    }
}

/// Summary of a trace used to guard energy-normalized metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    /// Steps with `‖g_t‖ = 0`, increasing.
    pub zero_gradient_steps: Vec<usize>,
    /// `G_T = Σ_t ‖g_t‖²`.
    pub total_energy: f64,
    pub min_norm: f64,
    pub max_norm: f64,
}

pub fn validate_trace(trace: &GradientTrace) -> TraceDiagnostics {
    let mut energy = CompensatedSum::new();
    let mut zero_gradient_steps = Vec::new();
    let mut min_sq = f64::INFINITY;
    let mut max_sq: f64 = 0.0;
    for (t, g) in trace.columns().enumerate() {
        let sq = sq_norm(g);
        if sq == 0.0 {
            zero_gradient_steps.push(t);
        }
        min_sq = min_sq.min(sq);
        max_sq = max_sq.max(sq);
        energy.add(sq);
    }
    TraceDiagnostics {
        zero_gradient_steps,
        total_energy: energy.value(),
        min_norm: min_sq.sqrt(),
        max_norm: max_sq.sqrt(),
    }
}

/// Sidecar path holding a trace's metadata.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn load_trace(path: &Path, format: TraceFormat) -> Result<GradientTrace> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let trace = match format {
        TraceFormat::Binary => decode_binary(&bytes)?,
        TraceFormat::Csv => decode_csv(&bytes)?,
    };
    let sidecar = meta_path(path);
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: Meta = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?;
        return Ok(trace.with_meta(meta));
    }
    Ok(trace)
}

/// Write `trace` to `path`; metadata, when present, goes to the sidecar.
pub fn save_trace(trace: &GradientTrace, path: &Path, format: TraceFormat) -> Result<()> {
    let bytes = match format {
        TraceFormat::Binary => encode_binary(trace),
        TraceFormat::Csv => encode_csv(trace),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = meta_path(path);
    if trace.meta.is_empty() {
        if sidecar.exists() {
            fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        }
    } else {
        let file = fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &trace.meta)
            .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(&sidecar, e))?;
    }
    Ok(())
}

pub fn encode_binary(trace: &GradientTrace) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * trace.values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(Dtype::F64 as u8);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&(trace.dim as u64).to_le_bytes());
    out.extend_from_slice(&(trace.steps as u64).to_le_bytes());
    for v in &trace.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte field"))
}

pub fn decode_binary(bytes: &[u8]) -> Result<GradientTrace> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:02x?}", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4-byte field"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = match bytes[8] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(Error::Format(format!("unknown dtype {other}"))),
    };
    if bytes[9..12] != [0, 0, 0] {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    let dim = read_u64(bytes, 12);
    let count = read_u64(bytes, 20);
    if dim == 0 || count == 0 {
        return Err(Error::Format(format!(
            "header declares dim={dim}, count={count}; both must be positive"
        )));
    }
    let width = match dtype {
        Dtype::F32 => 4u64,
        Dtype::F64 => 8u64,
    };
    let payload = &bytes[HEADER_LEN..];
    let expected = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::Corruption(format!("dim={dim} x count={count} overflows")))?;
    if payload.len() as u64 != expected {
        return Err(Error::Corruption(format!(
            "header declares {dim}x{count} values ({expected} bytes) but payload has {} bytes",
            payload.len()
        )));
    }
    let values: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect(),
    };
    GradientTrace::new(dim as usize, values)
}

/// CSV rows printed with 17 significant digits.
pub fn encode_csv(trace: &GradientTrace) -> Vec<u8> {
    let mut out = String::new();
    for g in trace.columns() {
        let row: Vec<String> = g.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn decode_csv(bytes: &[u8]) -> Result<GradientTrace> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("csv is not utf-8: {e}")))?;
    let mut dim = None;
    let mut values = Vec::new();
    for (t, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let start = values.len();
        for (i, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {t}, column {i}: cannot parse {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, step: t });
            }
            values.push(v);
        }
        let width = values.len() - start;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Corruption(format!(
                    "row {t} has {width} values, expected {d}"
                )))
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::Precondition("csv trace has no rows".into()))?;
    GradientTrace::new(dim, values)
}
