//! Seeded Gaussian sketches for high-dimensional traces.
//!
//! A projection is a `k×d` matrix with i.i.d. `N(0, 1/k)` entries, so
//! `E‖Rx‖² = ‖x‖²`. Entry `(i, j)` is drawn from Philox block
//! `(i·d + j) / 2` of stream 0 keyed by the seed (see [`crate::rng`]), which
//! makes generation reproducible without replaying a sequential stream.
//! Stored projection files are nevertheless the source of truth: analyses
//! reload the matrix instead of regenerating it.
//!
//! `GPRJ` file layout, little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GPRJ"
//! 4       4     version, u32 = 1
//! 8       4     generator_id, u32
//! 12      1     dtype, u8 (1 = float64)
//! 13      3     reserved, zero
//! 16      8     k, u64
//! 24      8     d, u64
//! 32      8     seed, u64
//! 40      ...   payload, k×d float64, row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numeric::sq_norm;
use crate::rng::{CounterRng, GENERATOR_ID, GENERATOR_NAME};
use crate::trace::GradientTrace;

pub const MAGIC: [u8; 4] = *b"GPRJ";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;
/// Sketch dimension used when none is given.
pub const DEFAULT_K: usize = 256;
/// `generator_id` of matrices that were not produced by the built-in sampler.
pub const EXTERNAL_GENERATOR: u32 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSpec {
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    pub generator_id: u32,
    matrix: Matrix,
}

impl ProjectionSpec {
    /// Use a caller-supplied `k×d` matrix.
    pub fn from_matrix(matrix: Matrix, seed: u64) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::Precondition(
                "projection matrix must be nonempty".into(),
            ));
        }
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(
                "projection matrix has non-finite entries".into(),
            ));
        }
        Ok(Self {
            k: matrix.rows(),
            d: matrix.cols(),
            seed,
            generator_id: EXTERNAL_GENERATOR,
            matrix,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn generator_name(&self) -> &'static str {
        if self.generator_id == GENERATOR_ID {
            GENERATOR_NAME
        } else {
            "external"
        }
    }
}

pub fn make_projection(d: usize, k: usize, seed: u64) -> Result<ProjectionSpec> {
    if d == 0 || k == 0 {
        return Err(Error::Precondition(format!(
            "projection needs d ≥ 1 and k ≥ 1, got d={d}, k={k}"
        )));
    }
    let rng = CounterRng::new(seed, 0);
    let scale = 1.0 / (k as f64).sqrt();
    let total = k * d;
    let mut row_major = vec![0.0; total];
    for (b, pair) in row_major.chunks_mut(2).enumerate() {
        let (z0, z1) = rng.normal_pair_at(b as u64);
        pair[0] = z0 * scale;
        if let Some(second) = pair.get_mut(1) {
            *second = z1 * scale;
        }
    }
    let matrix = Matrix::from_row_major(k, d, &row_major)?;
    Ok(ProjectionSpec {
        k,
        d,
        seed,
        generator_id: GENERATOR_ID,
        matrix,
    })
}

/// `g̃_t = R g_t` for every step; lineage is recorded in the trace metadata.
pub fn apply_projection(proj: &ProjectionSpec, trace: &GradientTrace) -> Result<GradientTrace> {
    if trace.dim() != proj.d {
        return Err(Error::dims(
            format!("trace dim {} (projection d)", proj.d),
            format!("trace dim {}", trace.dim()),
        ));
    }
    let source = Matrix::from_col_major(trace.dim(), trace.steps(), trace.values().to_vec())?;
    let projected = proj.matrix.matmul(&source)?;
    let mut out = GradientTrace::new(proj.k, projected.into_vec())?.with_meta(trace.meta().clone());
    out.insert_meta("projection_seed", proj.seed.to_string());
    out.insert_meta("projection_k", proj.k.to_string());
    out.insert_meta("projection_source_dim", proj.d.to_string());
    out.insert_meta("projection_generator", proj.generator_name());
    Ok(out)
}

pub fn encode_projection(proj: &ProjectionSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * proj.k * proj.d);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&proj.generator_id.to_le_bytes());
    out.push(1);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&(proj.k as u64).to_le_bytes());
    out.extend_from_slice(&(proj.d as u64).to_le_bytes());
    out.extend_from_slice(&proj.seed.to_le_bytes());
    for i in 0..proj.k {
        for j in 0..proj.d {
            out.extend_from_slice(&proj.matrix[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_projection(bytes: &[u8]) -> Result<ProjectionSpec> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "projection file is {} bytes, shorter than its header",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad projection magic {:02x?}",
            &bytes[0..4]
        )));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported projection version {version}"
        )));
    }
    let generator_id = u32_at(8);
    if bytes[12] != 1 {
        return Err(Error::Format(format!(
            "unsupported projection dtype {}",
            bytes[12]
        )));
    }
    if bytes[13..16] != [0, 0, 0] {
        return Err(Error::Format(
            "reserved projection header bytes are not zero".into(),
        ));
    }
    let (k, d, seed) = (u64_at(16), u64_at(24), u64_at(32));
    if k == 0 || d == 0 {
        return Err(Error::Format(format!(
            "projection header declares k={k}, d={d}"
        )));
    }
    let expected = k
        .checked_mul(d)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Corruption(format!("k={k} x d={d} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(Error::Corruption(format!(
            "projection header declares {k}x{d} but payload has {} bytes",
            payload.len()
        )));
    }
    let row_major: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = row_major.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / d as usize,
            step: i % d as usize,
        });
    }
    let matrix = Matrix::from_row_major(k as usize, d as usize, &row_major)?;
    Ok(ProjectionSpec {
        k: k as usize,
        d: d as usize,
        seed,
        generator_id,
        matrix,
    })
}

pub fn save_projection(proj: &ProjectionSpec, path: &Path) -> Result<()> {
    fs::write(path, encode_projection(proj)).map_err(|e| Error::io(path, e))
}

pub fn load_projection(path: &Path) -> Result<ProjectionSpec> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_projection(&bytes)
}

/// Norm-preservation statistics over a set of vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistortionStats {
    /// Number of (vector, sketch) pairs compared.
    pub pair_count: usize,
    /// `max |‖Rx‖/‖x‖ − 1|`.
    pub max_relative_norm_error: f64,
    /// `‖Rx‖²/‖x‖²` per vector, in input order.
    pub sq_norm_ratios: Vec<f64>,
}

impl DistortionStats {
    /// Fraction of vectors with `|‖Rx‖²/‖x‖² − 1| ≤ tolerance`.
    pub fn fraction_within(&self, tolerance: f64) -> f64 {
        if self.pair_count == 0 {
            return 0.0;
        }
        let hits = self
            .sq_norm_ratios
            .iter()
            .filter(|r| (*r - 1.0).abs() <= tolerance)
            .count();
        hits as f64 / self.pair_count as f64
    }

    /// Combine statistics from separately processed batches.
    pub fn merge(&mut self, other: DistortionStats) {
        self.pair_count += other.pair_count;
        self.max_relative_norm_error = self
            .max_relative_norm_error
            .max(other.max_relative_norm_error);
        self.sq_norm_ratios.extend(other.sq_norm_ratios);
    }
}

/// Compare `‖Rx‖²` with `‖x‖²` for every column of `vectors` (a `d×n`
/// matrix). Zero columns are skipped.
pub fn distortion_check(proj: &ProjectionSpec, vectors: &Matrix) -> Result<DistortionStats> {
    if vectors.rows() != proj.d {
        return Err(Error::dims(
            format!("vectors of dimension {}", proj.d),
            format!("dimension {}", vectors.rows()),
        ));
    }
    let sketched = proj.matrix.matmul(vectors)?;
    let mut stats = DistortionStats::default();
    for (x, y) in vectors.columns().zip(sketched.columns()) {
        let nx = sq_norm(x);
        if nx == 0.0 {
            continue;
        }
        let ratio = sq_norm(y) / nx;
        stats.pair_count += 1;
        stats.max_relative_norm_error = stats
            .max_relative_norm_error
            .max((ratio.sqrt() - 1.0).abs());
        stats.sq_norm_ratios.push(ratio);
    }
    if stats.pair_count == 0 {
        return Err(Error::Precondition(
            "distortion check needs a nonzero vector".into(),
        ));
    }
    Ok(stats)
}
