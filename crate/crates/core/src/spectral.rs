//! Increment spectra and predictable rank.
//!
//! The increment matrix stacks consecutive gradient differences
//! `h_t = g_t − g_{t−1}` as columns. Its squared singular values split the
//! increment energy by temporal direction; `r*(ε)` is the smallest number of
//! directions holding a `1 − ε` share. Because the best rank-`r`
//! approximation error of a matrix equals its SVD tail energy, the tail is
//! also the least error any rank-`r` increment predictor can reach.
//! [`best_rank_r_residual`] recomputes that error by explicit reconstruction
//! so the equality can be checked rather than assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};
use crate::metrics::window_starts;
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::trace::GradientTrace;

/// Predictable-rank thresholds reported by default.
pub const DEFAULT_EPSILONS: [f64; 3] = [0.10, 0.05, 0.01];

/// `H = [h_1, ..., h_T]`, one column per increment.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementMatrix {
    matrix: Matrix,
}

impl IncrementMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn count(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// `h_{t+1}` for `t` in `0..count`.
    pub fn column(&self, t: usize) -> &[f64] {
        self.matrix.column(t)
    }

    /// Wrap an arbitrary matrix whose columns are taken as increments.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::Precondition(
                "increment matrix must be nonempty".into(),
            ));
        }
        Ok(Self { matrix })
    }
}

pub fn increment_matrix(trace: &GradientTrace) -> Result<IncrementMatrix> {
    if trace.steps() < 2 {
        return Err(Error::Precondition(format!(
            "increments need at least 2 steps, trace has {}",
            trace.steps()
        )));
    }
    let d = trace.dim();
    let v = trace.values();
    let data: Vec<f64> = v[d..]
        .iter()
        .zip(&v[..v.len() - d])
        .map(|(a, b)| a - b)
        .collect();
    Ok(IncrementMatrix {
        matrix: Matrix::from_col_major(d, trace.steps() - 1, data)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `σ_1 ≥ σ_2 ≥ ... ≥ 0`, `min(d, T)` values.
    pub singular_values: Vec<f64>,
    /// `Σ σ_i²`.
    pub total_energy: f64,
    /// `c_r = Σ_{i≤r} σ_i² / Σ σ_i²`, stored at index `r − 1`. All zero when
    /// the matrix has no energy.
    pub cumulative_fractions: Vec<f64>,
}

impl Spectrum {
    pub fn from_singular_values(singular_values: Vec<f64>) -> Self {
        let sq: Vec<f64> = singular_values.iter().map(|s| s * s).collect();
        let total_energy = compensated_sum(sq.iter().copied());
        let mut acc = CompensatedSum::new();
        let cumulative_fractions = sq
            .iter()
            .map(|&e| {
                acc.add(e);
                if total_energy > 0.0 {
                    acc.value() / total_energy
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            singular_values,
            total_energy,
            cumulative_fractions,
        }
    }

    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }
}

pub fn singular_spectrum(h: &IncrementMatrix) -> Result<Spectrum> {
    let dec = svd(h.matrix())?;
    Ok(Spectrum::from_singular_values(dec.singular_values))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// `r*(ε) = min { r : c_r ≥ 1 − ε }`, compared without slack.
pub fn predictable_rank(spec: &Spectrum, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    if !(spec.total_energy > 0.0) {
        return Err(Error::Undefined {
            metric: "predictable rank",
            reason: "increment energy is zero".into(),
        });
    }
    let target = 1.0 - epsilon;
    spec.cumulative_fractions
        .iter()
        .position(|&c| c >= target)
        .map(|i| i + 1)
        .ok_or_else(|| Error::Undefined {
            metric: "predictable rank",
            reason: format!("cumulative energy never reaches {target}"),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub epsilons: Vec<f64>,
    pub ranks: Vec<usize>,
}

pub fn rank_profile(spec: &Spectrum, epsilons: &[f64]) -> Result<RankProfile> {
    let ranks = epsilons
        .iter()
        .map(|&e| predictable_rank(spec, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankProfile {
        epsilons: epsilons.to_vec(),
        ranks,
    })
}

/// `Σ_{i>r} σ_i²`.
pub fn tail_energy(spec: &Spectrum, r: usize) -> Result<f64> {
    if r > spec.len() {
        return Err(Error::Precondition(format!(
            "rank {r} exceeds the {} available singular values",
            spec.len()
        )));
    }
    Ok(compensated_sum(
        spec.singular_values[r..].iter().map(|s| s * s),
    ))
}

/// `‖H − H_r‖_F²` with `H_r` rebuilt from the leading `r` singular triplets.
pub fn best_rank_r_residual(h: &IncrementMatrix, r: usize) -> Result<f64> {
    let max_rank = h.dim().min(h.count());
    if r == 0 || r > max_rank {
        return Err(Error::Precondition(format!(
            "rank {r} outside 1..={max_rank}"
        )));
    }
    let dec = svd(h.matrix())?;
    let approx = dec.reconstruct(r);
    Ok(compensated_sum(
        h.matrix()
            .as_slice()
            .iter()
            .zip(approx.as_slice())
            .map(|(a, b)| (a - b) * (a - b)),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRank {
    pub start: usize,
    pub end: usize,
    /// `None` when the window's increments carry no energy.
    pub rank: Option<usize>,
}

/// `r*(ε)` per window `[start, end)`; increments never straddle a window edge.
pub fn windowed_rank(
    trace: &GradientTrace,
    window: usize,
    stride: usize,
    epsilon: f64,
) -> Result<Vec<WindowRank>> {
    check_epsilon(epsilon)?;
    if window < 2 || stride == 0 {
        return Err(Error::Precondition(
            "rank windows need length ≥ 2 and a positive stride".into(),
        ));
    }
    if window > trace.steps() {
        return Err(Error::Precondition(format!(
            "window {window} exceeds trace length {}",
            trace.steps()
        )));
    }
    window_starts(trace.steps(), window, stride)
        .map(|start| {
            let end = start + window;
            let h = increment_matrix(&trace.slice(start, end)?)?;
            let spec = singular_spectrum(&h)?;
            let rank = if spec.total_energy > 0.0 {
                Some(predictable_rank(&spec, epsilon)?)
            } else {
                None
            };
            Ok(WindowRank { start, end, rank })
        })
        .collect()
}
