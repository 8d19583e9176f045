//! Traces with a planted low-rank increment structure.

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, Matrix};
use crate::numeric::compensated_sum;
use crate::rng::CounterRng;
use crate::trace::GradientTrace;

/// Trace `g_0..g_T` whose increment matrix is `H = S + N`, with `S` of exact
/// rank `rank` and `‖N‖_F²/‖H‖_F² = noise_fraction`.
///
/// `S = U diag(s) Vᵀ` with orthonormal `U` (d×r), `V` (T×r) and singular
/// values spaced evenly from 1 down to 0.8. `N` is Gaussian, rescaled so the
/// realized noise share matches the request.
pub fn generate_planted_trace(
    dim: usize,
    increments: usize,
    rank: usize,
    noise_fraction: f64,
    seed: u64,
) -> Result<GradientTrace> {
    if rank == 0 || rank > dim.min(increments) {
        return Err(Error::Config(format!(
            "planted rank must lie in 1..={}, got {rank}",
            dim.min(increments)
        )));
    }
    if !(0.0..1.0).contains(&noise_fraction) {
        return Err(Error::Config(format!(
            "noise fraction must lie in [0, 1), got {noise_fraction}"
        )));
    }
    let mut rng = CounterRng::new(seed, 0x706c61);
    let u = loop {
        if let Ok(q) = orthonormalize(&Matrix::gaussian(dim, rank, &mut rng)) {
            break q;
        }
    };
    let v = loop {
        if let Ok(q) = orthonormalize(&Matrix::gaussian(increments, rank, &mut rng)) {
            break q;
        }
    };
    let sigma: Vec<f64> = (0..rank)
        .map(|i| {
            if rank == 1 {
                1.0
            } else {
                1.0 - 0.2 * i as f64 / (rank - 1) as f64
            }
        })
        .collect();

    let mut h = Matrix::zeros(dim, increments);
    for t in 0..increments {
        for k in 0..rank {
            let coef = sigma[k] * v[(t, k)];
            for (x, uk) in h.column_mut(t).iter_mut().zip(u.column(k)) {
                *x += coef * uk;
            }
        }
    }

    if noise_fraction > 0.0 {
        let noise = Matrix::gaussian(dim, increments, &mut rng);
        let s = h.frobenius_sq();
        let a = noise.frobenius_sq();
        let b = compensated_sum(
            h.as_slice()
                .iter()
                .zip(noise.as_slice())
                .map(|(x, y)| x * y),
        );
        // Solve c²a = ρ(s + 2cb + c²a) for the positive root.
        let rho = noise_fraction;
        let qa = a * (1.0 - rho);
        let qb = -2.0 * rho * b;
        let qc = -rho * s;
        let c = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        let data: Vec<f64> = h
            .as_slice()
            .iter()
            .zip(noise.as_slice())
            .map(|(x, y)| x + c * y)
            .collect();
        h = Matrix::from_col_major(dim, increments, data)?;
    }

    let mut values = Vec::with_capacity(dim * (increments + 1));
    let mut g = rng.normal_vec(dim);
    values.extend_from_slice(&g);
    for t in 0..increments {
        for (gi, hi) in g.iter_mut().zip(h.column(t)) {
            *gi += hi;
        }
        values.extend_from_slice(&g);
    }
    let mut trace = GradientTrace::new(dim, values)?;
    trace.insert_meta("generator", "planted");
    trace.insert_meta("rank", rank.to_string());
    trace.insert_meta("noise_fraction", noise_fraction.to_string());
    trace.insert_meta("seed", seed.to_string());
    Ok(trace)
}

/// Realized `‖N‖_F²/‖H‖_F²` for a planted trace, given the noise-free
/// increments it was built from. Used by tests only.
pub fn realized_noise_fraction(h: &Matrix, signal: &Matrix) -> f64 {
    let noise = compensated_sum(
        h.as_slice()
            .iter()
            .zip(signal.as_slice())
            .map(|(a, b)| (a - b) * (a - b)),
    );
    noise / h.frobenius_sq()
}
