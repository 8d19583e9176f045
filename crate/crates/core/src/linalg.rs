//! Dense column-major matrices, one-sided Jacobi SVD and power iteration.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::rng::CounterRng;

/// Sweep cap for the Jacobi SVD.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wrap column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{rows}x{cols} = {} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{rows}x{cols} = {} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = data[i * cols + j];
            }
        }
        Ok(m)
    }

    /// Matrix with i.i.d. standard normal entries.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut CounterRng) -> Self {
        Self {
            rows,
            cols,
            data: rng.normal_vec(rows * cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.rows.max(1))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `‖A‖_F²`, compensated.
    pub fn frobenius_sq(&self) -> f64 {
        compensated_sum(self.data.iter().map(|x| x * x))
    }

    /// `self · other` through a cache-blocked GEMM kernel.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                format!("inner dimension {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        if self.rows == 0 || other.cols == 0 || self.cols == 0 {
            return Ok(out);
        }
        // SAFETY: all three buffers are column-major with the given shapes and
        // strides, and `out` does not alias the inputs.
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                other.cols,
                1.0,
                self.data.as_ptr(),
                1,
                self.rows as isize,
                other.data.as_ptr(),
                1,
                other.rows as isize,
                0.0,
                out.data.as_mut_ptr(),
                1,
                out.rows as isize,
            );
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (col, xj) in self.columns().zip(x) {
            for (yi, aij) in y.iter_mut().zip(col) {
                *yi += aij * xj;
            }
        }
        y
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

#[inline]
fn dot_plain(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Thin singular value decomposition `A = U Σ Vᵀ` with `min(m, n)` triplets,
/// singular values nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
    pub sweeps: usize,
}

impl Svd {
    /// `Σ_{i<r} σ_i u_i v_iᵀ`.
    pub fn reconstruct(&self, r: usize) -> Matrix {
        let r = r.min(self.singular_values.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(m, n);
        for k in 0..r {
            let s = self.singular_values[k];
            let uk = self.u.column(k);
            let vk = self.v.column(k);
            for j in 0..n {
                let coef = s * vk[j];
                if coef != 0.0 {
                    for (o, ui) in out.column_mut(j).iter_mut().zip(uk) {
                        *o += coef * ui;
                    }
                }
            }
        }
        out
    }
}

/// One-sided (Hestenes) Jacobi SVD. Deterministic for a given input: pairs are
/// visited in a fixed cyclic order and no randomness is involved.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Precondition("SVD of an empty matrix".into()));
    }
    if a.cols() <= a.rows() {
        one_sided_jacobi(a)
    } else {
        let t = one_sided_jacobi(&a.transpose())?;
        Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
            sweeps: t.sweeps,
        })
    }
}

/// Requires `cols ≤ rows`.
fn one_sided_jacobi(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = f64::EPSILON * m as f64;
    let mut sq: Vec<f64> = w.columns().map(|c| dot_plain(c, c)).collect();
    let mut sweeps = 0;
    let mut converged = false;
    let mut worst = 0.0f64;
    while sweeps < MAX_JACOBI_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        worst = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = sq[p];
                let beta = sq[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot_plain(w.column(p), w.column(q));
                let ratio = gamma.abs() / (alpha * beta).sqrt();
                if ratio <= tol {
                    continue;
                }
                worst = worst.max(ratio);
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, p, q, c, s, m);
                rotate(&mut v, p, q, c, s, n);
                sq[p] = dot_plain(w.column(p), w.column(p));
                sq[q] = dot_plain(w.column(q), w.column(q));
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            sweeps,
            residual: worst,
        });
    }

    let norms: Vec<f64> = w.columns().map(|c| dot_plain(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > 0.0 {
            for (o, x) in u.column_mut(k).iter_mut().zip(w.column(j)) {
                *o = x / s;
            }
        }
        vs.column_mut(k).copy_from_slice(v.column(j));
    }
    Ok(Svd {
        u,
        singular_values,
        v: vs,
        sweeps,
    })
}

fn rotate(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64, len: usize) {
    let data = &mut m.data;
    let (head, tail) = data.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Result of [`power_iteration`].
#[derive(Clone, Copy, Debug)]
pub struct DominantEigen {
    pub value: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix. Stops when
/// the eigen-residual `‖Ax − ρx‖` falls to `tol·ρ`; the Rayleigh quotient `ρ`
/// is then accurate to second order in that residual.
pub fn power_iteration(a: &Matrix, tol: f64, max_iter: usize) -> Result<DominantEigen> {
    if a.rows() != a.cols() || a.rows() == 0 {
        return Err(Error::Precondition(
            "power iteration needs a nonempty square matrix".into(),
        ));
    }
    let n = a.rows();
    let mut rng = CounterRng::new(0x005e_ed0f_e16e, 0);
    let mut x = rng.normal_vec(n);
    let nx = dot_plain(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = a.matvec(&x);
        let rho = dot_plain(&x, &y);
        let ny = dot_plain(&y, &y).sqrt();
        if ny == 0.0 {
            return Ok(DominantEigen {
                value: 0.0,
                iterations: it,
            });
        }
        residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - rho * xi) * (yi - rho * xi))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * rho.abs() {
            return Ok(DominantEigen {
                value: rho,
                iterations: it,
            });
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Err(Error::NonConvergence {
        sweeps: max_iter,
        residual,
    })
}

/// Orthonormalize the columns of `a` in place order (modified Gram–Schmidt,
/// two passes). Fails on numerically dependent columns.
pub fn orthonormalize(a: &Matrix) -> Result<Matrix> {
    let mut q = a.clone();
    for j in 0..q.cols() {
        for _pass in 0..2 {
            for i in 0..j {
                let (head, tail) = q.data.split_at_mut(j * q.rows);
                let qi = &head[i * q.rows..(i + 1) * q.rows];
                let qj = &mut tail[..q.rows];
                let proj = dot_plain(qi, qj);
                for (x, y) in qj.iter_mut().zip(qi) {
                    *x -= proj * y;
                }
            }
        }
        let col = q.column_mut(j);
        let nrm = dot_plain(col, col).sqrt();
        if !(nrm > 1e-12) {
            return Err(Error::Precondition(format!(
                "column {j} is linearly dependent"
            )));
        }
        col.iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(q)
}

/// Random `n×n` orthogonal matrix.
pub fn random_orthogonal(n: usize, rng: &mut CounterRng) -> Matrix {
    loop {
        if let Ok(q) = orthonormalize(&Matrix::gaussian(n, n, rng)) {
            return q;
        }
    }
}
