//! Gradient descent driven by history-based proxy directions,
//! `θ_{t+1} = θ_t − η m_t`, on smooth test objectives.
//!
//! For `L`-smooth `F` and `η ≤ 1/L` every step satisfies
//! `F(θ_{t+1}) ≤ F(θ_t) − (η/2)‖g_t‖² + (η/2)‖δ_t‖²`; summing gives
//! `(1/T) Σ_{t<T} ‖g_t‖² ≤ 2(F(θ_0) − F_⋆)/(ηT) + P_{T−1}(m)/T`.
//! Runs record everything needed to check both on the logged values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, random_orthogonal, Matrix};
use crate::numeric::{sq_dist, sq_norm, CompensatedSum};
use crate::predictors::{OnlinePredictor, PredictorConfig};
use crate::rng::CounterRng;

/// Power-iteration tolerance and cap used for `λ_max(A)`.
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum ObjectiveFamily {
    /// `½ θᵀAθ`.
    Quadratic,
    /// `½ θᵀAθ + c Σ_i cos θ_i`.
    QuadPlusCos { c: f64 },
}

impl fmt::Display for ObjectiveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveFamily::Quadratic => write!(f, "quadratic"),
            ObjectiveFamily::QuadPlusCos { c } => write!(f, "quad-plus-cos(c={c})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothObjective {
    pub family: ObjectiveFamily,
    /// Positive semidefinite `A = Q Λ Qᵀ`.
    pub a: Matrix,
    /// `Λ`, kept as an oracle for `λ_max`.
    pub eigenvalues: Vec<f64>,
    /// `L`: `λ_max(A)`, plus `c` for the cosine family.
    pub smoothness: f64,
    /// A valid lower bound: 0, or `−c·d` for the cosine family.
    pub f_star: f64,
}

impl SmoothObjective {
    /// Build from a PSD matrix; `λ_max` is estimated by power iteration.
    pub fn new(family: ObjectiveFamily, a: Matrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if a.rows() != a.cols() || a.rows() == 0 {
            return Err(Error::Config(
                "objective matrix must be square and nonempty".into(),
            ));
        }
        let lam = power_iteration(&a, POWER_TOL, POWER_MAX_ITER)?.value;
        let (smoothness, f_star) = match family {
            ObjectiveFamily::Quadratic => (lam, 0.0),
            ObjectiveFamily::QuadPlusCos { c } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::Config(format!("cosine weight must be ≥ 0, got {c}")));
                }
                (lam + c, -c * a.rows() as f64)
            }
        };
        if !(smoothness > 0.0) {
            return Err(Error::Config(
                "objective has zero curvature; L must be positive".into(),
            ));
        }
        Ok(Self {
            family,
            a,
            eigenvalues,
            smoothness,
            f_star,
        })
    }

    /// Random instance: `Q` Haar-like orthogonal, spectrum uniform on
    /// `[0.01, 1]` with the top eigenvalue pinned to 1.
    pub fn generate(family: ObjectiveFamily, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("objective dimension must be positive".into()));
        }
        let mut rng = CounterRng::new(seed, 0x6f626a);
        let q = random_orthogonal(dim, &mut rng);
        let mut eigenvalues: Vec<f64> = (0..dim).map(|_| rng.uniform(0.01, 1.0)).collect();
        eigenvalues[0] = 1.0;
        let mut a = Matrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..dim {
                a[(i, j)] = (0..dim)
                    .map(|k| q[(i, k)] * eigenvalues[k] * q[(j, k)])
                    .sum();
            }
        }
        // Exact symmetry.
        for j in 0..dim {
            for i in j + 1..dim {
                let v = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        Self::new(family, a, eigenvalues)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let at = self.a.matvec(theta);
        let quad = 0.5
            * theta
                .iter()
                .zip(&at)
                .map(|(x, y)| x * y)
                .collect::<CompensatedSum>()
                .value();
        match self.family {
            ObjectiveFamily::Quadratic => quad,
            ObjectiveFamily::QuadPlusCos { c } => {
                quad + c * theta
                    .iter()
                    .map(|x| x.cos())
                    .collect::<CompensatedSum>()
                    .value()
            }
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = self.a.matvec(theta);
        if let ObjectiveFamily::QuadPlusCos { c } = self.family {
            for (gi, x) in g.iter_mut().zip(theta) {
                *gi -= c * x.sin();
            }
        }
        g
    }
}

/// Where the descent direction comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProxySource {
    /// A history-based predictor fed with the gradients seen so far.
    Predictor(PredictorConfig),
    /// The exact current gradient. Not history-based; a test fixture for
    /// plain gradient descent.
    ExactGradient,
}

impl From<PredictorConfig> for ProxySource {
    fn from(cfg: PredictorConfig) -> Self {
        ProxySource::Predictor(cfg)
    }
}

impl fmt::Display for ProxySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxySource::Predictor(cfg) => write!(f, "{cfg}"),
            ProxySource::ExactGradient => write!(f, "exact-gradient"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProxyGdRun {
    pub proxy: ProxySource,
    pub eta: f64,
    pub horizon: usize,
    pub dim: usize,
    /// `θ_0..θ_T`, step-major.
    pub iterates: Vec<f64>,
    /// `F(θ_0)..F(θ_T)`.
    pub values: Vec<f64>,
    /// `g_0..g_{T−1}`, step-major.
    pub gradients: Vec<f64>,
    /// `m_0..m_{T−1}`, step-major.
    pub proxies: Vec<f64>,
    pub f_star: f64,
    pub avg_sq_grad: f64,
    pub min_sq_grad: f64,
    /// `P_{T−1}(m) = Σ_{t<T} ‖δ_t‖²`.
    pub proxy_path: f64,
    /// `2(F(θ_0) − F_⋆)/(ηT) + P_{T−1}(m)/T`.
    pub bound: f64,
}

impl ProxyGdRun {
    pub fn satisfied(&self) -> bool {
        self.avg_sq_grad <= self.bound + 1e-9 * (1.0 + self.bound.abs())
    }

    pub fn gradient(&self, t: usize) -> &[f64] {
        &self.gradients[t * self.dim..(t + 1) * self.dim]
    }

    pub fn proxy(&self, t: usize) -> &[f64] {
        &self.proxies[t * self.dim..(t + 1) * self.dim]
    }

    pub fn report(&self, objective: &str) -> ProxyGdReport {
        ProxyGdReport {
            objective: objective.to_string(),
            predictor: self.proxy.to_string(),
            eta: self.eta,
            t: self.horizon,
            avg_sq_grad: self.avg_sq_grad,
            min_sq_grad: self.min_sq_grad,
            proxy_path: self.proxy_path,
            bound: self.bound,
            satisfied: self.satisfied(),
            descent_violations: descent_check(self).violations,
        }
    }
}

/// Machine-readable summary of one proxy-GD run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyGdReport {
    pub objective: String,
    pub predictor: String,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub avg_sq_grad: f64,
    pub min_sq_grad: f64,
    pub proxy_path: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub descent_violations: usize,
}

/// Seeded starting point `θ_0 ~ N(0, 9·I)`.
pub fn initial_point(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed, 0x746830);
    rng.normal_vec(dim).into_iter().map(|x| 3.0 * x).collect()
}

pub fn run_proxy_gd(
    objective: &SmoothObjective,
    proxy: impl Into<ProxySource>,
    eta: f64,
    horizon: usize,
    theta0: &[f64],
) -> Result<ProxyGdRun> {
    let proxy = proxy.into();
    let d = objective.dim();
    if theta0.len() != d {
        return Err(Error::dims(format!("theta0 of length {d}"), theta0.len()));
    }
    if !(eta > 0.0) {
        return Err(Error::Config(format!(
            "step size must be positive, got {eta}"
        )));
    }
    if eta > 1.0 / objective.smoothness {
        return Err(Error::Precondition(format!(
            "step size {eta} exceeds 1/L = {}",
            1.0 / objective.smoothness
        )));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let mut state = match proxy {
        ProxySource::Predictor(cfg) => Some(OnlinePredictor::new(cfg, d)?),
        ProxySource::ExactGradient => None,
    };

    let mut theta = theta0.to_vec();
    let mut iterates = Vec::with_capacity(d * (horizon + 1));
    let mut values = Vec::with_capacity(horizon + 1);
    let mut gradients = Vec::with_capacity(d * horizon);
    let mut proxies = Vec::with_capacity(d * horizon);
    let mut sum_sq = CompensatedSum::new();
    let mut path = CompensatedSum::new();
    let mut min_sq_grad = f64::INFINITY;

    iterates.extend_from_slice(&theta);
    values.push(objective.value(&theta));
    for t in 0..horizon {
        let g = objective.gradient(&theta);
        let m = match &state {
            Some(s) => s.prediction().to_vec(),
            None => g.clone(),
        };
        let g_sq = sq_norm(&g);
        sum_sq.add(g_sq);
        min_sq_grad = min_sq_grad.min(g_sq);
        path.add(sq_dist(&g, &m));
        for (x, mi) in theta.iter_mut().zip(&m) {
            *x -= eta * mi;
        }
        let f = objective.value(&theta);
        if !f.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: t + 1,
                what: "non-finite iterate or objective value".into(),
            });
        }
        if let Some(s) = state.as_mut() {
            s.observe(&g);
        }
        gradients.extend_from_slice(&g);
        proxies.extend_from_slice(&m);
        iterates.extend_from_slice(&theta);
        values.push(f);
    }

    let t = horizon as f64;
    let proxy_path = path.value();
    Ok(ProxyGdRun {
        proxy,
        eta,
        horizon,
        dim: d,
        f_star: objective.f_star,
        avg_sq_grad: sum_sq.value() / t,
        min_sq_grad,
        proxy_path,
        bound: 2.0 * (values[0] - objective.f_star) / (eta * t) + proxy_path / t,
        iterates,
        values,
        gradients,
        proxies,
    })
}

/// Per-step evaluation of the one-step descent inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub steps: usize,
    /// Steps where `F(θ_{t+1})` exceeds the right-hand side by more than
    /// `1e-9·(1 + |F(θ_t)|)`.
    pub violations: usize,
    /// Steps where the inequality holds strictly.
    pub strict: usize,
    /// `max_t (F(θ_{t+1}) − RHS_t)`.
    pub max_excess: f64,
}

pub fn descent_check(run: &ProxyGdRun) -> DescentReport {
    let mut report = DescentReport {
        steps: run.horizon,
        violations: 0,
        strict: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for t in 0..run.horizon {
        let g = run.gradient(t);
        let delta_sq = sq_dist(g, run.proxy(t));
        let rhs = run.values[t] - 0.5 * run.eta * sq_norm(g) + 0.5 * run.eta * delta_sq;
        let excess = run.values[t + 1] - rhs;
        report.max_excess = report.max_excess.max(excess);
        if excess > 1e-9 * (1.0 + run.values[t].abs()) {
            report.violations += 1;
        }
        if excess < 0.0 {
            report.strict += 1;
        }
    }
    report
}
