//! Full-batch ℓ2-regularized logistic regression as a trace source.
//!
//! Data: `x_i ~ N(0, I_d)`, labels `y_i = sign⟨w*, x_i⟩ ∈ {−1, +1}` with each
//! label flipped independently with probability `label_noise`. Loss
//!
//! ```text
//! L(w) = (1/n) Σ_i log(1 + exp(−y_i ⟨w, x_i⟩)) + (λ/2) ‖w‖²
//! ∇L(w) = −(1/n) Σ_i y_i σ(−y_i ⟨w, x_i⟩) x_i + λ w
//! ```
//!
//! The logged vector at step `t` is `∇L(w_t)`, taken before the update.
//!
//! Optimizers:
//!
//! * `sgd_momentum`: `v ← μ v + g`, `w ← w − lr·v`.
//! * `adamw_like`: `m ← β₁m + (1−β₁)g`, `s ← β₂s + (1−β₂)g²`,
//!   `w ← w − lr·(m̂/(√ŝ + ε) + wd·w)` with bias-corrected `m̂, ŝ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, CompensatedSum};
use crate::rng::CounterRng;
use crate::trace::GradientTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRegOptimizer {
    SgdMomentum,
    AdamwLike,
}

impl fmt::Display for LogRegOptimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogRegOptimizer::SgdMomentum => "sgd_momentum",
            LogRegOptimizer::AdamwLike => "adamw_like",
        })
    }
}

impl FromStr for LogRegOptimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sgd_momentum" => Ok(LogRegOptimizer::SgdMomentum),
            "adamw_like" => Ok(LogRegOptimizer::AdamwLike),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Everything that determines a logistic-regression trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRegConfig {
    pub n_samples: usize,
    pub dim: usize,
    pub optimizer: LogRegOptimizer,
    pub steps: usize,
    pub seed: u64,
    pub l2: f64,
    pub label_noise: f64,
    pub lr: f64,
    /// Heavy-ball coefficient (sgd_momentum).
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay (adamw_like).
    pub weight_decay: f64,
}

impl LogRegConfig {
    /// Pinned defaults per optimizer; the same values ship as JSON under
    /// `configs/`.
    pub fn preset(optimizer: LogRegOptimizer) -> Self {
        match optimizer {
            LogRegOptimizer::SgdMomentum => LogRegConfig {
                n_samples: 200,
                dim: 20,
                optimizer,
                steps: 400,
                seed: 0,
                l2: 1e-2,
                label_noise: 0.1,
                lr: 8.0,
                momentum: 0.9,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
            LogRegOptimizer::AdamwLike => LogRegConfig {
                n_samples: 200,
                dim: 20,
                optimizer,
                steps: 400,
                seed: 0,
                l2: 1e-2,
                label_noise: 0.1,
                lr: 1.0,
                momentum: 0.0,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 1e-2,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.dim == 0 {
            return Err(Error::Config("n_samples and dim must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("a trace needs at least one step".into()));
        }
        let finite = [
            self.l2,
            self.label_noise,
            self.lr,
            self.momentum,
            self.beta1,
            self.beta2,
            self.eps,
            self.weight_decay,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("hyperparameters must be finite".into()));
        }
        if self.l2 < 0.0 || self.lr <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "need l2 ≥ 0, lr > 0, weight_decay ≥ 0".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::Config("label_noise must lie in [0, 0.5]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(Error::Config(
                "momentum and betas must lie in [0, 1)".into(),
            ));
        }
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

struct Dataset {
    dim: usize,
    /// Row `i` is `y_i x_i`.
    signed: Vec<f64>,
}

impl Dataset {
    fn synthesize(cfg: &LogRegConfig) -> Self {
        let mut rng = CounterRng::new(cfg.seed, 0x6c6f67);
        let w_star = rng.normal_vec(cfg.dim);
        let mut signed = Vec::with_capacity(cfg.n_samples * cfg.dim);
        for _ in 0..cfg.n_samples {
            let x = rng.normal_vec(cfg.dim);
            let mut y = if dot(&w_star, &x) >= 0.0 { 1.0 } else { -1.0 };
            if rng.next_f64() < cfg.label_noise {
                y = -y;
            }
            signed.extend(x.iter().map(|v| y * v));
        }
        Self {
            dim: cfg.dim,
            signed,
        }
    }

    fn loss_and_gradient(&self, w: &[f64], l2: f64) -> (f64, Vec<f64>) {
        let n = self.signed.len() / self.dim;
        let mut grad = vec![0.0; self.dim];
        let mut loss = CompensatedSum::new();
        for row in self.signed.chunks_exact(self.dim) {
            let z = dot(row, w);
            // log(1 + e^{−z}) and σ(−z), both overflow-safe.
            let (l, s) = if z >= 0.0 {
                let e = (-z).exp();
                (e.ln_1p(), e / (1.0 + e))
            } else {
                let e = z.exp();
                (-z + e.ln_1p(), 1.0 / (1.0 + e))
            };
            loss.add(l);
            for (gi, xi) in grad.iter_mut().zip(row) {
                *gi -= s * xi;
            }
        }
        let inv_n = 1.0 / n as f64;
        for (gi, wi) in grad.iter_mut().zip(w) {
            *gi = *gi * inv_n + l2 * wi;
        }
        let reg = 0.5 * l2 * dot(w, w);
        (loss.value() * inv_n + reg, grad)
    }
}

/// Train and log `cfg.steps` full-batch gradients.
pub fn generate_logreg_trace(cfg: &LogRegConfig) -> Result<GradientTrace> {
    cfg.validate()?;
    let data = Dataset::synthesize(cfg);
    let d = cfg.dim;
    let mut w = vec![0.0; d];
    let mut first = vec![0.0; d];
    let mut second = vec![0.0; d];
    let mut values = Vec::with_capacity(d * cfg.steps);
    for t in 0..cfg.steps {
        let (loss, g) = data.loss_and_gradient(&w, cfg.l2);
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: t,
                what: format!("non-finite loss {loss}"),
            });
        }
        values.extend_from_slice(&g);
        match cfg.optimizer {
            LogRegOptimizer::SgdMomentum => {
                for ((v, wi), gi) in first.iter_mut().zip(w.iter_mut()).zip(&g) {
                    *v = cfg.momentum * *v + gi;
                    *wi -= cfg.lr * *v;
                }
            }
            LogRegOptimizer::AdamwLike => {
                let k = (t + 1) as i32;
                let c1 = 1.0 - cfg.beta1.powi(k);
                let c2 = 1.0 - cfg.beta2.powi(k);
                for (((m, s), wi), gi) in first
                    .iter_mut()
                    .zip(second.iter_mut())
                    .zip(w.iter_mut())
                    .zip(&g)
                {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
                    *s = cfg.beta2 * *s + (1.0 - cfg.beta2) * gi * gi;
                    let step = (*m / c1) / ((*s / c2).sqrt() + cfg.eps);
                    *wi -= cfg.lr * (step + cfg.weight_decay * *wi);
                }
            }
        }
    }
    let mut trace = GradientTrace::new(d, values)?;
    trace.insert_meta("generator", "logreg");
    trace.insert_meta("run", format!("LogReg_{}_seed{}", cfg.optimizer, cfg.seed));
    trace.insert_meta("optimizer", cfg.optimizer.to_string());
    trace.insert_meta("params", d.to_string());
    trace.insert_meta(
        "config",
        serde_json::to_string(cfg).map_err(|e| Error::Format(e.to_string()))?,
    );
    Ok(trace)
}
