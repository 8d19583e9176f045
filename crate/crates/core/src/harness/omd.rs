//! Optimistic mirror descent on online linear losses over a Euclidean ball.
//!
//! With the mirror map `Φ = ½‖·‖²` the Bregman step is a projected gradient
//! step. Two variants are provided:
//!
//! * [`OmdVariant::AsWritten`]: a single sequence,
//!   `θ_{t+1} = Π(θ_t − η m_t)`, playing `θ_t`.
//! * [`OmdVariant::TwoStep`]: the predictable-sequences scheme. A secondary
//!   point `h_t` only moves with observed losses, `h_{t+1} = Π(h_t − η g_t)`,
//!   and the learner plays the optimistic point `θ_t = Π(h_t − η m_t)`.
//!
//! Both report the measured regret against the exact comparator
//! `min_{‖u‖≤ρ} ⟨Σ u_t, u⟩ = −ρ‖Σ u_t‖` and the two forms of the
//! path-length bound with `D_Φ² = 2ρ²`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, Matrix};
use crate::numeric::{dot, norm, sq_dist, CompensatedSum};
use crate::predictors::{OnlinePredictor, PredictorConfig};
use crate::rng::CounterRng;
use crate::trace::GradientTrace;

/// Angular speed of the drifting loss family, radians per round.
pub const DRIFT_OMEGA: f64 = 0.02;
/// Angular speed of the adversarial-rotation family.
pub const ADVERSARIAL_OMEGA: f64 = 2.0;
/// Offset weight keeping the drifting losses away from mean zero.
const DRIFT_OFFSET: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `u_t = u`.
    Constant,
    /// `u_t = cos(ωt) a + sin(ωt) b + ½ c` with orthonormal `a, b, c` and slow `ω`.
    Drifting,
    /// Same rotation with a fast `ω`, which defeats history-based predictors.
    AdversarialRotation,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Constant => "constant",
            LossKind::Drifting => "drifting",
            LossKind::AdversarialRotation => "adversarial-rotation",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(LossKind::Constant),
            "drifting" => Ok(LossKind::Drifting),
            "adversarial-rotation" | "adversarial" => Ok(LossKind::AdversarialRotation),
            other => Err(Error::Config(format!("unknown loss family {other:?}"))),
        }
    }
}

/// Linear losses `f_t(θ) = ⟨u_t, θ⟩` on the ball `‖θ‖ ≤ ρ`, rounds `1..=T`.
#[derive(Clone, Debug)]
pub struct OnlineLinearProblem {
    pub radius: f64,
    pub kind: Option<LossKind>,
    pub seed: u64,
    /// `u_1..u_T` stored as a trace (column `t−1` holds `u_t`).
    losses: GradientTrace,
}

impl OnlineLinearProblem {
    pub fn new(losses: GradientTrace, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            radius,
            kind: None,
            seed: 0,
            losses,
        })
    }

    pub fn generate(
        kind: LossKind,
        dim: usize,
        horizon: usize,
        radius: f64,
        seed: u64,
    ) -> Result<Self> {
        if dim < 3 && kind != LossKind::Constant {
            return Err(Error::Config("rotating loss families need dim ≥ 3".into()));
        }
        if dim == 0 || horizon == 0 {
            return Err(Error::Config("dim and horizon must be positive".into()));
        }
        let mut rng = CounterRng::new(seed, 0x6f6d64);
        let mut values = Vec::with_capacity(dim * horizon);
        match kind {
            LossKind::Constant => {
                let u = rng.normal_vec(dim);
                let n = norm(&u);
                for _ in 0..horizon {
                    values.extend(u.iter().map(|x| x / n));
                }
            }
            LossKind::Drifting | LossKind::AdversarialRotation => {
                let omega = if kind == LossKind::Drifting {
                    DRIFT_OMEGA
                } else {
                    ADVERSARIAL_OMEGA
                };
                let basis = loop {
                    if let Ok(q) = orthonormalize(&Matrix::gaussian(dim, 3, &mut rng)) {
                        break q;
                    }
                };
                let phase = rng.uniform(0.0, std::f64::consts::TAU);
                for t in 1..=horizon {
                    let angle = phase + omega * t as f64;
                    let (s, c) = angle.sin_cos();
                    for i in 0..dim {
                        values.push(
                            c * basis[(i, 0)] + s * basis[(i, 1)] + DRIFT_OFFSET * basis[(i, 2)],
                        );
                    }
                }
            }
        }
        let mut problem = Self::new(GradientTrace::new(dim, values)?, radius)?;
        problem.kind = Some(kind);
        problem.seed = seed;
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.losses.dim()
    }

    pub fn horizon(&self) -> usize {
        self.losses.steps()
    }

    pub fn losses(&self) -> &GradientTrace {
        &self.losses
    }

    /// `D_Φ` for the Euclidean map on the ball: `D_Φ² = 2ρ²`.
    pub fn d_phi(&self) -> f64 {
        SQRT_2 * self.radius
    }

    pub fn label(&self) -> String {
        match self.kind {
            Some(kind) => format!(
                "{kind}/d={}/T={}/seed={}",
                self.dim(),
                self.horizon(),
                self.seed
            ),
            None => format!("custom/d={}/T={}", self.dim(), self.horizon()),
        }
    }

    /// `Σ_{t=1}^T ‖u_t − m_t‖²` for `predictor`; the losses do not depend on
    /// the iterates, so this is known before any run.
    pub fn residual_energy(&self, predictor: PredictorConfig) -> Result<f64> {
        let mut state = OnlinePredictor::new(predictor, self.dim())?;
        let mut acc = CompensatedSum::new();
        for u in self.losses.columns() {
            acc.add(sq_dist(u, state.prediction()));
            state.observe(u);
        }
        Ok(acc.value())
    }

    /// `min_{‖θ‖≤ρ} Σ_t ⟨u_t, θ⟩ = −ρ ‖Σ_t u_t‖`.
    pub fn comparator_loss(&self) -> f64 {
        let d = self.dim();
        let total: Vec<f64> = (0..d)
            .map(|i| {
                self.losses
                    .columns()
                    .map(|u| u[i])
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect();
        -self.radius * norm(&total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmdVariant {
    AsWritten,
    TwoStep,
}

impl fmt::Display for OmdVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OmdVariant::AsWritten => "as-written",
            OmdVariant::TwoStep => "two-step",
        })
    }
}

impl FromStr for OmdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-written" | "as_written" => Ok(OmdVariant::AsWritten),
            "two-step" | "two_step" => Ok(OmdVariant::TwoStep),
            other => Err(Error::Config(format!("unknown OMD variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OmdRun {
    pub variant: OmdVariant,
    pub predictor: PredictorConfig,
    pub eta: f64,
    pub d_phi: f64,
    /// Played points `θ_1..θ_T`, step-major.
    pub iterates: Vec<f64>,
    /// `m_1..m_T`, step-major.
    pub predictions: Vec<f64>,
    /// `‖δ_t‖²` per round.
    pub residual_sq: Vec<f64>,
    pub measured_regret: f64,
    pub bound_untuned: f64,
    pub bound_tuned: f64,
    /// `max_t ‖u_t‖`, logged only.
    pub max_grad_norm: f64,
}

impl OmdRun {
    /// `Σ ‖δ_t‖²`.
    pub fn residual_energy(&self) -> f64 {
        self.residual_sq
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    /// Regret within the untuned bound, up to `1e-6·(1 + |bound|)`.
    pub fn satisfied(&self) -> bool {
        self.measured_regret <= self.bound_untuned + 1e-6 * (1.0 + self.bound_untuned.abs())
    }

    pub fn report(&self, problem: &str) -> OmdReport {
        OmdReport {
            problem: problem.to_string(),
            predictor: self.predictor.to_string(),
            eta: self.eta,
            variant: self.variant,
            regret: self.measured_regret,
            bound_untuned: self.bound_untuned,
            bound_tuned: self.bound_tuned,
            satisfied: self.satisfied(),
        }
    }
}

/// Machine-readable summary of one OMD run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmdReport {
    pub problem: String,
    pub predictor: String,
    pub eta: f64,
    pub variant: OmdVariant,
    pub regret: f64,
    pub bound_untuned: f64,
    pub bound_tuned: f64,
    pub satisfied: bool,
}

fn project_ball(x: &mut [f64], radius: f64) {
    let n = norm(x);
    if n > radius {
        let s = radius / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

fn step_into(out: &mut [f64], from: &[f64], eta: f64, dir: &[f64], radius: f64) {
    for ((o, f), g) in out.iter_mut().zip(from).zip(dir) {
        *o = f - eta * g;
    }
    project_ball(out, radius);
}

pub fn run_omd(
    problem: &OnlineLinearProblem,
    predictor: PredictorConfig,
    eta: f64,
    variant: OmdVariant,
) -> Result<OmdRun> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "step size must be positive, got {eta}"
        )));
    }
    let d = problem.dim();
    let rho = problem.radius;
    let mut state = OnlinePredictor::new(predictor, d)?;
    let mut anchor = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut iterates = Vec::with_capacity(d * problem.horizon());
    let mut predictions = Vec::with_capacity(d * problem.horizon());
    let mut residual_sq = Vec::with_capacity(problem.horizon());
    let mut loss = CompensatedSum::new();
    let mut max_grad_norm: f64 = 0.0;

    for (t, u) in problem.losses().columns().enumerate() {
        let m = state.prediction().to_vec();
        if variant == OmdVariant::TwoStep {
            step_into(&mut theta, &anchor, eta, &m, rho);
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: t + 1,
                what: "non-finite iterate".into(),
            });
        }
        iterates.extend_from_slice(&theta);
        loss.add(dot(u, &theta));
        residual_sq.push(sq_dist(u, &m));
        max_grad_norm = max_grad_norm.max(norm(u));
        match variant {
            OmdVariant::TwoStep => {
                step_into(&mut next, &anchor, eta, u, rho);
                std::mem::swap(&mut anchor, &mut next);
            }
            OmdVariant::AsWritten => {
                step_into(&mut next, &theta, eta, &m, rho);
                std::mem::swap(&mut theta, &mut next);
            }
        }
        predictions.extend_from_slice(&m);
        state.observe(u);
    }

    let d_phi = problem.d_phi();
    let path: f64 = residual_sq
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .value();
    Ok(OmdRun {
        variant,
        predictor,
        eta,
        d_phi,
        iterates,
        predictions,
        residual_sq,
        measured_regret: loss.value() - problem.comparator_loss(),
        bound_untuned: d_phi * d_phi / eta + 0.5 * eta * path,
        bound_tuned: SQRT_2 * d_phi * path.sqrt(),
        max_grad_norm,
    })
}

/// `η = D_Φ / √S` with `S = Σ_{t=1}^T ‖u_t − m_t‖²` over the played rounds,
/// i.e. the path-length without the pre-round term. Perfect prediction
/// (`S = 0`) has no tuned step size.
pub fn tune_eta(proxy_path: f64, d_phi: f64) -> Result<f64> {
    if !(proxy_path > 0.0) {
        return Err(Error::Undefined {
            metric: "tuned step size",
            reason: format!("path-length {proxy_path} leaves no positive radicand"),
        });
    }
    if !(d_phi > 0.0) {
        return Err(Error::Config(format!(
            "D_phi must be positive, got {d_phi}"
        )));
    }
    Ok(d_phi / proxy_path.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_losses_have_zero_regret() {
        let losses = GradientTrace::new(3, vec![0.0; 30]).unwrap();
        let p = OnlineLinearProblem::new(losses, 1.0).unwrap();
        for variant in [OmdVariant::AsWritten, OmdVariant::TwoStep] {
            let run = run_omd(&p, PredictorConfig::OneStep, 0.1, variant).unwrap();
            assert_eq!(run.measured_regret, 0.0);
            assert!(run.bound_untuned >= 0.0);
            assert!(run.satisfied());
        }
    }

    #[test]
    fn constant_losses_miss_only_first_round() {
        let p = OnlineLinearProblem::generate(LossKind::Constant, 4, 50, 2.0, 3).unwrap();
        let u_sq = crate::numeric::sq_norm(p.losses().column(0));
        assert!((p.residual_energy(PredictorConfig::OneStep).unwrap() - u_sq).abs() < 1e-12);
        let eta = tune_eta(u_sq, p.d_phi()).unwrap();
        let run = run_omd(&p, PredictorConfig::OneStep, eta, OmdVariant::TwoStep).unwrap();
        assert!((run.residual_energy() - u_sq).abs() < 1e-12);
        // Comparator is −ρ·T·‖u‖.
        assert!((p.comparator_loss() + 2.0 * 50.0 * u_sq.sqrt()).abs() < 1e-9);
        assert!(run.measured_regret <= 2.0 * run.bound_tuned);
        assert!(run.satisfied());
    }

    #[test]
    fn iterates_stay_in_ball() {
        let p =
            OnlineLinearProblem::generate(LossKind::AdversarialRotation, 5, 200, 0.7, 1).unwrap();
        for variant in [OmdVariant::AsWritten, OmdVariant::TwoStep] {
            let run = run_omd(&p, PredictorConfig::Trend { gamma: 1.0 }, 5.0, variant).unwrap();
            for th in run.iterates.chunks(5) {
                assert!(norm(th) <= 0.7 + 1e-9);
            }
        }
    }

    #[test]
    fn tune_eta_examples() {
        assert_eq!(tune_eta(4.0, 1.0).unwrap(), 0.5);
        assert!(tune_eta(0.0, 1.0).is_err());
        assert!(tune_eta(-1.0, 1.0).is_err());
        assert!(tune_eta(1.0, 0.0).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "two-step".parse::<OmdVariant>().unwrap(),
            OmdVariant::TwoStep
        );
        assert_eq!(
            "as-written".parse::<OmdVariant>().unwrap(),
            OmdVariant::AsWritten
        );
        assert!("x".parse::<OmdVariant>().is_err());
        assert_eq!("drifting".parse::<LossKind>().unwrap(), LossKind::Drifting);
        assert!(run_omd(
            &OnlineLinearProblem::generate(LossKind::Constant, 2, 2, 1.0, 0).unwrap(),
            PredictorConfig::Zero,
            0.0,
            OmdVariant::TwoStep
        )
        .is_err());
    }
}
