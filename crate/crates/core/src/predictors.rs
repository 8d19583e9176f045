//! History-based gradient predictors.
//!
//! Every family is realized as an [`OnlinePredictor`]: it exposes the current
//! prediction `m_t` and only advances after `g_t` has been observed, so a
//! prediction can never depend on the gradient it predicts. Batch evaluation
//! over a stored trace and the online testbeds share that one code path.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::sq_dist;
use crate::trace::GradientTrace;

/// Default extrapolation gain of the trend predictor.
pub const DEFAULT_TREND_GAMMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PredictorConfig {
    /// `m_t = 0`.
    Zero,
    /// `m_t = g_{t-1}`, `m_0 = 0`.
    OneStep,
    /// `m_t = β m_{t-1} + (1-β) g_{t-1}`, `m_0 = 0`.
    Ema { beta: f64 },
    /// `m_t = g_{t-1} + γ (g_{t-1} - g_{t-2})`, `m_0 = 0`, `m_1 = g_0`.
    Trend { gamma: f64 },
}

impl PredictorConfig {
    pub fn ema(beta: f64) -> Result<Self> {
        let cfg = PredictorConfig::Ema { beta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn trend(gamma: f64) -> Result<Self> {
        let cfg = PredictorConfig::Trend { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PredictorConfig::Ema { beta } if !(beta > 0.0 && beta < 1.0) => Err(Error::Config(
                format!("ema beta must lie in (0, 1), got {beta}"),
            )),
            PredictorConfig::Trend { gamma } if !gamma.is_finite() => Err(Error::Config(format!(
                "trend gamma must be finite, got {gamma}"
            ))),
            _ => Ok(()),
        }
    }

    /// Column label used in predictability tables (`one-step`, `ema-0.9`, ...).
    pub fn label(&self) -> String {
        match *self {
            PredictorConfig::Zero => "zero".into(),
            PredictorConfig::OneStep => "one-step".into(),
            PredictorConfig::Ema { beta } => format!("ema-{beta}"),
            PredictorConfig::Trend { gamma } if gamma == DEFAULT_TREND_GAMMA => "trend".into(),
            PredictorConfig::Trend { gamma } => format!("trend-{gamma}"),
        }
    }

    /// The four families reported side by side in predictability tables.
    pub fn table_defaults() -> Vec<PredictorConfig> {
        vec![
            PredictorConfig::OneStep,
            PredictorConfig::Ema { beta: 0.9 },
            PredictorConfig::Ema { beta: 0.99 },
            PredictorConfig::Trend {
                gamma: DEFAULT_TREND_GAMMA,
            },
        ]
    }
}

impl fmt::Display for PredictorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PredictorConfig::Zero => write!(f, "zero"),
            PredictorConfig::OneStep => write!(f, "one-step"),
            PredictorConfig::Ema { beta } => write!(f, "ema:{beta}"),
            PredictorConfig::Trend { gamma } => write!(f, "trend:{gamma}"),
        }
    }
}

impl FromStr for PredictorConfig {
    type Err = Error;

    /// Accepts `zero`, `one-step`, `ema:<beta>`, `trend` and `trend:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, param) = match s.split_once(':') {
            Some((f, p)) => (f, Some(p)),
            None => (s, None),
        };
        let parse_param = |p: &str| -> Result<f64> {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad predictor parameter {p:?} in {s:?}")))
        };
        let cfg = match (family.to_ascii_lowercase().as_str(), param) {
            ("zero", None) => PredictorConfig::Zero,
            ("one-step" | "one_step" | "onestep", None) => PredictorConfig::OneStep,
            ("ema", Some(p)) => PredictorConfig::Ema {
                beta: parse_param(p)?,
            },
            ("ema", None) => {
                return Err(Error::Config("ema needs a beta, e.g. ema:0.9".into()));
            }
            ("trend", None) => PredictorConfig::Trend {
                gamma: DEFAULT_TREND_GAMMA,
            },
            ("trend", Some(p)) => PredictorConfig::Trend {
                gamma: parse_param(p)?,
            },
            _ => return Err(Error::Config(format!("unknown predictor {s:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Serialize for PredictorConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PredictorConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Predictor state advanced one observed gradient at a time.
#[derive(Clone, Debug)]
pub struct OnlinePredictor {
    config: PredictorConfig,
    prediction: Vec<f64>,
    last: Vec<f64>,
    observed: usize,
}

impl OnlinePredictor {
    pub fn new(config: PredictorConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            prediction: vec![0.0; dim],
            last: vec![0.0; dim],
            observed: 0,
        })
    }

    pub fn config(&self) -> PredictorConfig {
        self.config
    }

    /// Number of gradients observed so far; the current prediction is `m_{observed}`.
    pub fn observed(&self) -> usize {
        self.observed
    }

    /// The current prediction `m_t`.
    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    /// Reveal `g_t` and advance to `m_{t+1}`.
    pub fn observe(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.prediction.len());
        match self.config {
            PredictorConfig::Zero => {}
            PredictorConfig::OneStep => self.prediction.copy_from_slice(g),
            PredictorConfig::Ema { beta } => {
                for (m, gi) in self.prediction.iter_mut().zip(g) {
                    *m = beta * *m + (1.0 - beta) * gi;
                }
            }
            PredictorConfig::Trend { gamma } => {
                if self.observed == 0 {
                    self.prediction.copy_from_slice(g);
                } else {
                    for ((m, gi), prev) in self.prediction.iter_mut().zip(g).zip(&self.last) {
                        *m = gi + gamma * (gi - prev);
                    }
                }
                self.last.copy_from_slice(g);
            }
        }
        self.observed += 1;
    }
}

/// Predictions `m_0..m_T` aligned with a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSeries {
    dim: usize,
    steps: usize,
    values: Vec<f64>,
    config: Option<PredictorConfig>,
}

impl PredictionSeries {
    /// Wrap externally supplied predictions (test fixtures, foreign tools).
    /// These carry no history-based guarantee.
    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::dims(
                format!("a positive multiple of dim={dim}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(Self {
            dim,
            steps: values.len() / dim,
            values,
            config: None,
        })
    }

    pub fn config(&self) -> Option<PredictorConfig> {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `m_t`.
    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }
}

pub fn run_predictor(trace: &GradientTrace, config: PredictorConfig) -> Result<PredictionSeries> {
    let dim = trace.dim();
    let mut state = OnlinePredictor::new(config, dim)?;
    let mut values = Vec::with_capacity(trace.values().len());
    for g in trace.columns() {
        values.extend_from_slice(state.prediction());
        state.observe(g);
    }
    Ok(PredictionSeries {
        dim,
        steps: trace.steps(),
        values,
        config: Some(config),
    })
}

/// Prediction errors `δ_t = g_t − m_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSeries {
    dim: usize,
    values: Vec<f64>,
    per_step_sq_norms: Vec<f64>,
}

impl ResidualSeries {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.per_step_sq_norms.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `δ_t`.
    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// `‖δ_t‖²` for every step.
    pub fn per_step_sq_norms(&self) -> &[f64] {
        &self.per_step_sq_norms
    }
}

pub fn residuals(trace: &GradientTrace, predictions: &PredictionSeries) -> Result<ResidualSeries> {
    if trace.dim() != predictions.dim() || trace.steps() != predictions.steps() {
        return Err(Error::dims(
            format!("{}x{}", trace.dim(), trace.steps()),
            format!("{}x{}", predictions.dim(), predictions.steps()),
        ));
    }
    let values = trace
        .values()
        .iter()
        .zip(predictions.values())
        .map(|(g, m)| g - m)
        .collect();
    let per_step_sq_norms = trace
        .columns()
        .zip(predictions.columns())
        .map(|(g, m)| sq_dist(g, m))
        .collect();
    Ok(ResidualSeries {
        dim: trace.dim(),
        values,
        per_step_sq_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(steps: &[&[f64]]) -> GradientTrace {
        GradientTrace::from_steps(steps).unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(
            "zero".parse::<PredictorConfig>().unwrap(),
            PredictorConfig::Zero
        );
        assert_eq!(
            "one-step".parse::<PredictorConfig>().unwrap(),
            PredictorConfig::OneStep
        );
        assert_eq!(
            "ema:0.99".parse::<PredictorConfig>().unwrap(),
            PredictorConfig::Ema { beta: 0.99 }
        );
        assert_eq!(
            "trend:1.0".parse::<PredictorConfig>().unwrap(),
            PredictorConfig::Trend { gamma: 1.0 }
        );
        assert_eq!(
            "trend".parse::<PredictorConfig>().unwrap(),
            PredictorConfig::Trend { gamma: 1.0 }
        );
        for bad in [
            "ema",
            "ema:1.0",
            "ema:0",
            "ema:-0.5",
            "trend:nan",
            "foo",
            "ema:x",
        ] {
            assert!(bad.parse::<PredictorConfig>().is_err(), "{bad}");
        }
        let cfg = PredictorConfig::Ema { beta: 0.9 };
        assert_eq!(cfg.to_string().parse::<PredictorConfig>().unwrap(), cfg);
        assert_eq!(cfg.label(), "ema-0.9");
        assert_eq!(PredictorConfig::Trend { gamma: 1.0 }.label(), "trend");
    }

    #[test]
    fn zero_family() {
        let t = trace(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let m = run_predictor(&t, PredictorConfig::Zero).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_family() {
        let t = trace(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let m = run_predictor(&t, PredictorConfig::OneStep).unwrap();
        assert_eq!(m.values(), &[0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn ema_family() {
        let t = trace(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let m = run_predictor(&t, PredictorConfig::Ema { beta: 0.9 }).unwrap();
        assert_eq!(m.column(0), &[0.0, 0.0]);
        assert!((m.column(1)[0] - 0.1).abs() < 1e-15);
        assert_eq!(m.column(1)[1], 0.0);
    }

    #[test]
    fn trend_family() {
        let (a, b, c) = ([1.0, -2.0], [0.5, 3.0], [7.0, 7.0]);
        let t = trace(&[&a, &b, &c]);
        let m = run_predictor(&t, PredictorConfig::Trend { gamma: 1.0 }).unwrap();
        assert_eq!(m.column(0), &[0.0, 0.0]);
        assert_eq!(m.column(1), &a);
        assert_eq!(m.column(2), &[2.0 * b[0] - a[0], 2.0 * b[1] - a[1]]);
    }

    #[test]
    fn residual_examples() {
        let t = trace(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let zero = run_predictor(&t, PredictorConfig::Zero).unwrap();
        let r = residuals(&t, &zero).unwrap();
        assert_eq!(r.values(), t.values());
        assert_eq!(r.per_step_sq_norms(), &[5.0, 25.0]);

        let peek = PredictionSeries::from_values(2, t.values().to_vec()).unwrap();
        let r = residuals(&t, &peek).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));

        let short = PredictionSeries::from_values(2, vec![0.0; 2]).unwrap();
        assert!(matches!(
            residuals(&t, &short),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn online_state_reports_position() {
        let mut p = OnlinePredictor::new(PredictorConfig::OneStep, 1).unwrap();
        assert_eq!(p.observed(), 0);
        p.observe(&[2.0]);
        assert_eq!((p.observed(), p.prediction()), (1, &[2.0][..]));
        assert!(OnlinePredictor::new(PredictorConfig::Ema { beta: 1.5 }, 1).is_err());
    }
}
