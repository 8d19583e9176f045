//! Path-length, predictability index and the predictor-magnitude bound.
//!
//! For a predictor `m` over a trace `g_0..g_T`:
//!
//! ```text
//! P_T(m) = Σ_t ‖g_t − m_t‖²      G_T = Σ_t ‖g_t‖²      κ_T(m) = P_T(m) / G_T
//! ```
//!
//! `κ` is only defined for `G_T > 0`; the zero predictor gives `κ = 1`. With
//! `α = sup_t ‖m_t‖/‖g_t‖` over nonzero gradients, `κ ≤ (1+α)²` as long as no
//! step has `g_t = 0` while `m_t ≠ 0`. Such steps are reported as conflicts and
//! the bound is marked inapplicable instead of being silently assumed.
//!
//! All reductions over steps use compensated summation in step order, so
//! results do not depend on how callers schedule the work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, sq_norm};
use crate::predictors::{
    residuals, run_predictor, PredictionSeries, PredictorConfig, ResidualSeries,
};
use crate::trace::{validate_trace, GradientTrace, TraceDiagnostics};

/// `P_T = Σ ‖δ_t‖²`.
pub fn path_length(res: &ResidualSeries) -> f64 {
    compensated_sum(res.per_step_sq_norms().iter().copied())
}

/// `κ_T = P_T / G_T`; undefined when the trace has no energy.
pub fn predictability_index(res: &ResidualSeries, diag: &TraceDiagnostics) -> Result<f64> {
    if !(diag.total_energy > 0.0) {
        return Err(Error::Undefined {
            metric: "predictability index",
            reason: "gradient energy G_T is zero".into(),
        });
    }
    Ok(path_length(res) / diag.total_energy)
}

/// Predictor-magnitude diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeRatio {
    /// `sup ‖m_t‖/‖g_t‖` over steps with `g_t ≠ 0`; `None` if every gradient vanishes.
    pub alpha: Option<f64>,
    /// `(1+α)²`.
    pub alpha_bound: Option<f64>,
    /// Steps with `g_t = 0` but `m_t ≠ 0`.
    pub zero_grad_conflicts: Vec<usize>,
}

impl MagnitudeRatio {
    /// Whether `κ ≤ (1+α)²` is guaranteed for this pair.
    pub fn bound_applicable(&self) -> bool {
        self.alpha.is_some() && self.zero_grad_conflicts.is_empty()
    }
}

pub fn magnitude_ratio_diagnostic(
    trace: &GradientTrace,
    pred: &PredictionSeries,
) -> Result<MagnitudeRatio> {
    if trace.dim() != pred.dim() || trace.steps() != pred.steps() {
        return Err(Error::dims(
            format!("{}x{}", trace.dim(), trace.steps()),
            format!("{}x{}", pred.dim(), pred.steps()),
        ));
    }
    let mut alpha: Option<f64> = None;
    let mut zero_grad_conflicts = Vec::new();
    for (t, (g, m)) in trace.columns().zip(pred.columns()).enumerate() {
        let g_sq = sq_norm(g);
        let m_sq = sq_norm(m);
        if g_sq == 0.0 {
            if m_sq != 0.0 {
                zero_grad_conflicts.push(t);
            }
            continue;
        }
        let ratio = (m_sq / g_sq).sqrt();
        alpha = Some(alpha.map_or(ratio, |a| a.max(ratio)));
    }
    Ok(MagnitudeRatio {
        alpha,
        alpha_bound: alpha.map(|a| (1.0 + a) * (1.0 + a)),
        zero_grad_conflicts,
    })
}

/// Global predictability summary for one predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityReport {
    /// Predictor label; fixtures without a family carry their own name.
    pub predictor: String,
    pub path_length: f64,
    pub energy: f64,
    pub kappa: f64,
    pub alpha: Option<f64>,
    pub alpha_bound: Option<f64>,
    #[serde(rename = "conflicts")]
    pub zero_grad_conflicts: Vec<usize>,
    pub bound_applicable: bool,
}

pub fn predictability_report(
    trace: &GradientTrace,
    config: PredictorConfig,
) -> Result<PredictabilityReport> {
    let pred = run_predictor(trace, config)?;
    report_for_predictions(trace, &pred, &config.to_string())
}

/// Report for an arbitrary prediction series, e.g. a fixture.
pub fn report_for_predictions(
    trace: &GradientTrace,
    pred: &PredictionSeries,
    label: &str,
) -> Result<PredictabilityReport> {
    let diag = validate_trace(trace);
    let res = residuals(trace, pred)?;
    let kappa = predictability_index(&res, &diag)?;
    let mag = magnitude_ratio_diagnostic(trace, pred)?;
    Ok(PredictabilityReport {
        predictor: label.to_string(),
        path_length: path_length(&res),
        energy: diag.total_energy,
        kappa,
        bound_applicable: mag.bound_applicable(),
        alpha: mag.alpha,
        alpha_bound: mag.alpha_bound,
        zero_grad_conflicts: mag.zero_grad_conflicts,
    })
}

/// The smallest path-length among the given reports. This is a minimum over
/// the implemented families, not an optimum over a general predictor class.
pub fn min_over_families(reports: &[PredictabilityReport]) -> Option<&PredictabilityReport> {
    reports
        .iter()
        .min_by(|a, b| a.path_length.total_cmp(&b.path_length))
}

/// One window `[start, end)` of a windowed metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowKappa {
    pub start: usize,
    pub end: usize,
    /// `None` when the window holds no gradient energy.
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedKappaSeries {
    pub window: usize,
    pub stride: usize,
    pub entries: Vec<WindowKappa>,
}

/// Window starts `0, stride, 2·stride, ...` for full windows of length `window`.
/// A trailing partial window is dropped.
pub fn window_starts(steps: usize, window: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..)
        .map(move |i| i * stride)
        .take_while(move |&s| s + window <= steps)
}

/// Windowed `κ`: the predictor runs once over the whole trace and each window
/// sums its own residual and gradient energies.
pub fn windowed_kappa(
    trace: &GradientTrace,
    config: PredictorConfig,
    window: usize,
    stride: usize,
) -> Result<WindowedKappaSeries> {
    if window == 0 || stride == 0 {
        return Err(Error::Precondition(
            "window and stride must be positive".into(),
        ));
    }
    if window > trace.steps() {
        return Err(Error::Precondition(format!(
            "window {window} exceeds trace length {}",
            trace.steps()
        )));
    }
    let pred = run_predictor(trace, config)?;
    let res = residuals(trace, &pred)?;
    let res_sq = res.per_step_sq_norms();
    let g_sq: Vec<f64> = trace.columns().map(sq_norm).collect();
    let entries = window_starts(trace.steps(), window, stride)
        .map(|start| {
            let end = start + window;
            let p = compensated_sum(res_sq[start..end].iter().copied());
            let g = compensated_sum(g_sq[start..end].iter().copied());
            WindowKappa {
                start,
                end,
                kappa: (g > 0.0).then(|| p / g),
            }
        })
        .collect();
    Ok(WindowedKappaSeries {
        window,
        stride,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(steps: &[&[f64]]) -> GradientTrace {
        GradientTrace::from_steps(steps).unwrap()
    }

    #[test]
    fn path_length_examples() {
        let t = trace(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let zero = run_predictor(&t, PredictorConfig::Zero).unwrap();
        assert_eq!(path_length(&residuals(&t, &zero).unwrap()), 2.0);
        let peek = PredictionSeries::from_values(2, t.values().to_vec()).unwrap();
        assert_eq!(path_length(&residuals(&t, &peek).unwrap()), 0.0);
    }

    #[test]
    fn constant_trace_one_step_is_one_fifth() {
        let c = [0.3, -1.7, 2.0];
        let t = trace(&[&c, &c, &c, &c, &c]);
        let r = predictability_report(&t, PredictorConfig::OneStep).unwrap();
        assert!((r.kappa - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_energy_is_undefined() {
        let t = trace(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(
            predictability_report(&t, PredictorConfig::Zero),
            Err(Error::Undefined { .. })
        ));
    }

    #[test]
    fn zero_predictor_hits_bound_with_equality() {
        let t = trace(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        let r = predictability_report(&t, PredictorConfig::Zero).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert_eq!((r.alpha, r.alpha_bound), (Some(0.0), Some(1.0)));
        assert!(r.bound_applicable);
    }

    #[test]
    fn peek_fixture() {
        let t = trace(&[&[1.0, 2.0], &[-3.0, 0.5], &[0.1, 0.1]]);
        let peek = PredictionSeries::from_values(2, t.values().to_vec()).unwrap();
        let r = report_for_predictions(&t, &peek, "peek").unwrap();
        assert_eq!(r.kappa, 0.0);
        assert_eq!((r.alpha, r.alpha_bound), (Some(1.0), Some(4.0)));
    }

    #[test]
    fn zero_gradient_conflict_is_flagged() {
        let t = trace(&[&[1.0], &[2.0], &[3.0], &[0.0], &[1.0]]);
        let r = predictability_report(&t, PredictorConfig::OneStep).unwrap();
        assert_eq!(r.zero_grad_conflicts, vec![3]);
        assert!(!r.bound_applicable);
        // one-step predicts 0 after the zero step, no conflict at t = 4.
        assert_eq!(r.alpha, Some(2.0 / 3.0));
    }

    #[test]
    fn windows_drop_partial_tail() {
        let steps: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0 + i as f64]).collect();
        let t = GradientTrace::from_steps(&steps).unwrap();
        let w = windowed_kappa(&t, PredictorConfig::Zero, 4, 3).unwrap();
        let spans: Vec<_> = w.entries.iter().map(|e| (e.start, e.end)).collect();
        assert_eq!(spans, vec![(0, 4), (3, 7), (6, 10)]);
        assert!(w.entries.iter().all(|e| e.kappa == Some(1.0)));

        let w = windowed_kappa(&t, PredictorConfig::OneStep, 10, 7).unwrap();
        let global = predictability_report(&t, PredictorConfig::OneStep).unwrap();
        assert_eq!(w.entries.len(), 1);
        assert_eq!(w.entries[0].kappa, Some(global.kappa));

        assert!(windowed_kappa(&t, PredictorConfig::Zero, 11, 1).is_err());
        assert!(windowed_kappa(&t, PredictorConfig::Zero, 2, 0).is_err());
    }

    #[test]
    fn zero_energy_window_is_flagged() {
        let t = trace(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let w = windowed_kappa(&t, PredictorConfig::OneStep, 2, 2).unwrap();
        assert_eq!(w.entries[0].kappa, None);
        assert_eq!(w.entries[1].kappa, Some(0.5));
    }

    #[test]
    fn min_family() {
        let t = trace(&[&[1.0], &[1.0], &[1.0]]);
        let reports: Vec<_> = [PredictorConfig::Zero, PredictorConfig::OneStep]
            .into_iter()
            .map(|c| predictability_report(&t, c).unwrap())
            .collect();
        assert_eq!(min_over_families(&reports).unwrap().predictor, "one-step");
    }
}
