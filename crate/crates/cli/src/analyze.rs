//! `analyze`, `spectrum` and `project`.

use std::collections::BTreeMap;

use gradpred::metrics::{min_over_families, windowed_kappa, WindowKappa};
use gradpred::projection::{load_projection, save_projection};
use gradpred::spectral::{rank_profile, WindowRank};
use gradpred::{
    apply_projection, increment_matrix, load_trace, make_projection, predictability_report,
    save_trace, singular_spectrum, validate_trace, windowed_rank, Error, TraceFormat,
};
use serde::Serialize;

use crate::output::{csv, fmt_f64, load_input, run_label, sibling, write_json, write_text};
use crate::{AnalyzeArgs, CliResult, ProjectArgs, SpectrumArgs};

#[derive(Serialize)]
struct PredictorEntry {
    run: String,
    predictor: String,
    path_length: f64,
    energy: f64,
    kappa: f64,
    alpha: Option<f64>,
    alpha_bound: Option<f64>,
    conflicts: Vec<usize>,
    bound_applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    windows: Option<Vec<WindowKappa>>,
}

#[derive(Serialize)]
struct RankEntry {
    epsilon: f64,
    rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    windows: Option<Vec<WindowRank>>,
}

#[derive(Serialize)]
struct TraceSummary {
    dim: usize,
    steps: usize,
    energy: f64,
    zero_gradient_steps: Vec<usize>,
}

#[derive(Serialize)]
struct AnalysisReport {
    run: String,
    trace: TraceSummary,
    meta: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowSpec>,
    predictors: Vec<PredictorEntry>,
    /// Smallest path-length among the requested families.
    min_over_implemented_families: Option<String>,
    increment_energy: Option<f64>,
    ranks: Vec<RankEntry>,
}

#[derive(Serialize, Clone, Copy)]
struct WindowSpec {
    length: usize,
    stride: usize,
    /// Trailing steps that do not fill a window are not reported.
    partial_tail_dropped: bool,
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult {
    if args.predictors.is_empty() {
        return Err(Error::Config("--predictors needs at least one entry".into()).into());
    }
    if let Some(e) = args.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {e}")).into());
    }
    let trace = load_input(&args.input)?;
    let run = run_label(args.run.as_deref(), &trace, &args.input.trace);
    let window = match args.window {
        Some(w) => {
            let stride = args.stride.unwrap_or(w);
            if w == 0 || stride == 0 {
                return Err(Error::Config("--window and --stride must be positive".into()).into());
            }
            if w > trace.steps() {
                return Err(Error::Precondition(format!(
                    "window {w} exceeds trace length {}",
                    trace.steps()
                ))
                .into());
            }
            Some(WindowSpec {
                length: w,
                stride,
                partial_tail_dropped: (trace.steps() - w) % stride != 0,
            })
        }
        None => None,
    };

    let diag = validate_trace(&trace);
    let mut entries = Vec::with_capacity(args.predictors.len());
    let mut reports = Vec::with_capacity(args.predictors.len());
    for &cfg in &args.predictors {
        let r = predictability_report(&trace, cfg)?;
        let windows = match window {
            Some(w) => Some(windowed_kappa(&trace, cfg, w.length, w.stride)?.entries),
            None => None,
        };
        entries.push(PredictorEntry {
            run: run.clone(),
            predictor: r.predictor.clone(),
            path_length: r.path_length,
            energy: r.energy,
            kappa: r.kappa,
            alpha: r.alpha,
            alpha_bound: r.alpha_bound,
            conflicts: r.zero_grad_conflicts.clone(),
            bound_applicable: r.bound_applicable,
            windows,
        });
        reports.push(r);
    }

    // A single-step trace has no increments; its rank section stays empty.
    let (increment_energy, profile) = if trace.steps() >= 2 {
        let spec = singular_spectrum(&increment_matrix(&trace)?)?;
        (
            Some(spec.total_energy),
            Some(rank_profile(&spec, &args.epsilons)?),
        )
    } else {
        (None, None)
    };
    let mut ranks = Vec::with_capacity(args.epsilons.len());
    for (&epsilon, &rank) in profile.iter().flat_map(|p| p.epsilons.iter().zip(&p.ranks)) {
        let windows = match window {
            Some(w) if w.length >= 2 => Some(windowed_rank(&trace, w.length, w.stride, epsilon)?),
            _ => None,
        };
        ranks.push(RankEntry {
            epsilon,
            rank,
            windows,
        });
    }

    let report = AnalysisReport {
        run: run.clone(),
        trace: TraceSummary {
            dim: trace.dim(),
            steps: trace.steps(),
            energy: diag.total_energy,
            zero_gradient_steps: diag.zero_gradient_steps.clone(),
        },
        meta: trace.meta().clone(),
        window,
        predictors: entries,
        min_over_implemented_families: min_over_families(&reports).map(|r| r.predictor.clone()),
        increment_energy,
        ranks,
    };

    if let Some(path) = &args.out_json {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.out_csv {
        let mut header = vec!["run".to_string()];
        header.extend(report.predictors.iter().map(|p| p.predictor.clone()));
        let mut row = vec![run.clone()];
        row.extend(report.predictors.iter().map(|p| fmt_f64(p.kappa)));
        write_text(path, &csv(&header, &[row]))?;
    }
    let rank_path = args
        .out_rank_csv
        .clone()
        .or_else(|| args.out_csv.as_ref().map(|p| sibling(p, "rank")));
    if let Some(path) = rank_path {
        let mut header = vec!["run".to_string()];
        header.extend(args.epsilons.iter().map(|e| format!("r*({e:.2})")));
        header.push("params".into());
        let mut row = vec![run];
        match profile {
            Some(p) => row.extend(p.ranks.iter().map(usize::to_string)),
            None => row.extend(args.epsilons.iter().map(|_| String::new())),
        }
        row.push(trace.meta().get("params").cloned().unwrap_or_default());
        write_text(&path, &csv(&header, &[row]))?;
    }
    if args.out_json.is_none() && args.out_csv.is_none() {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
        println!("{text}");
    }
    Ok(())
}

pub fn spectrum(args: &SpectrumArgs) -> CliResult {
    let trace = load_input(&args.input)?;
    let spec = singular_spectrum(&increment_matrix(&trace)?)?;
    if !(spec.total_energy > 0.0) {
        return Err(Error::Undefined {
            metric: "spectrum",
            reason: "increment energy is zero (stationary trace)".into(),
        }
        .into());
    }
    let header = ["index", "sigma", "sigma_sq", "cumulative_fraction"].map(String::from);
    let rows: Vec<Vec<String>> = spec
        .singular_values
        .iter()
        .zip(&spec.cumulative_fractions)
        .enumerate()
        .map(|(i, (s, c))| {
            vec![
                (i + 1).to_string(),
                fmt_f64(*s),
                fmt_f64(s * s),
                fmt_f64(*c),
            ]
        })
        .collect();
    Ok(write_text(&args.out_csv, &csv(&header, &rows))?)
}

pub fn project(args: &ProjectArgs) -> CliResult {
    let trace = load_trace(&args.trace, TraceFormat::from_path(&args.trace))?;
    let proj = match &args.proj {
        Some(path) => load_projection(path)?,
        None => {
            let p = make_projection(trace.dim(), args.k, args.seed)?;
            if let Some(out) = &args.proj_out {
                save_projection(&p, out)?;
            }
            p
        }
    };
    let projected = apply_projection(&proj, &trace)?;
    Ok(save_trace(
        &projected,
        &args.out,
        TraceFormat::from_path(&args.out),
    )?)
}
