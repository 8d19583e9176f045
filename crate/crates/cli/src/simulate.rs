//! `simulate omd` and `simulate proxy-gd`.
//!
//! Runs that diverge are listed in the report and make the command exit with
//! the numerical-failure status after the report is written.

use gradpred::harness::{
    descent_check, initial_point, run_omd, run_proxy_gd, tune_eta, ObjectiveFamily, OmdReport,
    OnlineLinearProblem, ProxyGdReport, SmoothObjective,
};
use gradpred::{Error, Result};
use serde::Serialize;

use crate::output::{sweep, write_json};
use crate::{CliError, CliResult, OmdArgs, ProxyGdArgs};

#[derive(Serialize)]
struct Failure {
    seed: u64,
    predictor: String,
    error: String,
}

#[derive(Serialize)]
struct Summary {
    runs: usize,
    satisfied: usize,
    failed: usize,
}

#[derive(Serialize)]
struct SweepReport<R> {
    summary: Summary,
    runs: Vec<R>,
    failures: Vec<Failure>,
}

#[derive(Serialize)]
struct OmdEntry {
    seed: u64,
    /// `tuned`, `fixed` or `fallback`.
    eta_source: &'static str,
    max_grad_norm: f64,
    #[serde(flatten)]
    report: OmdReport,
}

#[derive(Serialize)]
struct ProxyGdEntry {
    seed: u64,
    smoothness: f64,
    #[serde(flatten)]
    report: ProxyGdReport,
}

fn finish<R: Serialize>(
    runs: Vec<R>,
    failures: Vec<Failure>,
    satisfied: usize,
    out: Option<&std::path::Path>,
) -> CliResult {
    let report = SweepReport {
        summary: Summary {
            runs: runs.len() + failures.len(),
            satisfied,
            failed: failures.len(),
        },
        runs,
        failures,
    };
    match out {
        Some(path) => write_json(path, &report)?,
        None => {
            let text =
                serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
            println!("{text}");
        }
    }
    match report.failures.first() {
        Some(f) => Err(CliError {
            code: 4,
            message: format!(
                "{} of {} runs failed numerically; first: seed {} {}: {}",
                report.summary.failed, report.summary.runs, f.seed, f.predictor, f.error
            ),
        }),
        None => Ok(()),
    }
}

/// Numerical failures are collected; anything else aborts the sweep.
fn split<T>(r: Result<T>) -> Result<std::result::Result<T, Error>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.exit_code() == 4 => Ok(Err(e)),
        Err(e) => Err(e),
    }
}

pub fn omd(args: &OmdArgs) -> CliResult {
    if args.predictors.is_empty() {
        return Err(Error::Config("--predictors needs at least one entry".into()).into());
    }
    if let Some(eta) = args.eta {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("--eta must be positive, got {eta}")).into());
        }
    }
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut satisfied = 0;
    let per_seed = sweep(args.sweep.seed, args.sweep.seeds, |seed| {
        let problem =
            OnlineLinearProblem::generate(args.losses, args.dim, args.horizon, args.radius, seed)?;
        let mut out = Vec::with_capacity(args.predictors.len());
        for &cfg in &args.predictors {
            let (eta, eta_source) = match args.eta {
                Some(eta) => (eta, "fixed"),
                None => match tune_eta(problem.residual_energy(cfg)?, problem.d_phi()) {
                    Ok(eta) => (eta, "tuned"),
                    Err(Error::Undefined { .. }) => (args.fallback_eta, "fallback"),
                    Err(e) => return Err(e),
                },
            };
            let run = split(run_omd(&problem, cfg, eta, args.variant))?.map(|run| OmdEntry {
                seed,
                eta_source,
                max_grad_norm: run.max_grad_norm,
                report: run.report(&problem.label()),
            });
            out.push((seed, cfg, run));
        }
        Ok(out)
    })?;
    for (seed, cfg, run) in per_seed.into_iter().flatten() {
        match run {
            Ok(entry) => {
                satisfied += usize::from(entry.report.satisfied);
                runs.push(entry);
            }
            Err(e) => failures.push(Failure {
                seed,
                predictor: cfg.to_string(),
                error: e.to_string(),
            }),
        }
    }
    finish(runs, failures, satisfied, args.out_json.as_deref())
}

fn objective_family(name: &str, c: f64) -> Result<ObjectiveFamily> {
    match name {
        "quadratic" => Ok(ObjectiveFamily::Quadratic),
        "quad-plus-cos" | "quad_plus_cos" => Ok(ObjectiveFamily::QuadPlusCos { c }),
        other => Err(Error::Config(format!(
            "unknown objective {other:?}; expected quadratic or quad-plus-cos"
        ))),
    }
}

pub fn proxy_gd(args: &ProxyGdArgs) -> CliResult {
    if args.predictors.is_empty() {
        return Err(Error::Config("--predictors needs at least one entry".into()).into());
    }
    let family = objective_family(&args.objective, args.c)?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut satisfied = 0;
    let per_seed = sweep(args.sweep.seed, args.sweep.seeds, |seed| {
        let objective = SmoothObjective::generate(family, args.dim, seed)?;
        let eta = args.eta.unwrap_or(1.0 / objective.smoothness);
        let theta0 = initial_point(args.dim, seed);
        let mut out = Vec::with_capacity(args.predictors.len());
        for &cfg in &args.predictors {
            let run =
                split(run_proxy_gd(&objective, cfg, eta, args.horizon, &theta0))?.map(|run| {
                    let mut report = run.report(&family.to_string());
                    report.descent_violations = descent_check(&run).violations;
                    ProxyGdEntry {
                        seed,
                        smoothness: objective.smoothness,
                        report,
                    }
                });
            out.push((seed, cfg, run));
        }
        Ok(out)
    })?;
    for (seed, cfg, run) in per_seed.into_iter().flatten() {
        match run {
            Ok(entry) => {
                satisfied += usize::from(entry.report.satisfied);
                runs.push(entry);
            }
            Err(e) => failures.push(Failure {
                seed,
                predictor: cfg.to_string(),
                error: e.to_string(),
            }),
        }
    }
    finish(runs, failures, satisfied, args.out_json.as_deref())
}
