//! `generate planted` and `generate logreg`.

use gradpred::harness::{generate_logreg_trace, generate_planted_trace, LogRegConfig};
use gradpred::{save_trace, Error, TraceFormat};

use crate::{CliResult, LogRegArgs, PlantedArgs};

pub fn planted(args: &PlantedArgs) -> CliResult {
    let trace =
        generate_planted_trace(args.dim, args.increments, args.rank, args.noise, args.seed)?;
    Ok(save_trace(
        &trace,
        &args.out,
        TraceFormat::from_path(&args.out),
    )?)
}

pub fn logreg(args: &LogRegArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<LogRegConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => LogRegConfig::preset(args.optimizer),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    let trace = generate_logreg_trace(&cfg)?;
    Ok(save_trace(
        &trace,
        &args.out,
        TraceFormat::from_path(&args.out),
    )?)
}
