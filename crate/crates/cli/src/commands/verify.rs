//! `pavg verify`: check the step inequality along an averaging-form
//! trajectory and emit a JSON report.

use std::path::Path;

use serde::Serialize;

use pavg::lyapunov::{check_spa_trajectory, ExpectationMode, LyapunovContext, StepCheck};
use pavg::optim::AnySchedule;
use pavg::params::Form;
use pavg::planning::eta_max_constant;

use crate::config;
use crate::errors::{CliError, CliResult};

#[derive(Serialize)]
struct Report {
    steps: usize,
    seed: u64,
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    threshold: f64,
    min_residual: f64,
    violations: usize,
    pass: bool,
    warnings: Vec<String>,
    checks: Vec<StepCheck>,
}

pub fn run(config_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let cfg = config::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let oracle = config::build_problem(&cfg.problem)?;
    let steps = cfg.verify.steps;
    let schedule = config::build_schedule(&cfg.schedule, steps, base_dir)?;
    let AnySchedule::Spa(spa) = config::schedule_for_form(&schedule, Form::Spa)? else {
        unreachable!("requested the averaging form");
    };
    let ctx = LyapunovContext::from_oracle(oracle.as_ref())?;
    let mode = match cfg.verify.mode.as_str() {
        "exact" => ExpectationMode::Exact,
        "montecarlo" => ExpectationMode::MonteCarlo {
            samples: cfg.verify.samples.unwrap_or(100_000),
            seed: cfg.verify.seed ^ 0x9e37_79b9_7f4a_7c15,
        },
        other => {
            return Err(CliError::config(format!(
                "unknown verify mode `{other}` (expected exact or montecarlo)"
            )))
        }
    };
    let x0 = cfg
        .run
        .x0
        .as_ref()
        .map(|v| v.materialize(oracle.dim()))
        .unwrap_or_else(|| vec![0.0; oracle.dim()]);

    let report = check_spa_trajectory(
        oracle.as_ref(),
        &spa,
        &x0,
        cfg.verify.seed,
        steps,
        &ctx,
        &mode,
    )?;

    let mut warnings = Vec::new();
    for (k, entry) in spa.entries().iter().enumerate().take(steps) {
        if entry.c < 1.0 {
            let cap = eta_max_constant(entry.c, ctx.lipschitz);
            if entry.eta > cap {
                warnings.push(format!(
                    "entry {k}: eta = {} exceeds the stage-wise threshold {cap} for c = {}",
                    entry.eta, entry.c
                ));
                break;
            }
        }
    }
    let positive_weights = report
        .checks
        .iter()
        .filter(|c| c.xdiff_weight > 0.0)
        .count();
    if positive_weights > 0 {
        warnings.push(format!(
            "{positive_weights} of {} steps carry a positive displacement weight \
             (the telescoped bound does not cover them)",
            report.checks.len()
        ));
    }

    let threshold = cfg.verify.threshold;
    let violations = report.violations(threshold);
    let out_report = Report {
        steps,
        seed: cfg.verify.seed,
        mode: cfg.verify.mode.clone(),
        samples: match mode {
            ExpectationMode::MonteCarlo { samples, .. } => Some(samples),
            ExpectationMode::Exact => None,
        },
        threshold,
        min_residual: report.min_residual,
        violations,
        pass: violations == 0,
        warnings,
        checks: report.checks,
    };
    let json = serde_json::to_string_pretty(&out_report).map_err(CliError::io)? + "\n";
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}
