//! `pavg plan`: build a stage-wise schedule and report per-drop stability.

use std::path::PathBuf;

use serde::Serialize;

use pavg::optim::AnySchedule;
use pavg::params::{SgdmParams, SpaParams};
use pavg::planning::{max_anneal_ratio, stepwise_schedule, DropSpec, StepwiseMode};

use crate::errors::{CliError, CliResult};
use crate::schedfile;

pub struct PlanArgs {
    pub eta: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub steps: usize,
    pub drops: Vec<String>,
    pub mode: String,
    pub factor: f64,
    pub lipschitz: Option<f64>,
    pub output: PathBuf,
    pub sidecar: Option<PathBuf>,
}

#[derive(Serialize)]
struct Sidecar {
    mode: String,
    base_eta: f64,
    base_c: f64,
    steps: usize,
    per_step_factor: Option<f64>,
    lipschitz: Option<f64>,
    drops: Vec<DropReport>,
}

#[derive(Serialize)]
struct DropReport {
    step: usize,
    factor: f64,
    /// Ratio the plan actually applies per step at this drop.
    realized_per_step_ratio: f64,
    /// Largest per-step ratio the stability quadratic allows at the drop
    /// point; absent without a smoothness constant or when eta*L exceeds 1.
    max_anneal_ratio: Option<f64>,
    respects_ratio: Option<bool>,
    note: Option<String>,
}

pub fn run(args: PlanArgs) -> CliResult<()> {
    let base = match (args.eta, args.c, args.alpha, args.beta) {
        (Some(eta), Some(c), None, None) => SpaParams::new(eta, c)?,
        (None, None, Some(alpha), Some(beta)) => {
            SgdmParams::new(alpha, beta)?.constant_equivalent()?
        }
        _ => {
            return Err(CliError::config(
                "give a base pair: --eta and --c, or --alpha and --beta",
            ))
        }
    };
    let drops = parse_drops(&args.drops)?;
    let mode = match args.mode.as_str() {
        "sudden" => StepwiseMode::Sudden,
        "c-scaled" => StepwiseMode::CScaledSudden,
        "gradual" => StepwiseMode::Gradual {
            per_step_factor: args.factor,
        },
        other => return Err(CliError::config(format!("unknown mode `{other}`"))),
    };
    let schedule = stepwise_schedule(base, &drops, args.steps, mode)?;

    let mut reports = Vec::new();
    for d in &drops {
        // Hyper-parameters in force just before this drop.
        let before = schedule.entry(d.step.saturating_sub(1));
        let realized = match mode {
            StepwiseMode::Gradual { per_step_factor } => per_step_factor,
            _ => d.factor,
        };
        let (ratio, note) = match args.lipschitz {
            None => (None, Some("no smoothness constant given".to_string())),
            Some(lipschitz) => {
                let eta_l = before.eta * lipschitz;
                if before.c >= 1.0 {
                    (None, Some("stability quadratic needs c < 1".to_string()))
                } else if !(eta_l > 0.0 && eta_l <= 1.0) {
                    (
                        None,
                        Some(format!(
                            "stability quadratic assumes eta*L <= 1, here eta*L = {eta_l}"
                        )),
                    )
                } else {
                    (Some(max_anneal_ratio(before.c, eta_l)?), None)
                }
            }
        };
        reports.push(DropReport {
            step: d.step,
            factor: d.factor,
            realized_per_step_ratio: realized,
            max_anneal_ratio: ratio,
            respects_ratio: ratio.map(|r| realized <= r),
            note,
        });
    }

    std::fs::write(
        &args.output,
        schedfile::write_schedule(&AnySchedule::Spa(schedule), &[]),
    )?;
    let sidecar_path = args
        .sidecar
        .unwrap_or_else(|| args.output.with_extension("plan.json"));
    let sidecar = Sidecar {
        mode: args.mode,
        base_eta: base.eta,
        base_c: base.c,
        steps: args.steps,
        per_step_factor: matches!(mode, StepwiseMode::Gradual { .. }).then_some(args.factor),
        lipschitz: args.lipschitz,
        drops: reports,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(CliError::io)?;
    std::fs::write(&sidecar_path, json + "\n")?;
    Ok(())
}

fn parse_drops(specs: &[String]) -> CliResult<Vec<DropSpec>> {
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let (step, factor) = spec.split_once(':').ok_or_else(|| {
            CliError::config(format!("drop `{spec}` must have the form step:factor"))
        })?;
        out.push(DropSpec {
            step: step
                .trim()
                .parse()
                .map_err(|e| CliError::config(format!("drop `{spec}`: bad step ({e})")))?,
            factor: factor
                .trim()
                .parse()
                .map_err(|e| CliError::config(format!("drop `{spec}`: bad factor ({e})")))?,
        });
    }
    Ok(out)
}
