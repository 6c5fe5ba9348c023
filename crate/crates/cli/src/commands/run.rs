//! `pavg run`: execute an experiment over one or more seeds, writing one
//! trace per seed plus a JSON summary.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use pavg::lyapunov::{sgdm_telescoped_bound, EtaMode, LyapunovContext, NoiseTerm};
use pavg::optim::{run as run_form, AnySchedule, Diagnostics, RunResult};
use pavg::params::Form;
use pavg::problems::StochasticOracle;
use pavg::TraceRecord;

use crate::config;
use crate::csvout;
use crate::errors::{CliError, CliResult};

#[derive(Serialize)]
struct Summary {
    form: String,
    steps: usize,
    seeds: Vec<u64>,
    trace_format: String,
    per_seed: Vec<SeedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    form_equivalence: Option<EquivalenceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_comparison: Option<BoundComparison>,
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    final_f_x: f64,
    final_grad_sq_x: f64,
    mean_grad_sq_x: f64,
    /// Mean of the bounded quantity `(||grad f(x)||^2 + ||grad f(z)||^2)/2`.
    mean_half_grad_sq_xz: f64,
    /// Largest exact gradient second moment seen along the trace.
    max_second_moment: f64,
    /// Largest single-step increase of the objective along the trace.
    max_single_step_f_increase: f64,
}

#[derive(Serialize)]
struct EquivalenceSummary {
    tolerance: f64,
    max_relative_gap: f64,
    pass: bool,
}

#[derive(Serialize)]
struct BoundComparison {
    eta: f64,
    c1: f64,
    /// Trajectory-scoped second-moment constant: the largest exact second
    /// moment seen at any visited iterate, across all seeds.
    g2: f64,
    bound: f64,
    per_seed_empirical: Vec<f64>,
    all_within_bound: bool,
}

struct SeedOutput {
    seed: u64,
    result: RunResult,
    paired: Option<RunResult>,
}

pub fn run(
    config_path: &Path,
    out_dir: &Path,
    cli_seed: Option<u64>,
    cli_seeds: Option<&str>,
    format: &str,
) -> CliResult<()> {
    let cfg = config::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let oracle = config::build_problem(&cfg.problem)?;
    let steps = cfg.run.steps;
    let schedule = config::build_schedule(&cfg.schedule, steps, base_dir)?;
    let seeds = config::resolve_seeds(&cfg.run, cli_seed, cli_seeds)?;
    let form = cfg
        .run
        .form
        .ok_or_else(|| CliError::config("run.form is required (sgd, sgdm, spa or both)"))?;

    let x0 = cfg
        .run
        .x0
        .as_ref()
        .map(|v| v.materialize(oracle.dim()))
        .unwrap_or_else(|| vec![0.0; oracle.dim()]);
    if x0.len() != oracle.dim() {
        return Err(CliError::config(format!(
            "x0 has {} entries but the problem dimension is {}",
            x0.len(),
            oracle.dim()
        )));
    }

    let both = form == "both";
    let diagnostics = Diagnostics {
        lyapunov: cfg.diagnostics.lyapunov,
        remainder: cfg.diagnostics.remainder,
        ratio_decay: cfg.diagnostics.ratio_decay,
        record_iterates: both,
    };

    let outputs: Vec<CliResult<SeedOutput>> = seeds
        .par_iter()
        .map(|&seed| -> CliResult<SeedOutput> {
            if both {
                let sgdm_sched = config::schedule_for_form(&schedule, Form::Sgdm)?;
                let spa_sched = config::schedule_for_form(&schedule, Form::Spa)?;
                let a = run_form(
                    oracle.as_ref(),
                    Form::Sgdm,
                    &sgdm_sched,
                    &x0,
                    seed,
                    steps,
                    &strip_potentials(&diagnostics),
                )?;
                let b = run_form(
                    oracle.as_ref(),
                    Form::Spa,
                    &spa_sched,
                    &x0,
                    seed,
                    steps,
                    &diagnostics,
                )?;
                Ok(SeedOutput {
                    seed,
                    result: b,
                    paired: Some(a),
                })
            } else {
                let parsed: Form = match form.as_str() {
                    "sgd" => Form::Sgd,
                    "sgdm" => Form::Sgdm,
                    "spa" => Form::Spa,
                    other => {
                        return Err(CliError::config(format!(
                            "unknown run form `{other}` (expected sgd, sgdm, spa or both)"
                        )))
                    }
                };
                let sched = config::schedule_for_form(&schedule, parsed)?;
                let result = run_form(
                    oracle.as_ref(),
                    parsed,
                    &sched,
                    &x0,
                    seed,
                    steps,
                    &diagnostics,
                )?;
                Ok(SeedOutput {
                    seed,
                    result,
                    paired: None,
                })
            }
        })
        .collect();

    std::fs::create_dir_all(out_dir)?;
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut worst_gap: f64 = 0.0;
    for output in outputs {
        let output = output?;
        let seed = output.seed;
        if let Some(paired) = &output.paired {
            worst_gap = worst_gap.max(max_relative_gap(paired, &output.result));
            write_trace(
                out_dir,
                &format!("trace_sgdm_seed{seed}"),
                format,
                &paired.trace,
            )?;
            write_trace(
                out_dir,
                &format!("trace_spa_seed{seed}"),
                format,
                &output.result.trace,
            )?;
        } else {
            write_trace(
                out_dir,
                &format!("trace_seed{seed}"),
                format,
                &output.result.trace,
            )?;
        }
        per_seed.push(seed_summary(oracle.as_ref(), &output)?);
    }

    let bound_comparison = if cfg.diagnostics.bound_compare {
        Some(compare_bound(
            oracle.as_ref(),
            &schedule,
            &per_seed,
            steps,
            &x0,
        )?)
    } else {
        None
    };

    let summary = Summary {
        form: form.clone(),
        steps,
        seeds,
        trace_format: format.to_string(),
        per_seed,
        form_equivalence: both.then_some(EquivalenceSummary {
            tolerance: 1e-10,
            max_relative_gap: worst_gap,
            pass: worst_gap <= 1e-10,
        }),
        bound_comparison,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(CliError::io)?;
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(())
}

/// Lyapunov/remainder columns belong to the averaging form; its paired
/// standard-form run drops them.
fn strip_potentials(d: &Diagnostics) -> Diagnostics {
    Diagnostics {
        lyapunov: false,
        remainder: false,
        ratio_decay: None,
        record_iterates: d.record_iterates,
    }
}

fn write_trace(dir: &Path, stem: &str, format: &str, trace: &[TraceRecord]) -> CliResult<()> {
    match format {
        "csv" => std::fs::write(dir.join(format!("{stem}.csv")), csvout::render(trace))?,
        "json" => {
            let json = serde_json::to_string_pretty(trace).map_err(CliError::io)?;
            std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        }
        other => return Err(CliError::config(format!("unknown trace format `{other}`"))),
    }
    Ok(())
}

fn seed_summary(oracle: &dyn StochasticOracle, output: &SeedOutput) -> CliResult<SeedSummary> {
    let trace = &output.result.trace;
    let n = trace.len().max(1) as f64;
    let mean_grad_sq_x = trace.iter().map(|r| r.grad_sq_x).sum::<f64>() / n;
    let mean_half = trace
        .iter()
        .map(|r| 0.5 * r.grad_sq_x + 0.5 * r.grad_sq_z)
        .sum::<f64>()
        / n;
    let sigma2 = oracle.noise_variance().unwrap_or(0.0);
    let max_second_moment = trace
        .iter()
        .map(|r| r.grad_sq_x + oracle.dim() as f64 * sigma2)
        .fold(0.0f64, f64::max);
    let mut max_increase = f64::MIN;
    for w in trace.windows(2) {
        max_increase = max_increase.max(w[1].f_x - w[0].f_x);
    }
    let final_x = &output.result.final_state.x;
    let final_f_x = oracle.value(final_x)?;
    let final_grad: f64 = oracle.grad(final_x)?.iter().map(|g| g * g).sum();
    if let Some(last) = trace.last() {
        max_increase = max_increase.max(final_f_x - last.f_x);
    }
    Ok(SeedSummary {
        seed: output.seed,
        final_f_x,
        final_grad_sq_x: final_grad,
        mean_grad_sq_x,
        mean_half_grad_sq_xz: mean_half,
        max_second_moment,
        max_single_step_f_increase: max_increase,
    })
}

fn max_relative_gap(a: &RunResult, b: &RunResult) -> f64 {
    let (Some(xa), Some(xb)) = (&a.iterates, &b.iterates) else {
        return f64::NAN;
    };
    let mut worst: f64 = 0.0;
    for (p, q) in xa.iter().zip(xb) {
        let diff = p
            .iter()
            .zip(q)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let mag = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / (1.0 + mag));
    }
    worst
}

fn compare_bound(
    oracle: &dyn StochasticOracle,
    schedule: &AnySchedule,
    per_seed: &[SeedSummary],
    steps: usize,
    x0: &[f64],
) -> CliResult<BoundComparison> {
    let AnySchedule::Spa(spa) = schedule else {
        return Err(CliError::config(
            "bound_compare needs an averaging-form schedule",
        ));
    };
    if !spa.is_constant() {
        return Err(CliError::config(
            "bound_compare needs constant hyper-parameters",
        ));
    }
    let entry = spa.entry(0);
    // Trajectory-scoped second-moment constant: the per-seed maxima are in
    // the summaries already.
    let g2 = per_seed
        .iter()
        .map(|s| s.max_second_moment)
        .fold(0.0f64, f64::max);
    let f0 = oracle.value(x0)? - oracle.optimum_value().unwrap_or(0.0);
    let ctx = LyapunovContext::from_oracle(oracle)?.with_second_moment_bound(g2);
    let bound = sgdm_telescoped_bound(
        steps,
        EtaMode::Explicit(entry.eta),
        &ctx,
        f0,
        f0,
        entry.c,
        NoiseTerm::SecondMomentBound,
    )?;
    let per_seed_empirical: Vec<f64> = per_seed.iter().map(|s| s.mean_half_grad_sq_xz).collect();
    let all_within = per_seed_empirical.iter().all(|e| *e <= bound.bound);
    Ok(BoundComparison {
        eta: bound.eta,
        c1: entry.c,
        g2,
        bound: bound.bound,
        per_seed_empirical,
        all_within_bound: all_within,
    })
}
