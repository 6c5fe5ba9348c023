//! Experiment configuration: a TOML file with `[problem]`, `[run]`,
//! `[schedule]`, `[diagnostics]` and (for verification) `[verify]` sections.

use std::path::Path;

use serde::Deserialize;

use pavg::correspondence::sgdm_to_spa;
use pavg::optim::AnySchedule;
use pavg::params::{Form, SgdmParams, SpaParams};
use pavg::planning::{stepwise_schedule, DropSpec, StepwiseMode, DEFAULT_GRADUAL_FACTOR};
use pavg::problems::{QuadraticProblem, SineBowlProblem, StochasticOracle};
use pavg::schedule::Schedule;

use crate::errors::{CliError, CliResult};
use crate::schedfile;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub run: RunConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
    // quadratic
    pub spectrum: Option<Vec<f64>>,
    pub center: Option<ScalarOrVec>,
    pub fstar: Option<f64>,
    // sinebowl
    pub dim: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScalarOrVec {
    pub fn materialize(&self, dim: usize) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v; dim],
            ScalarOrVec::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `sgd`, `sgdm`, `spa`, or `both` (runs the standard form and its
    /// averaging-form image together).
    pub form: Option<String>,
    #[serde(default)]
    pub steps: usize,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub x0: Option<ScalarOrVec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    // constant averaging form
    pub eta: Option<f64>,
    pub c: Option<f64>,
    // constant standard form
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    // external file
    pub file: Option<String>,
    // stage-wise drops applied to the base pair
    pub drops: Option<Vec<(usize, f64)>>,
    pub mode: Option<String>,
    pub factor: Option<f64>,
    pub momentum_off_after: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub lyapunov: bool,
    #[serde(default)]
    pub remainder: bool,
    pub ratio_decay: Option<f64>,
    #[serde(default)]
    pub bound_compare: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_verify_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_verify_mode")]
    pub mode: String,
    pub samples: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_verify_steps() -> usize {
    200
}

fn default_verify_mode() -> String {
    "exact".to_string()
}

fn default_threshold() -> f64 {
    -1e-9
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            steps: default_verify_steps(),
            seed: 0,
            mode: default_verify_mode(),
            samples: None,
            threshold: default_threshold(),
        }
    }
}

pub fn load(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn build_problem(cfg: &ProblemConfig) -> CliResult<Box<dyn StochasticOracle>> {
    match cfg.kind.as_str() {
        "quadratic" => {
            let spectrum = cfg
                .spectrum
                .clone()
                .ok_or_else(|| CliError::config("quadratic problems need `spectrum`"))?;
            if let Some(dim) = cfg.dim {
                if dim != spectrum.len() {
                    return Err(CliError::config(format!(
                        "dim = {dim} disagrees with a {}-entry spectrum",
                        spectrum.len()
                    )));
                }
            }
            let dim = spectrum.len();
            let mut p = QuadraticProblem::from_spectrum(spectrum, cfg.sigma)?;
            if let Some(center) = &cfg.center {
                p = p.with_center(center.materialize(dim))?;
            }
            if let Some(fstar) = cfg.fstar {
                p = p.with_offset(fstar);
            }
            Ok(Box::new(p))
        }
        "sinebowl" => {
            let dim = cfg
                .dim
                .ok_or_else(|| CliError::config("sinebowl problems need `dim`"))?;
            let a = cfg.a.unwrap_or(1.0);
            let b = cfg.b.unwrap_or(1.0);
            Ok(Box::new(SineBowlProblem::new(dim, a, b, cfg.sigma)?))
        }
        other => Err(CliError::config(format!(
            "unknown problem kind `{other}` (expected `quadratic` or `sinebowl`)"
        ))),
    }
}

fn parse_mode(mode: Option<&str>, factor: f64) -> CliResult<StepwiseMode> {
    Ok(match mode.unwrap_or("sudden") {
        "sudden" => StepwiseMode::Sudden,
        "c-scaled" => StepwiseMode::CScaledSudden,
        "gradual" => StepwiseMode::Gradual {
            per_step_factor: factor,
        },
        other => {
            return Err(CliError::config(format!(
                "unknown stepwise mode `{other}` (expected sudden, c-scaled or gradual)"
            )))
        }
    })
}

/// Builds the schedule named by the config, relative to the config file's
/// directory for `file =` references.
pub fn build_schedule(
    cfg: &ScheduleConfig,
    steps: usize,
    base_dir: &Path,
) -> CliResult<AnySchedule> {
    let mut schedule =
        if let Some(file) = &cfg.file {
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            schedfile::parse_schedule(&text)?
        } else if let Some(drops) = &cfg.drops {
            let base = base_pair(cfg)?;
            let drop_specs: Vec<DropSpec> = drops
                .iter()
                .map(|(step, factor)| DropSpec {
                    step: *step,
                    factor: *factor,
                })
                .collect();
            let mode = parse_mode(
                cfg.mode.as_deref(),
                cfg.factor.unwrap_or(DEFAULT_GRADUAL_FACTOR),
            )?;
            AnySchedule::Spa(stepwise_schedule(base, &drop_specs, steps.max(1), mode)?)
        } else {
            match (cfg.eta, cfg.c, cfg.alpha, cfg.beta) {
                (Some(eta), Some(c), None, None) => AnySchedule::Spa(Schedule::constant(
                    SpaParams::new(eta, c)?,
                    steps.max(1) + 1,
                )?),
                (None, None, Some(alpha), Some(beta)) => AnySchedule::Sgdm(Schedule::constant(
                    SgdmParams::new(alpha, beta)?,
                    steps.max(1),
                )?),
                _ => return Err(CliError::config(
                    "schedule must give (eta, c), (alpha, beta), drops on a base pair, or a file",
                )),
            }
        };
    if let Some(off) = cfg.momentum_off_after {
        match &mut schedule {
            AnySchedule::Spa(s) => *s = s.with_momentum_disabled_after(off),
            AnySchedule::Sgdm(_) => {
                return Err(CliError::config(
                    "momentum_off_after applies to averaging-form schedules",
                ))
            }
        }
    }
    Ok(schedule)
}

fn base_pair(cfg: &ScheduleConfig) -> CliResult<SpaParams> {
    match (cfg.eta, cfg.c, cfg.alpha, cfg.beta) {
        (Some(eta), Some(c), None, None) => Ok(SpaParams::new(eta, c)?),
        (None, None, Some(alpha), Some(beta)) => {
            Ok(SgdmParams::new(alpha, beta)?.constant_equivalent()?)
        }
        _ => Err(CliError::config(
            "stage-wise schedules need a base pair: (eta, c) or (alpha, beta)",
        )),
    }
}

/// The schedule in the form a run needs, converting through the exact
/// correspondence when the config supplied the other form.
pub fn schedule_for_form(schedule: &AnySchedule, form: Form) -> CliResult<AnySchedule> {
    Ok(match (form, schedule) {
        (Form::Sgdm, AnySchedule::Sgdm(_)) => schedule.clone(),
        (Form::Spa | Form::Sgd, AnySchedule::Spa(_)) => schedule.clone(),
        (Form::Sgdm, AnySchedule::Spa(s)) => {
            AnySchedule::Sgdm(pavg::correspondence::spa_to_sgdm(s)?.schedule)
        }
        (Form::Spa | Form::Sgd, AnySchedule::Sgdm(s)) => AnySchedule::Spa(sgdm_to_spa(s, None)?),
    })
}

pub fn resolve_seeds(
    run: &RunConfig,
    cli_seed: Option<u64>,
    cli_seeds: Option<&str>,
) -> CliResult<Vec<u64>> {
    if let Some(range) = cli_seeds {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| CliError::config("--seeds expects a half-open range like 0..50"))?;
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("bad seed range start: {e}")))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("bad seed range end: {e}")))?;
        if b <= a {
            return Err(CliError::config("--seeds range is empty"));
        }
        return Ok((a..b).collect());
    }
    if let Some(seed) = cli_seed {
        return Ok(vec![seed]);
    }
    if let Some(seeds) = &run.seeds {
        if seeds.is_empty() {
            return Err(CliError::config("run.seeds must be non-empty"));
        }
        return Ok(seeds.clone());
    }
    Ok(vec![run.seed.unwrap_or(0)])
}
