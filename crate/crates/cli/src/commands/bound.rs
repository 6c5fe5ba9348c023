//! `pavg bound`: evaluate the telescoped convergence bounds.

use std::path::PathBuf;

use serde::Serialize;

use pavg::lyapunov::{
    sgd_telescoped_bound, sgdm_telescoped_bound, EtaMode, LyapunovContext, NoiseTerm,
    TelescopedBound,
};

use crate::errors::{CliError, CliResult};

pub struct BoundArgs {
    pub steps: usize,
    pub lipschitz: f64,
    pub c1: f64,
    pub f_z0_gap: f64,
    pub f_x0_gap: f64,
    pub g2: Option<f64>,
    pub sigma2: Option<f64>,
    pub variance: bool,
    pub eta_mode: String,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    steps: usize,
    lipschitz: f64,
    c1: f64,
    noise_term: &'static str,
    momentum: TelescopedBound,
    /// Reference bound for plain SGD at its optimal step size; present when
    /// a second-moment constant was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    sgd: Option<f64>,
}

pub fn run(args: BoundArgs) -> CliResult<()> {
    let mut ctx = LyapunovContext::new(args.lipschitz, 0.0)?;
    ctx.second_moment_bound = args.g2;
    ctx.noise_variance = args.sigma2;
    let eta_mode = match args.eta_mode.as_str() {
        "optimal" => EtaMode::Optimal,
        "realistic" => EtaMode::Realistic,
        other => EtaMode::Explicit(other.parse().map_err(|e| {
            CliError::config(format!(
                "--eta-mode expects optimal, realistic or a number ({e})"
            ))
        })?),
    };
    let noise = if args.variance {
        NoiseTerm::Variance
    } else {
        NoiseTerm::SecondMomentBound
    };
    let momentum = sgdm_telescoped_bound(
        args.steps,
        eta_mode,
        &ctx,
        args.f_z0_gap,
        args.f_x0_gap,
        args.c1,
        noise,
    )?;
    let sgd = match args.g2 {
        Some(_) => Some(sgd_telescoped_bound(args.steps, &ctx, args.f_x0_gap)?),
        None => None,
    };
    let report = Report {
        steps: args.steps,
        lipschitz: args.lipschitz,
        c1: args.c1,
        noise_term: if args.variance {
            "variance"
        } else {
            "second-moment-bound"
        },
        momentum,
        sgd,
    };
    let json = serde_json::to_string_pretty(&report).map_err(CliError::io)? + "\n";
    match args.out {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}
