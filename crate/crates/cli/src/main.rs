//! `pavg`: run momentum/averaging-form experiments, convert and plan
//! hyper-parameter schedules, and verify the Lyapunov step inequality.

mod commands;
mod config;
mod csvout;
mod errors;
mod schedfile;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use errors::CliError;

#[derive(Parser)]
#[command(name = "pavg", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a schedule file between the two hyper-parameter forms.
    Convert {
        /// Input schedule file (header line `sgdm` or `spa`).
        #[arg(long)]
        input: PathBuf,
        /// Conversion direction.
        #[arg(long, value_parser = ["sgdm2spa", "spa2sgdm"])]
        direction: String,
        /// Initial averaging-form step size (sgdm2spa only); defaults to the
        /// constant-schedule fixed point.
        #[arg(long)]
        eta0: Option<f64>,
        /// Output schedule file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a stage-wise or gradually annealed schedule from a base pair.
    Plan {
        /// Averaging-form base step size.
        #[arg(long, conflicts_with_all = ["alpha", "beta"])]
        eta: Option<f64>,
        /// Averaging-form base weight.
        #[arg(long)]
        c: Option<f64>,
        /// Standard-form base step size (converted via the constant
        /// equivalence).
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        /// Standard-form base momentum.
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
        /// Schedule length in steps.
        #[arg(long)]
        steps: usize,
        /// Drop specification `step:factor`; repeatable.
        #[arg(long = "drop")]
        drops: Vec<String>,
        /// How drops are realized.
        #[arg(long, value_parser = ["sudden", "c-scaled", "gradual"], default_value = "sudden")]
        mode: String,
        /// Per-step geometric factor for gradual mode.
        #[arg(long, default_value_t = pavg::planning::DEFAULT_GRADUAL_FACTOR)]
        factor: f64,
        /// Smoothness constant, enables stability reporting in the sidecar.
        #[arg(long)]
        lipschitz: Option<f64>,
        /// Output schedule file.
        #[arg(long)]
        output: PathBuf,
        /// Sidecar JSON path (defaults to `<output>.plan.json`).
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Run an experiment from a config file, writing traces and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Single seed override.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Seed range override `a..b` (half-open).
        #[arg(long)]
        seeds: Option<String>,
        /// Trace file format.
        #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
        format: String,
    },
    /// Check the step inequality along a trajectory, writing a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the telescoped convergence bounds.
    Bound {
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        lipschitz: f64,
        /// Averaging weight entering the telescoped constant.
        #[arg(long)]
        c1: f64,
        /// Initial anchor objective gap.
        #[arg(long = "f-z0-gap")]
        f_z0_gap: f64,
        /// Initial iterate objective gap.
        #[arg(long = "f-x0-gap")]
        f_x0_gap: f64,
        /// Gradient second-moment bound.
        #[arg(long)]
        g2: Option<f64>,
        /// Noise variance (used when `--variance` is set, and for the
        /// variance-mode bound).
        #[arg(long)]
        sigma2: Option<f64>,
        /// Charge the noise variance instead of the second-moment bound.
        #[arg(long, default_value_t = false)]
        variance: bool,
        /// Step-size rule: `optimal`, `realistic`, or an explicit value.
        #[arg(long = "eta-mode", default_value = "realistic")]
        eta_mode: String,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert {
            input,
            direction,
            eta0,
            output,
        } => commands::convert::run(&input, &direction, eta0, &output),
        Command::Plan {
            eta,
            c,
            alpha,
            beta,
            steps,
            drops,
            mode,
            factor,
            lipschitz,
            output,
            sidecar,
        } => commands::plan::run(commands::plan::PlanArgs {
            eta,
            c,
            alpha,
            beta,
            steps,
            drops,
            mode,
            factor,
            lipschitz,
            output,
            sidecar,
        }),
        Command::Run {
            config,
            out,
            seed,
            seeds,
            format,
        } => commands::run::run(&config, &out, seed, seeds.as_deref(), &format),
        Command::Verify { config, out } => commands::verify::run(&config, out.as_deref()),
        Command::Bound {
            steps,
            lipschitz,
            c1,
            f_z0_gap,
            f_x0_gap,
            g2,
            sigma2,
            variance,
            eta_mode,
            out,
        } => commands::bound::run(commands::bound::BoundArgs {
            steps,
            lipschitz,
            c1,
            f_z0_gap,
            f_x0_gap,
            g2,
            sigma2,
            variance,
            eta_mode,
            out,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
