//! `pavg convert`: map a schedule file between the two forms.

use std::path::Path;

use pavg::correspondence::{sgdm_to_spa, spa_to_sgdm};
use pavg::optim::AnySchedule;

use crate::errors::{CliError, CliResult};
use crate::schedfile;

pub fn run(input: &Path, direction: &str, eta0: Option<f64>, output: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let schedule = schedfile::parse_schedule(&text)?;

    let (converted, annotations) = match (direction, &schedule) {
        ("sgdm2spa", AnySchedule::Sgdm(s)) => {
            let spa = sgdm_to_spa(s, eta0)?;
            (AnySchedule::Spa(spa), Vec::new())
        }
        ("spa2sgdm", AnySchedule::Spa(s)) => {
            let out = spa_to_sgdm(s)?;
            let annotations: Vec<(usize, String)> = out
                .momentum_spikes
                .iter()
                .map(|spike| {
                    (
                        spike.step,
                        format!("warning: momentum >= 1 (spike, beta = {})", spike.beta),
                    )
                })
                .collect();
            (AnySchedule::Sgdm(out.schedule), annotations)
        }
        ("sgdm2spa", AnySchedule::Spa(_)) => {
            return Err(CliError::config(
                "input file is already in the averaging form",
            ))
        }
        ("spa2sgdm", AnySchedule::Sgdm(_)) => {
            return Err(CliError::config(
                "input file is already in the standard form",
            ))
        }
        _ => unreachable!("clap validates the direction"),
    };

    for (step, note) in &annotations {
        eprintln!("note: step {step}: {note}");
    }
    std::fs::write(output, schedfile::write_schedule(&converted, &annotations))?;
    Ok(())
}
