//! Plain-text schedule files: a header line naming the form (`sgdm` or
//! `spa`), then one line per step `k value1 value2`. `#` starts a comment;
//! values are written with 17 significant digits so files round-trip exactly.

use pavg::optim::AnySchedule;
use pavg::params::{SgdmParams, SpaParams};
use pavg::schedule::Schedule;

use crate::errors::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a schedule; `annotations` maps a step index to a trailing comment.
pub fn write_schedule(schedule: &AnySchedule, annotations: &[(usize, String)]) -> String {
    let mut out = String::new();
    let annotation = |k: usize| -> String {
        annotations
            .iter()
            .filter(|(at, _)| *at == k)
            .map(|(_, note)| format!(" # {note}"))
            .collect()
    };
    match schedule {
        AnySchedule::Sgdm(s) => {
            out.push_str("sgdm\n");
            for (k, e) in s.entries().iter().enumerate() {
                out.push_str(&format!(
                    "{k} {} {}{}\n",
                    fmt_f64(e.alpha),
                    fmt_f64(e.beta),
                    annotation(k)
                ));
            }
        }
        AnySchedule::Spa(s) => {
            out.push_str("spa\n");
            for (k, e) in s.entries().iter().enumerate() {
                out.push_str(&format!(
                    "{k} {} {}{}\n",
                    fmt_f64(e.eta),
                    fmt_f64(e.c),
                    annotation(k)
                ));
            }
        }
    }
    out
}

/// Parses a schedule file, reporting 1-based line numbers on failure.
pub fn parse_schedule(text: &str) -> CliResult<AnySchedule> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| CliError::config("schedule file is empty"))?;
    let is_sgdm = match header {
        "sgdm" => true,
        "spa" => false,
        other => {
            return Err(CliError::config(format!(
                "line {header_line}: expected header `sgdm` or `spa`, got `{other}`"
            )))
        }
    };

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in lines {
        let mut parts = line.split_whitespace();
        let step: usize = parts
            .next()
            .ok_or_else(|| CliError::config(format!("line {lineno}: missing step index")))?
            .parse()
            .map_err(|e| CliError::config(format!("line {lineno}: bad step index ({e})")))?;
        if step != rows.len() {
            return Err(CliError::config(format!(
                "line {lineno}: expected step {}, got {step}",
                rows.len()
            )));
        }
        let mut value = |name: &str| -> CliResult<f64> {
            parts
                .next()
                .ok_or_else(|| CliError::config(format!("line {lineno}: missing {name}")))?
                .parse()
                .map_err(|e| CliError::config(format!("line {lineno}: bad {name} ({e})")))
        };
        let v1 = value("first value")?;
        let v2 = value("second value")?;
        if parts.next().is_some() {
            return Err(CliError::config(format!(
                "line {lineno}: trailing fields after the two values"
            )));
        }
        rows.push((v1, v2));
    }
    if rows.is_empty() {
        return Err(CliError::config("schedule file has a header but no steps"));
    }

    if is_sgdm {
        let entries = rows
            .into_iter()
            .map(|(alpha, beta)| SgdmParams { alpha, beta })
            .collect();
        Ok(AnySchedule::Sgdm(Schedule::from_entries(entries)?))
    } else {
        let entries = rows
            .into_iter()
            .map(|(eta, c)| SpaParams { eta, c })
            .collect();
        Ok(AnySchedule::Spa(Schedule::from_entries(entries)?))
    }
}
