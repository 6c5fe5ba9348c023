//! Theory-driven schedule construction: stage-wise drops, the coupled
//! step-size/averaging-weight rescaling rule, the per-step stability
//! quadratic, and gradual geometric annealing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SgdmParams, SpaParams};
use crate::schedule::{Schedule, SpaSchedule};

/// Default per-step geometric factor for gradual annealing.
pub const DEFAULT_GRADUAL_FACTOR: f64 = 1.0005;

/// New averaging weight to pair with a step-size division by `phi`, chosen
/// so the remainder term's first-line coefficient stays exactly zero:
/// `1/c_new = 1 + (1/phi) (1/c_prev - 1)`.
///
/// For small `c_prev` this is approximately `phi * c_prev`. The result always
/// lies in `[c_prev, 1]`.
pub fn scale_c_for_eta_drop(c_prev: f64, phi: f64) -> Result<f64> {
    if !(c_prev > 0.0 && c_prev <= 1.0) {
        return Err(Error::invalid(format!(
            "c_prev must lie in (0, 1], got {c_prev}"
        )));
    }
    if !phi.is_finite() || phi < 1.0 {
        return Err(Error::invalid(format!("phi must be >= 1, got {phi}")));
    }
    // The closed form lands in [c_prev, 1]; clamp the last-ulp rounding
    // (phi = 1 can otherwise dip one ulp below c_prev).
    Ok((1.0 / (1.0 + (1.0 / c_prev - 1.0) / phi)).clamp(c_prev, 1.0))
}

/// Largest constant step size keeping the displacement-term weight
/// non-positive under constant hyper-parameters: `(2 - c) / (L c (1 - c))`.
/// Returns positive infinity at `c = 1`, where the weight degenerates.
///
/// Note this is the printed stage-wise stability threshold; the algebraic
/// zero of [`crate::lyapunov::xdiff_coefficient_constant`] sits at
/// [`crate::lyapunov::xdiff_negativity_threshold`], a factor `c^2` lower.
pub fn eta_max_constant(c: f64, lipschitz: f64) -> f64 {
    debug_assert!(c > 0.0 && c <= 1.0 && lipschitz > 0.0);
    if c >= 1.0 {
        return f64::INFINITY;
    }
    (2.0 - c) / (lipschitz * c * (1.0 - c))
}

/// Largest multiplicative per-step decrease `r` of the step size allowed by
/// the stability quadratic `(1 - c) r^2 + etaL (1 - c)^2 r - 1 <= 0`
/// (valid under `etaL <= 1`): its unique positive root.
pub fn max_anneal_ratio(c: f64, eta_l: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!("c must lie in (0, 1), got {c}")));
    }
    if !(eta_l > 0.0 && eta_l <= 1.0) {
        return Err(Error::invalid(format!(
            "eta * L must lie in (0, 1], got {eta_l}"
        )));
    }
    let a = 1.0 - c;
    let b = eta_l * (1.0 - c) * (1.0 - c);
    let disc = b * b + 4.0 * a;
    let r = (-b + disc.sqrt()) / (2.0 * a);
    // The root must satisfy its own quadratic to near machine precision.
    let residual = (1.0 - c) * r * r + b * r - 1.0;
    debug_assert!(residual.abs() <= 1e-9, "root residual {residual}");
    Ok(r)
}

/// A gradually annealed schedule segment: the parameter values after each of
/// `len()` consecutive steps, ending exactly on the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSegment {
    pub entries: Vec<SpaParams>,
}

impl AnnealSegment {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Plans a geometric ramp: each step divides `eta` by `per_step_factor` and
/// multiplies `c` by it, clamping each at its target (and `c` at 1), until
/// both targets are reached. Consecutive `eta` ratios never exceed the
/// factor.
pub fn gradual_anneal_plan(
    eta_from: f64,
    eta_to: f64,
    c_from: f64,
    c_to: f64,
    per_step_factor: f64,
) -> Result<AnnealSegment> {
    SpaParams {
        eta: eta_from,
        c: c_from,
    }
    .validate()?;
    SpaParams {
        eta: eta_to,
        c: c_to,
    }
    .validate()?;
    if eta_to > eta_from {
        return Err(Error::invalid(format!(
            "eta must anneal downward: {eta_to} > {eta_from}"
        )));
    }
    if c_to < c_from {
        return Err(Error::invalid(format!(
            "c must anneal upward: {c_to} < {c_from}"
        )));
    }
    if !per_step_factor.is_finite() || per_step_factor <= 1.0 {
        return Err(Error::invalid(format!(
            "per-step factor must exceed 1, got {per_step_factor}"
        )));
    }
    let mut entries = Vec::new();
    let mut eta = eta_from;
    let mut c = c_from;
    while eta > eta_to || c < c_to {
        eta = (eta / per_step_factor).max(eta_to);
        c = (c * per_step_factor).min(c_to).min(1.0);
        entries.push(SpaParams { eta, c });
    }
    Ok(AnnealSegment { entries })
}

/// One stage-wise drop: at `step`, the step size is divided by `factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropSpec {
    pub step: usize,
    pub factor: f64,
}

/// How a drop is realized in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepwiseMode {
    /// Divide `eta` at the drop step; leave `c` alone.
    Sudden,
    /// Divide `eta` and rescale `c` per [`scale_c_for_eta_drop`].
    CScaledSudden,
    /// Replace the drop with a geometric ramp toward the same targets as
    /// [`StepwiseMode::CScaledSudden`].
    Gradual { per_step_factor: f64 },
}

/// Builds a full-length averaging-form schedule from a base pair and a list
/// of drops. Drop steps must be strictly increasing and inside the schedule;
/// in gradual mode the ramp segments must not overlap each other or the end.
pub fn stepwise_schedule(
    base: SpaParams,
    drops: &[DropSpec],
    steps: usize,
    mode: StepwiseMode,
) -> Result<SpaSchedule> {
    base.validate()?;
    if steps == 0 {
        return Err(Error::invalid("a schedule needs at least one step"));
    }
    for w in drops.windows(2) {
        if w[1].step <= w[0].step {
            return Err(Error::ScheduleConstruction(format!(
                "drop steps must be strictly increasing, got {} then {}",
                w[0].step, w[1].step
            )));
        }
    }
    for d in drops {
        if d.step >= steps {
            return Err(Error::ScheduleConstruction(format!(
                "drop at step {} is outside the {steps}-step schedule",
                d.step
            )));
        }
        if !d.factor.is_finite() || d.factor <= 1.0 {
            return Err(Error::ScheduleConstruction(format!(
                "drop factor must exceed 1, got {}",
                d.factor
            )));
        }
    }

    let mut entries = vec![base; steps];
    let mut current = base;
    let mut blocked_until = 0usize;
    for d in drops {
        if d.step < blocked_until {
            return Err(Error::ScheduleConstruction(format!(
                "drop at step {} overlaps the previous gradual segment (runs to step {})",
                d.step, blocked_until
            )));
        }
        let next = match mode {
            StepwiseMode::Sudden => SpaParams {
                eta: current.eta / d.factor,
                c: current.c,
            },
            StepwiseMode::CScaledSudden => SpaParams {
                eta: current.eta / d.factor,
                c: scale_c_for_eta_drop(current.c, d.factor)?,
            },
            StepwiseMode::Gradual { per_step_factor } => {
                let c_target = scale_c_for_eta_drop(current.c, d.factor)?;
                let segment = gradual_anneal_plan(
                    current.eta,
                    current.eta / d.factor,
                    current.c,
                    c_target,
                    per_step_factor,
                )?;
                let end = d.step + segment.len();
                if end > steps {
                    return Err(Error::ScheduleConstruction(format!(
                        "gradual segment starting at step {} needs {} steps but only {} remain",
                        d.step,
                        segment.len(),
                        steps - d.step
                    )));
                }
                for (i, p) in segment.entries.iter().enumerate() {
                    entries[d.step + i] = *p;
                }
                blocked_until = end;
                let last = *segment.entries.last().unwrap_or(&current);
                for e in entries.iter_mut().skip(end) {
                    *e = last;
                }
                current = last;
                continue;
            }
        };
        for e in entries.iter_mut().skip(d.step) {
            *e = next;
        }
        current = next;
        blocked_until = d.step + 1;
    }
    Schedule::from_entries(entries)
}

/// As [`stepwise_schedule`], but with the base pair given in standard form;
/// it is first mapped through the constant-schedule equivalence.
pub fn stepwise_schedule_from_sgdm(
    base: SgdmParams,
    drops: &[DropSpec],
    steps: usize,
    mode: StepwiseMode,
) -> Result<SpaSchedule> {
    stepwise_schedule(base.constant_equivalent()?, drops, steps, mode)
}
