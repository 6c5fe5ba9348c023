//! Exact bidirectional mapping between standard-momentum and averaging-form
//! hyper-parameter schedules.
//!
//! With `m_0 = 0` and `z_0 = x_0`, the two forms generate identical iterate
//! sequences when
//!
//! ```text
//! eta_{k+1} = (eta_k - alpha_k) / beta_{k+1},     c_{k+1} = alpha_k / eta_k,
//! ```
//!
//! and conversely `alpha_k = eta_k c_{k+1}`, `beta_k = (eta_{k-1}/eta_k)(1 - c_k)`.
//! `eta_0` is a free parameter of the forward map; the default is the
//! constant-schedule fixed point `alpha_0 / (1 - beta_1)`, which keeps the
//! image flat until the source schedule first changes. `c_1 = alpha_0/eta_0`
//! anchors the base case (entry 0's `c` is emitted equal to `c_1` purely for
//! alignment; no run consumes it).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Form, SgdmParams, SpaParams};
use crate::planning::DEFAULT_GRADUAL_FACTOR;
use crate::schedule::{Schedule, SgdmSchedule, SpaSchedule};

/// Maps a standard-form schedule with `T` entries to the averaging form,
/// returning `eta_0..eta_T` and `c_1..c_T` (length `T + 1`).
///
/// The final `eta_T` needs a momentum value one past the end of the input;
/// the schedule is extended constantly there. Steps where `eta_k <= alpha_k`
/// are rejected: they would force the next step size to zero or below.
///
/// ```
/// use pavg::correspondence::sgdm_to_spa;
/// use pavg::{Schedule, SgdmParams};
/// let sgdm = Schedule::constant(SgdmParams::new(1.0, 0.9).unwrap(), 50).unwrap();
/// let spa = sgdm_to_spa(&sgdm, None).unwrap();
/// assert!((spa.entry(0).eta - 10.0).abs() < 1e-12);
/// assert!((spa.entry(1).c - 0.1).abs() < 1e-12);
/// ```
pub fn sgdm_to_spa(schedule: &SgdmSchedule, eta0: Option<f64>) -> Result<SpaSchedule> {
    let entries = schedule.entries();
    let t = entries.len();
    for (k, e) in entries.iter().enumerate().skip(1) {
        if e.beta == 0.0 {
            return Err(Error::DivisionDegeneracy { step: k });
        }
        if !(e.beta > 0.0 && e.beta < 1.0) {
            return Err(Error::invalid(format!(
                "beta must lie in (0, 1) to invert the averaging recurrence, got {} at step {k}",
                e.beta
            )));
        }
    }
    let eta0 = match eta0 {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => {
            return Err(Error::invalid(format!(
                "eta0 must be a positive finite real, got {v}"
            )))
        }
        None => {
            let beta_ref = entries[1.min(t - 1)].beta;
            if !(beta_ref > 0.0 && beta_ref < 1.0) {
                return Err(Error::invalid(format!(
                    "cannot derive a default eta0 from beta = {beta_ref}"
                )));
            }
            entries[0].alpha / (1.0 - beta_ref)
        }
    };

    let mut etas = Vec::with_capacity(t + 1);
    let mut cs = vec![f64::NAN; t + 1];
    etas.push(eta0);
    for k in 0..t {
        let alpha = entries[k].alpha;
        let eta = etas[k];
        if eta <= alpha {
            return Err(Error::DegenerateSchedule {
                step: k,
                eta,
                alpha,
            });
        }
        cs[k + 1] = alpha / eta;
        let beta_next = entries[(k + 1).min(t - 1)].beta;
        etas.push((eta - alpha) / beta_next);
    }
    cs[0] = cs[1];

    let spa_entries: Vec<SpaParams> = etas
        .into_iter()
        .zip(cs)
        .map(|(eta, c)| SpaParams { eta, c })
        .collect();
    Schedule::from_entries(spa_entries)
}

/// A converted momentum value at or above 1, reported as an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSpike {
    pub step: usize,
    pub beta: f64,
}

/// Result of the reverse map, with spike annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaToSgdm {
    pub schedule: SgdmSchedule,
    /// Steps whose converted `beta` is >= 1. A sudden drop in `eta`
    /// legitimately produces such a spike, so it is reported rather than
    /// rejected.
    pub momentum_spikes: Vec<MomentumSpike>,
}

/// Maps an averaging-form schedule with `T + 1` entries to the standard form
/// with `T` entries: `alpha_k = eta_k c_{k+1}` and
/// `beta_k = (eta_{k-1}/eta_k)(1 - c_k)`. `beta_0` never acts on anything
/// (the buffer starts at zero) and is emitted as 0.
pub fn spa_to_sgdm(schedule: &SpaSchedule) -> Result<SpaToSgdm> {
    let entries = schedule.entries();
    if entries.len() < 2 {
        return Err(Error::invalid(
            "an averaging-form schedule needs at least two entries to convert (alpha_k uses c_{k+1})",
        ));
    }
    let t = entries.len() - 1;
    let mut out = Vec::with_capacity(t);
    let mut spikes = Vec::new();
    for k in 0..t {
        let alpha = entries[k].eta * entries[k + 1].c;
        let beta = if k == 0 {
            0.0
        } else {
            (entries[k - 1].eta / entries[k].eta) * (1.0 - entries[k].c)
        };
        if beta >= 1.0 {
            spikes.push(MomentumSpike { step: k, beta });
        }
        out.push(SgdmParams { alpha, beta });
    }
    Ok(SpaToSgdm {
        schedule: Schedule::from_entries(out)?,
        momentum_spikes: spikes,
    })
}

/// The six illustrative stage-wise scenarios: a 100-step run with a single
/// change at step 20, starting from `alpha = 1, beta = 0.9` (equivalently
/// `eta = 10, c = 0.1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StagewiseCase {
    /// (a) standard form: step size divided by 10, momentum held.
    SuddenAlphaDrop,
    /// (b) standard form: momentum lowered 0.9 -> 0.8, step size held.
    SuddenBetaDrop,
    /// (c) averaging form: step size divided by 10, weight held.
    SuddenEtaDrop,
    /// (d) averaging form: weight raised 0.1 -> 1.0, step size held.
    SuddenWeightBoost,
    /// (e) averaging form: both changes of (c) and (d) at once.
    SuddenEtaDropWeightBoost,
    /// (f) averaging form: the targets of (e) approached geometrically.
    GradualEtaDropWeightBoost,
}

impl StagewiseCase {
    pub const ALL: [StagewiseCase; 6] = [
        StagewiseCase::SuddenAlphaDrop,
        StagewiseCase::SuddenBetaDrop,
        StagewiseCase::SuddenEtaDrop,
        StagewiseCase::SuddenWeightBoost,
        StagewiseCase::SuddenEtaDropWeightBoost,
        StagewiseCase::GradualEtaDropWeightBoost,
    ];

    /// Letter label, `a` through `f`.
    pub fn from_letter(letter: char) -> Option<StagewiseCase> {
        Some(match letter.to_ascii_lowercase() {
            'a' => StagewiseCase::SuddenAlphaDrop,
            'b' => StagewiseCase::SuddenBetaDrop,
            'c' => StagewiseCase::SuddenEtaDrop,
            'd' => StagewiseCase::SuddenWeightBoost,
            'e' => StagewiseCase::SuddenEtaDropWeightBoost,
            'f' => StagewiseCase::GradualEtaDropWeightBoost,
            _ => return None,
        })
    }
}

/// A schedule in both forms, generating identical iterates under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSchedules {
    pub sgdm: SgdmSchedule,
    pub spa: SpaSchedule,
    /// Which form the scenario was specified in; the other is its image.
    pub source_form: Form,
}

const CASE_STEPS: usize = 100;
const CASE_CHANGE_AT: usize = 20;
const BASE_ALPHA: f64 = 1.0;
const BASE_BETA: f64 = 0.9;
const BASE_ETA: f64 = 10.0;
const BASE_C: f64 = 0.1;

/// Builds one of the six scenarios with the default gradual factor.
pub fn stagewise_case(case: StagewiseCase) -> MatchedSchedules {
    stagewise_case_with_factor(case, DEFAULT_GRADUAL_FACTOR)
}

/// Builds one of the six scenarios; `gradual_factor` only affects the ramped
/// case (f).
pub fn stagewise_case_with_factor(case: StagewiseCase, gradual_factor: f64) -> MatchedSchedules {
    use StagewiseCase::*;
    match case {
        SuddenAlphaDrop | SuddenBetaDrop => {
            let entries: Vec<SgdmParams> = (0..CASE_STEPS)
                .map(|k| {
                    let changed = k >= CASE_CHANGE_AT;
                    match case {
                        SuddenAlphaDrop => SgdmParams {
                            alpha: if changed {
                                BASE_ALPHA / 10.0
                            } else {
                                BASE_ALPHA
                            },
                            beta: BASE_BETA,
                        },
                        _ => SgdmParams {
                            alpha: BASE_ALPHA,
                            beta: if changed { 0.8 } else { BASE_BETA },
                        },
                    }
                })
                .collect();
            let sgdm = Schedule::from_entries(entries).expect("valid case schedule");
            let spa = sgdm_to_spa(&sgdm, None).expect("case schedules are non-degenerate");
            MatchedSchedules {
                sgdm,
                spa,
                source_form: Form::Sgdm,
            }
        }
        _ => {
            let entries: Vec<SpaParams> = (0..=CASE_STEPS)
                .map(|k| match case {
                    SuddenEtaDrop => SpaParams {
                        eta: if k >= CASE_CHANGE_AT {
                            BASE_ETA / 10.0
                        } else {
                            BASE_ETA
                        },
                        c: BASE_C,
                    },
                    SuddenWeightBoost => SpaParams {
                        eta: BASE_ETA,
                        c: if k >= CASE_CHANGE_AT { 1.0 } else { BASE_C },
                    },
                    SuddenEtaDropWeightBoost => SpaParams {
                        eta: if k >= CASE_CHANGE_AT {
                            BASE_ETA / 10.0
                        } else {
                            BASE_ETA
                        },
                        c: if k >= CASE_CHANGE_AT { 1.0 } else { BASE_C },
                    },
                    GradualEtaDropWeightBoost => {
                        if k < CASE_CHANGE_AT {
                            SpaParams {
                                eta: BASE_ETA,
                                c: BASE_C,
                            }
                        } else {
                            let i = (k - CASE_CHANGE_AT + 1) as i32;
                            SpaParams {
                                eta: (BASE_ETA / gradual_factor.powi(i)).max(BASE_ETA / 10.0),
                                c: (BASE_C * gradual_factor.powi(i)).min(1.0),
                            }
                        }
                    }
                    _ => unreachable!(),
                })
                .collect();
            let spa = Schedule::from_entries(entries).expect("valid case schedule");
            let sgdm = spa_to_sgdm(&spa).expect("case schedules convert").schedule;
            MatchedSchedules {
                sgdm,
                spa,
                source_form: Form::Spa,
            }
        }
    }
}
