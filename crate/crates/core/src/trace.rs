//! Per-step diagnostics rows emitted by the runner.

use serde::{Deserialize, Serialize};

/// One diagnostics row, describing the state *before* step `step` is taken.
///
/// `f_x`, `grad_sq_x` and the `z` counterparts are computed with the exact
/// gradient/objective. `ratio_ema`, in contrast, smooths the *sampled*
/// gradient norm in its denominator: the ratio diagnoses how much of the
/// per-step noise term the negative displacement term cancels, and that noise
/// term is the second moment of the sampled gradient. For runs of the
/// standard form no anchor is tracked and the `z` fields mirror the `x`
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub f_x: f64,
    pub f_z: f64,
    pub grad_sq_x: f64,
    pub grad_sq_z: f64,
    /// Squared displacement `||x_k - x_{k-1}||^2`; zero at step 0.
    pub xdiff_sq: f64,
    /// Lyapunov potential at this step, when enabled (averaging form only).
    pub lyapunov: Option<f64>,
    /// Remainder term activated by hyper-parameter changes, when enabled.
    pub remainder: Option<f64>,
    /// Smoothed benefit ratio, when enabled.
    pub ratio_ema: Option<f64>,
    pub eta: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}
