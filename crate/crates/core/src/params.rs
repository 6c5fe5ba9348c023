//! Per-step hyper-parameter pairs for the two algorithm forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which update rule a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Plain stochastic gradient descent (the averaging form with c = 1).
    Sgd,
    /// Standard momentum form: buffer `m`, step size `alpha`, momentum `beta`.
    Sgdm,
    /// Averaging form: anchor `z`, step size `eta`, averaging weight `c`.
    Spa,
}

/// Standard-form pair `(alpha, beta)`.
///
/// `new` enforces `alpha > 0` and `beta in [0, 1)`. Schedules converted from
/// the averaging form can legitimately carry transient `beta >= 1` spikes, so
/// the fields stay public and schedule containers only require finiteness;
/// see [`crate::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdmParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SgdmParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = SgdmParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// Checks the strict invariants `alpha > 0`, `0 <= beta < 1`.
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "alpha must be a positive finite real, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::invalid(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Relaxed check used for schedule storage: finite positive step size,
    /// finite non-negative momentum (spikes above 1 allowed).
    pub(crate) fn validate_relaxed(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "alpha must be a positive finite real, got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid(format!(
                "beta must be a finite non-negative real, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Constant-schedule image in the averaging form: `eta = alpha/(1-beta)`,
    /// `c = 1 - beta`.
    pub fn constant_equivalent(&self) -> Result<SpaParams> {
        self.validate()?;
        Ok(SpaParams {
            eta: self.alpha / (1.0 - self.beta),
            c: 1.0 - self.beta,
        })
    }
}

/// Averaging-form pair `(eta, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaParams {
    pub eta: f64,
    pub c: f64,
}

impl SpaParams {
    pub fn new(eta: f64, c: f64) -> Result<Self> {
        let p = SpaParams { eta, c };
        p.validate()?;
        Ok(p)
    }

    /// Checks the invariants `eta > 0`, `0 < c <= 1`.
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::invalid(format!(
                "eta must be a positive finite real, got {}",
                self.eta
            )));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::invalid(format!(
                "c must lie in (0, 1], got {}",
                self.c
            )));
        }
        Ok(())
    }

    pub(crate) fn validate_relaxed(&self) -> Result<()> {
        self.validate()
    }

    /// Constant-schedule image in the standard form: `alpha = c*eta`,
    /// `beta = 1 - c`.
    pub fn constant_equivalent(&self) -> Result<SgdmParams> {
        self.validate()?;
        Ok(SgdmParams {
            alpha: self.c * self.eta,
            beta: 1.0 - self.c,
        })
    }
}
