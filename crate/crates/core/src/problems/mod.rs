//! Synthetic stochastic objectives with analytically known constants.
//!
//! Every problem here perturbs its exact gradient with isotropic Gaussian
//! noise drawn from a [`NoiseStream`], so second moments have closed forms
//! and the Lyapunov inequalities can be checked in exact expectation.

mod quadratic;
mod sine_bowl;

pub use quadratic::QuadraticProblem;
pub use sine_bowl::SineBowlProblem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::NoiseStream;

/// What a given oracle knows about itself in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    /// Smoothness constant of the gradient is known.
    pub has_lipschitz: bool,
    /// The optimal objective value is known.
    pub has_optimum_value: bool,
    /// The per-coordinate noise variance is known.
    pub has_noise_variance: bool,
    /// `E||grad f(x, xi)||^2` has a closed form.
    pub has_second_moment: bool,
}

/// A stochastic first-order oracle: objective, exact gradient, and a noisy
/// gradient whose mean is the exact gradient.
pub trait StochasticOracle: Sync {
    fn dim(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Exact objective value.
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Exact gradient.
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Sampled gradient for step `step`: the exact gradient plus the
    /// oracle's noise realization keyed by `(stream.seed(), step)`.
    fn stoch_grad(&self, x: &[f64], stream: &NoiseStream, step: u64) -> Result<Vec<f64>>;

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn optimum_value(&self) -> Option<f64> {
        None
    }

    /// Per-coordinate noise variance `sigma^2`.
    fn noise_variance(&self) -> Option<f64> {
        None
    }

    /// Exact `E||grad f(x, xi)||^2`.
    fn second_moment(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::unsupported(
            "this oracle has no closed-form gradient second moment",
        ))
    }

    /// Exact `E[f(mean + coeff * nu)]` where `nu` is the oracle's noise
    /// vector. Only problems whose objective is quadratic in the noise can
    /// provide this.
    fn smoothed_value(&self, _mean: &[f64], _coeff: f64) -> Result<f64> {
        Err(Error::unsupported(
            "this oracle has no closed-form Gaussian-smoothed objective",
        ))
    }

    fn has_smoothed_value(&self) -> bool {
        false
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// grad + sigma * xi with xi standard normal, keyed by step.
pub(crate) fn additive_gaussian(
    mut grad: Vec<f64>,
    sigma: f64,
    stream: &NoiseStream,
    step: u64,
) -> Vec<f64> {
    if sigma > 0.0 {
        let xi = stream.standard_normal(step, grad.len());
        for (g, n) in grad.iter_mut().zip(xi) {
            *g += sigma * n;
        }
    }
    grad
}

/// Second moment of an additive-noise gradient:
/// `||grad||^2 + dim * sigma^2`.
pub(crate) fn additive_second_moment(grad: &[f64], sigma: f64) -> f64 {
    linalg::norm_sq(grad) + grad.len() as f64 * sigma * sigma
}

pub(crate) fn validate_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!(
            "noise standard deviation must be finite and >= 0, got {sigma}"
        )));
    }
    Ok(())
}
