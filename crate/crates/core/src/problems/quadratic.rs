//! Axis-aligned quadratic objective with Gaussian gradient noise.

use crate::error::{Error, Result};
use crate::noise::NoiseStream;

use super::{
    additive_gaussian, additive_second_moment, check_dim, validate_sigma, Capabilities,
    StochasticOracle,
};

/// `f(x) = 1/2 (x - center)^T A (x - center) + offset` with `A` diagonal,
/// given by its spectrum. The smoothness constant is the largest eigenvalue
/// and the optimum value is `offset`, both exact.
///
/// The sampled gradient is `A (x - center) + sigma * xi` with standard-normal
/// `xi`, which keeps every moment needed by the diagnostics in closed form:
/// the objective is quadratic in the noise, so Gaussian-smoothed values exist.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    spectrum: Vec<f64>,
    center: Vec<f64>,
    offset: f64,
    sigma: f64,
    lipschitz: f64,
}

impl QuadraticProblem {
    /// Quadratic with the given eigenvalue spectrum, centered at the origin
    /// with optimum value 0.
    pub fn from_spectrum(spectrum: Vec<f64>, sigma: f64) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::invalid("spectrum must be non-empty"));
        }
        if spectrum.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid(
                "spectrum eigenvalues must be finite and >= 0",
            ));
        }
        validate_sigma(sigma)?;
        let lipschitz = spectrum.iter().cloned().fold(0.0, f64::max);
        if lipschitz == 0.0 {
            return Err(Error::invalid(
                "spectrum must contain a positive eigenvalue",
            ));
        }
        let dim = spectrum.len();
        Ok(QuadraticProblem {
            spectrum,
            center: vec![0.0; dim],
            offset: 0.0,
            sigma,
            lipschitz,
        })
    }

    /// Identity Hessian in `dim` dimensions.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::from_spectrum(vec![1.0; dim], sigma)
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        check_dim(self.spectrum.len(), &center)?;
        self.center = center;
        Ok(self)
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    fn trace(&self) -> f64 {
        self.spectrum.iter().sum()
    }
}

impl StochasticOracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_lipschitz: true,
            has_optimum_value: true,
            has_noise_variance: true,
            has_second_moment: true,
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let q: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&self.spectrum)
            .map(|((xi, ci), li)| li * (xi - ci) * (xi - ci))
            .sum();
        Ok(0.5 * q + self.offset)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        Ok(x.iter()
            .zip(&self.center)
            .zip(&self.spectrum)
            .map(|((xi, ci), li)| li * (xi - ci))
            .collect())
    }

    fn stoch_grad(&self, x: &[f64], stream: &NoiseStream, step: u64) -> Result<Vec<f64>> {
        Ok(additive_gaussian(self.grad(x)?, self.sigma, stream, step))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(self.offset)
    }

    fn noise_variance(&self) -> Option<f64> {
        Some(self.sigma * self.sigma)
    }

    fn second_moment(&self, x: &[f64]) -> Result<f64> {
        Ok(additive_second_moment(&self.grad(x)?, self.sigma))
    }

    /// `E[f(mean + coeff * nu)] = f(mean) + 1/2 coeff^2 sigma^2 tr(A)` for
    /// `nu ~ N(0, sigma^2 I)`.
    fn smoothed_value(&self, mean: &[f64], coeff: f64) -> Result<f64> {
        Ok(self.value(mean)? + 0.5 * coeff * coeff * self.sigma * self.sigma * self.trace())
    }

    fn has_smoothed_value(&self) -> bool {
        true
    }
}
