//! Smooth non-convex test objective: a quadratic bowl with sine ripples.

use crate::error::{Error, Result};
use crate::noise::NoiseStream;

use super::{
    additive_gaussian, additive_second_moment, check_dim, validate_sigma, Capabilities,
    StochasticOracle,
};

/// `f(x) = sum_i x_i^2 + a sin^2(b x_i)` with gradient
/// `2 x_i + a b sin(2 b x_i)`.
///
/// Non-convex for `a b^2 > 1`, yet with exact constants: the smoothness
/// constant is `2 + 2 a b^2` and the global optimum value is 0 at the origin
/// (both ripple and bowl vanish only there).
#[derive(Debug, Clone)]
pub struct SineBowlProblem {
    dim: usize,
    amplitude: f64,
    frequency: f64,
    sigma: f64,
}

impl SineBowlProblem {
    pub fn new(dim: usize, amplitude: f64, frequency: f64, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::invalid(format!(
                "amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !frequency.is_finite() || frequency <= 0.0 {
            return Err(Error::invalid(format!(
                "frequency must be finite and > 0, got {frequency}"
            )));
        }
        validate_sigma(sigma)?;
        Ok(SineBowlProblem {
            dim,
            amplitude,
            frequency,
            sigma,
        })
    }
}

impl StochasticOracle for SineBowlProblem {
    fn dim(&self) -> usize {
        self.dim
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
        check_dim(self.dim, x)?;
        Ok(x.iter()
            .map(|xi| {
                let s = (self.frequency * xi).sin();
                xi * xi + self.amplitude * s * s
            })
            .sum())
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        Ok(x.iter()
            .map(|xi| {
                2.0 * xi + self.amplitude * self.frequency * (2.0 * self.frequency * xi).sin()
            })
            .collect())
    }

    fn stoch_grad(&self, x: &[f64], stream: &NoiseStream, step: u64) -> Result<Vec<f64>> {
        Ok(additive_gaussian(self.grad(x)?, self.sigma, stream, step))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(2.0 + 2.0 * self.amplitude * self.frequency * self.frequency)
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn noise_variance(&self) -> Option<f64> {
        Some(self.sigma * self.sigma)
    }

    fn second_moment(&self, x: &[f64]) -> Result<f64> {
        Ok(additive_second_moment(&self.grad(x)?, self.sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn value_direct_substitution() {
        let p = SineBowlProblem::new(1, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            p.value(&[PI / 2.0]).unwrap(),
            PI * PI / 4.0 + 1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn grad_direct_substitution() {
        let p = SineBowlProblem::new(1, 1.0, 1.0, 0.0).unwrap();
        let g = p.grad(&[PI / 2.0]).unwrap();
        assert_relative_eq!(g[0], PI, max_relative = 1e-14);
    }

    #[test]
    fn optimum_sits_at_the_origin() {
        let p = SineBowlProblem::new(3, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(p.value(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(p.grad(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(p.lipschitz().unwrap(), 10.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(SineBowlProblem::new(0, 1.0, 1.0, 0.0).is_err());
        assert!(SineBowlProblem::new(2, -1.0, 1.0, 0.0).is_err());
        assert!(SineBowlProblem::new(2, 1.0, 0.0, 0.0).is_err());
    }
}
