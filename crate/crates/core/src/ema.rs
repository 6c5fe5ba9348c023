//! Exponential moving average with first-sample seeding.

use crate::error::{Error, Result};

/// Default smoothing constant for diagnostic streams. Configurable everywhere
/// it is used.
pub const DEFAULT_EMA_DECAY: f64 = 0.99;

/// One smoothing step: `decay * prev + (1 - decay) * value`.
///
/// `prev = None` means the average is uninitialized and the first sample is
/// returned as-is.
///
/// ```
/// use pavg::ema::ema_update;
/// assert_eq!(ema_update(None, 5.0, 0.99).unwrap(), 5.0);
/// assert_eq!(ema_update(Some(1.0), 0.0, 0.99).unwrap(), 0.99);
/// ```
pub fn ema_update(prev: Option<f64>, value: f64, decay: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&decay) {
        return Err(Error::invalid(format!(
            "ema decay must lie in [0, 1), got {decay}"
        )));
    }
    Ok(match prev {
        None => value,
        Some(p) => decay * p + (1.0 - decay) * value,
    })
}

/// Running exponential moving average.
#[derive(Debug, Clone)]
pub struct Ema {
    decay: f64,
    current: Option<f64>,
}

impl Ema {
    pub fn new(decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::invalid(format!(
                "ema decay must lie in [0, 1), got {decay}"
            )));
        }
        Ok(Ema {
            decay,
            current: None,
        })
    }

    /// Feeds one sample and returns the updated average.
    pub fn update(&mut self, value: f64) -> f64 {
        let next = match self.current {
            None => value,
            Some(p) => self.decay * p + (1.0 - self.decay) * value,
        };
        self.current = Some(next);
        next
    }

    pub fn value(&self) -> Option<f64> {
        self.current
    }
}
