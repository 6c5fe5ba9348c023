//! Stochastic gradient descent with momentum, in both its standard form and
//! the equivalent primal-averaging (anchor) form.
//!
//! The crate provides:
//!
//! * steppers and a deterministic runner for SGD, SGD+M and the averaging
//!   form ([`optim`]),
//! * the exact bidirectional mapping between the two hyper-parameter
//!   schedules ([`correspondence`]),
//! * theory-driven schedule construction: sudden drops, the coupled
//!   step-size/averaging-weight rescaling rule and gradual geometric
//!   annealing ([`planning`]),
//! * a Lyapunov diagnostics engine that evaluates the per-step potential,
//!   the step inequality, remainder terms and telescoped convergence bounds
//!   on synthetic problems with known constants ([`lyapunov`]),
//! * those synthetic problems themselves ([`problems`]).
//!
//! All randomness is drawn from a counter-based [`noise::NoiseStream`], so a
//! run is a pure function of `(seed, schedule, problem, x0)` and the two
//! algorithm forms can be fed bit-identical gradient noise.

pub mod correspondence;
pub mod ema;
pub mod error;
mod linalg;
pub mod lyapunov;
pub mod noise;
pub mod optim;
pub mod params;
pub mod planning;
pub mod problems;
pub mod schedule;
pub mod trace;

pub use error::{Error, Result};
pub use params::{Form, SgdmParams, SpaParams};
pub use schedule::{Schedule, SgdmSchedule, SpaSchedule};
pub use trace::TraceRecord;
