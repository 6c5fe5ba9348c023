//! Step functions and a deterministic runner for SGD, the standard momentum
//! form, and the averaging form.

use serde::{Deserialize, Serialize};

use crate::ema::Ema;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lyapunov;
use crate::noise::NoiseStream;
use crate::params::{Form, SgdmParams, SpaParams};
use crate::problems::StochasticOracle;
use crate::schedule::{SgdmSchedule, SpaSchedule};
use crate::trace::TraceRecord;

/// Iterate, auxiliary sequence and bookkeeping for a single run.
///
/// `aux` is the momentum buffer for the standard form and the anchor for the
/// averaging form; plain SGD leaves it untouched. Initializations are fixed:
/// the momentum buffer starts at zero and the anchor starts at the iterate,
/// which is exactly the regime in which the two forms coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub aux: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn init(form: Form, x0: &[f64]) -> Self {
        let aux = match form {
            Form::Sgdm => vec![0.0; x0.len()],
            Form::Spa | Form::Sgd => x0.to_vec(),
        };
        OptimizerState {
            x: x0.to_vec(),
            aux,
            x_prev: x0.to_vec(),
            step: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Plain SGD step: `x <- x - eta * g`.
pub fn sgd_step(state: &mut OptimizerState, eta: f64, g: &[f64]) {
    debug_assert_eq!(state.dim(), g.len());
    state.x_prev.copy_from_slice(&state.x);
    for (x, gi) in state.x.iter_mut().zip(g) {
        *x -= eta * gi;
    }
    state.step += 1;
}

/// Standard momentum step: `m <- beta m + g`, `x <- x - alpha m`.
pub fn sgdm_step(state: &mut OptimizerState, params: SgdmParams, g: &[f64]) {
    debug_assert_eq!(state.dim(), g.len());
    state.x_prev.copy_from_slice(&state.x);
    for ((m, x), gi) in state.aux.iter_mut().zip(state.x.iter_mut()).zip(g) {
        *m = params.beta * *m + gi;
        *x -= params.alpha * *m;
    }
    state.step += 1;
}

/// Averaging-form step: `z <- z - eta * g`, `x <- (1-c) x + c z`.
///
/// `params.c` is the *next-index* averaging weight (the weight that forms the
/// new iterate); the runner owns the off-by-one bookkeeping against the
/// schedule.
pub fn spa_step(state: &mut OptimizerState, params: SpaParams, g: &[f64]) {
    debug_assert_eq!(state.dim(), g.len());
    state.x_prev.copy_from_slice(&state.x);
    for ((z, x), gi) in state.aux.iter_mut().zip(state.x.iter_mut()).zip(g) {
        *z -= params.eta * gi;
        *x = (1.0 - params.c) * *x + params.c * *z;
    }
    state.step += 1;
}

/// A schedule in either form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnySchedule {
    Sgdm(SgdmSchedule),
    Spa(SpaSchedule),
}

impl AnySchedule {
    pub fn len(&self) -> usize {
        match self {
            AnySchedule::Sgdm(s) => s.len(),
            AnySchedule::Spa(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Which optional diagnostics the runner records.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Record the Lyapunov potential per step (averaging form only; needs
    /// the problem's smoothness constant and optimum value).
    pub lyapunov: bool,
    /// Record the schedule-change remainder term per step (same requirements
    /// as `lyapunov`).
    pub remainder: bool,
    /// Smoothing constant for the benefit-ratio stream; `None` disables it.
    pub ratio_decay: Option<f64>,
    /// Keep the full iterate history in the result.
    pub record_iterates: bool,
}

/// Trace plus final state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub final_state: OptimizerState,
    /// `x_0 ..= x_T` when iterate recording was enabled.
    pub iterates: Option<Vec<Vec<f64>>>,
}

/// Runs `steps` steps of the requested form, consuming noise keyed by step
/// index, and records one trace row per step (describing the pre-step state).
pub fn run(
    oracle: &dyn StochasticOracle,
    form: Form,
    schedule: &AnySchedule,
    x0: &[f64],
    seed: u64,
    steps: usize,
    diagnostics: &Diagnostics,
) -> Result<RunResult> {
    match (form, schedule) {
        (Form::Sgdm, AnySchedule::Sgdm(s)) => run_sgdm(oracle, s, x0, seed, steps, diagnostics),
        (Form::Spa, AnySchedule::Spa(s)) => run_spa(oracle, s, x0, seed, steps, diagnostics),
        (Form::Sgd, AnySchedule::Spa(s)) => run_sgd(oracle, s, x0, seed, steps, diagnostics),
        (Form::Sgd, AnySchedule::Sgdm(_)) => Err(Error::invalid(
            "plain SGD runs take an averaging-form schedule (only eta is consumed)",
        )),
        _ => Err(Error::invalid(
            "schedule form does not match the requested update rule",
        )),
    }
}

pub fn run_sgdm(
    oracle: &dyn StochasticOracle,
    schedule: &SgdmSchedule,
    x0: &[f64],
    seed: u64,
    steps: usize,
    diagnostics: &Diagnostics,
) -> Result<RunResult> {
    Runner::new(oracle, x0, seed, steps, diagnostics, Form::Sgdm)?
        .check_schedule_len(schedule.len())?
        .drive(|k| {
            let p = schedule.entry(k);
            StepPlan {
                eta: None,
                c: None,
                alpha: Some(p.alpha),
                beta: Some(p.beta),
                ratio_params: None,
                advance: Advance::Sgdm(p),
            }
        })
}

pub fn run_spa(
    oracle: &dyn StochasticOracle,
    schedule: &SpaSchedule,
    x0: &[f64],
    seed: u64,
    steps: usize,
    diagnostics: &Diagnostics,
) -> Result<RunResult> {
    Runner::new(oracle, x0, seed, steps, diagnostics, Form::Spa)?
        .check_schedule_len(schedule.len())?
        .drive(|k| {
            let p = schedule.entry(k);
            // Step k consumes eta_k and the next-index weight c_{k+1}.
            let c_next = schedule.entry(k + 1).c;
            StepPlan {
                eta: Some(p.eta),
                c: Some(p.c),
                alpha: None,
                beta: None,
                ratio_params: Some((p.eta, p.c)),
                advance: Advance::Spa(SpaParams {
                    eta: p.eta,
                    c: c_next,
                }),
            }
        })
}

pub fn run_sgd(
    oracle: &dyn StochasticOracle,
    schedule: &SpaSchedule,
    x0: &[f64],
    seed: u64,
    steps: usize,
    diagnostics: &Diagnostics,
) -> Result<RunResult> {
    Runner::new(oracle, x0, seed, steps, diagnostics, Form::Sgd)?
        .check_schedule_len(schedule.len())?
        .drive(|k| {
            let p = schedule.entry(k);
            StepPlan {
                eta: Some(p.eta),
                c: Some(1.0),
                alpha: None,
                beta: None,
                ratio_params: Some((p.eta, 1.0)),
                advance: Advance::Sgd(p.eta),
            }
        })
}

enum Advance {
    Sgd(f64),
    Sgdm(SgdmParams),
    Spa(SpaParams),
}

struct StepPlan {
    eta: Option<f64>,
    c: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    /// `(eta, c)` feeding the benefit-ratio numerator weight.
    ratio_params: Option<(f64, f64)>,
    advance: Advance,
}

struct Runner<'a> {
    oracle: &'a dyn StochasticOracle,
    noise: NoiseStream,
    steps: usize,
    diagnostics: &'a Diagnostics,
    form: Form,
    state: OptimizerState,
    lipschitz: f64,
    fstar: f64,
}

impl<'a> Runner<'a> {
    fn new(
        oracle: &'a dyn StochasticOracle,
        x0: &[f64],
        seed: u64,
        steps: usize,
        diagnostics: &'a Diagnostics,
        form: Form,
    ) -> Result<Self> {
        crate::problems::check_dim(oracle.dim(), x0)?;
        let needs_potential = diagnostics.lyapunov || diagnostics.remainder;
        let mut lipschitz = f64::NAN;
        let mut fstar = f64::NAN;
        if needs_potential {
            if form != Form::Spa {
                return Err(Error::unsupported(
                    "lyapunov/remainder diagnostics are defined on averaging-form runs",
                ));
            }
            lipschitz = oracle.lipschitz().ok_or_else(|| {
                Error::unsupported("lyapunov/remainder diagnostics need the smoothness constant")
            })?;
            fstar = oracle.optimum_value().ok_or_else(|| {
                Error::unsupported("lyapunov/remainder diagnostics need the optimum value")
            })?;
        }
        if diagnostics.ratio_decay.is_some() && form == Form::Sgdm {
            return Err(Error::unsupported(
                "the benefit ratio is defined on averaging-form hyper-parameters; run the \
                 converted schedule instead",
            ));
        }
        Ok(Runner {
            oracle,
            noise: NoiseStream::new(seed),
            steps,
            diagnostics,
            form,
            state: OptimizerState::init(form, x0),
            lipschitz,
            fstar,
        })
    }

    fn check_schedule_len(self, len: usize) -> Result<Self> {
        if len < self.steps {
            return Err(Error::invalid(format!(
                "schedule has {len} entries but the run needs {}",
                self.steps
            )));
        }
        Ok(self)
    }

    fn drive(mut self, plan: impl Fn(usize) -> StepPlan) -> Result<RunResult> {
        let mut trace = Vec::with_capacity(self.steps);
        let mut iterates = self
            .diagnostics
            .record_iterates
            .then(|| vec![self.state.x.clone()]);
        let mut ratio_num = match self.diagnostics.ratio_decay {
            Some(d) => Some(Ema::new(d)?),
            None => None,
        };
        let mut ratio_den = match self.diagnostics.ratio_decay {
            Some(d) => Some(Ema::new(d)?),
            None => None,
        };
        let mut prev_fx_gap = f64::NAN;
        let mut prev_plan_hyper: Option<(f64, f64)> = None; // (eta, c) one step back

        for k in 0..self.steps {
            let p = plan(k);
            let g_sample = self
                .oracle
                .stoch_grad(&self.state.x, &self.noise, k as u64)?;
            let f_x = self.oracle.value(&self.state.x)?;
            let grad_x = self.oracle.grad(&self.state.x)?;
            let grad_sq_x = linalg::norm_sq(&grad_x);
            let (f_z, grad_sq_z) = match self.form {
                Form::Spa => {
                    let f_z = self.oracle.value(&self.state.aux)?;
                    let gz = self.oracle.grad(&self.state.aux)?;
                    (f_z, linalg::norm_sq(&gz))
                }
                // No anchor is tracked for these forms; mirror the iterate.
                Form::Sgd | Form::Sgdm => (f_x, grad_sq_x),
            };
            let xdiff_sq = linalg::dist_sq(&self.state.x, &self.state.x_prev);

            let lyapunov = if self.diagnostics.lyapunov {
                let (eta, c) = (p.eta.unwrap(), p.c.unwrap());
                Some(if k == 0 {
                    (f_z - self.fstar) / (eta * eta)
                } else {
                    let (eta_prev, c_prev) = prev_plan_hyper.unwrap();
                    lyapunov::lyapunov_value(
                        f_z - self.fstar,
                        prev_fx_gap,
                        xdiff_sq,
                        eta_prev,
                        c_prev,
                        c,
                        self.lipschitz,
                    )
                })
            } else {
                None
            };
            let remainder = if self.diagnostics.remainder && k > 0 {
                let (eta, c) = (p.eta.unwrap(), p.c.unwrap());
                let (eta_prev, c_prev) = prev_plan_hyper.unwrap();
                Some(lyapunov::remainder(
                    eta,
                    eta_prev,
                    c,
                    c_prev,
                    prev_fx_gap,
                    f_z - self.fstar,
                    self.lipschitz,
                ))
            } else {
                None
            };
            let ratio_ema = match (&mut ratio_num, &mut ratio_den) {
                (Some(num), Some(den)) => {
                    let (eta, c) = p.ratio_params.unwrap();
                    let n = num.update(xdiff_sq / (eta * eta * c));
                    let d = den.update(0.5 * linalg::norm_sq(&g_sample));
                    Some(if d == 0.0 { f64::NAN } else { n / d })
                }
                _ => None,
            };

            trace.push(TraceRecord {
                step: k as u64,
                f_x,
                f_z,
                grad_sq_x,
                grad_sq_z,
                xdiff_sq,
                lyapunov,
                remainder,
                ratio_ema,
                eta: p.eta,
                c: p.c,
                alpha: p.alpha,
                beta: p.beta,
            });

            match p.advance {
                Advance::Sgd(eta) => sgd_step(&mut self.state, eta, &g_sample),
                Advance::Sgdm(params) => sgdm_step(&mut self.state, params, &g_sample),
                Advance::Spa(params) => spa_step(&mut self.state, params, &g_sample),
            }
            if let Some(xs) = iterates.as_mut() {
                xs.push(self.state.x.clone());
            }
            prev_fx_gap = f_x - self.fstar;
            if let (Some(eta), Some(c)) = (p.eta, p.c) {
                prev_plan_hyper = Some((eta, c));
            }
        }

        Ok(RunResult {
            trace,
            final_state: self.state,
            iterates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use approx::assert_relative_eq;

    fn scalar_state(form: Form, x0: f64) -> OptimizerState {
        OptimizerState::init(form, &[x0])
    }

    #[test]
    fn sgd_zero_gradient_leaves_x_unchanged() {
        let mut s = scalar_state(Form::Sgd, 1.5);
        sgd_step(&mut s, 0.1, &[0.0]);
        assert_eq!(s.x, vec![1.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn sgd_direct_substitution() {
        let mut s = scalar_state(Form::Sgd, 1.0);
        sgd_step(&mut s, 0.1, &[1.0]);
        assert_relative_eq!(s.x[0], 0.9, max_relative = 1e-15);
        assert_eq!(s.x_prev, vec![1.0]);
    }

    #[test]
    fn sgd_two_steps_match_the_linear_recursion() {
        // On f = 1/2 x^2 the noiseless map is x <- (1 - eta) x.
        let eta = 0.3;
        let mut s = scalar_state(Form::Sgd, 2.0);
        for _ in 0..2 {
            let g = s.x[0];
            sgd_step(&mut s, eta, &[g]);
        }
        assert_relative_eq!(
            s.x[0],
            (1.0 - eta) * (1.0 - eta) * 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sgdm_hand_iteration() {
        let p = SgdmParams::new(0.1, 0.9).unwrap();
        let mut s = scalar_state(Form::Sgdm, 1.0);
        let g = s.x[0];
        sgdm_step(&mut s, p, &[g]);
        assert_relative_eq!(s.aux[0], 1.0);
        assert!((s.x[0] - 0.9).abs() < 1e-15);
        let g = s.x[0];
        sgdm_step(&mut s, p, &[g]);
        assert!((s.aux[0] - 1.8).abs() < 1e-14);
        assert!((s.x[0] - 0.72).abs() < 1e-14);
    }

    #[test]
    fn sgdm_without_momentum_is_sgd() {
        let p = SgdmParams::new(0.05, 0.0).unwrap();
        let mut a = scalar_state(Form::Sgdm, 2.0);
        let mut b = scalar_state(Form::Sgd, 2.0);
        for g in [1.0, -0.5, 2.0] {
            sgdm_step(&mut a, p, &[g]);
            sgd_step(&mut b, 0.05, &[g]);
        }
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn sgdm_zero_gradient_zero_buffer_is_stationary() {
        let p = SgdmParams::new(0.1, 0.9).unwrap();
        let mut s = scalar_state(Form::Sgdm, 3.0);
        sgdm_step(&mut s, p, &[0.0]);
        assert_eq!(s.x, vec![3.0]);
    }

    #[test]
    fn spa_hand_iteration_matches_the_momentum_form() {
        let p = SpaParams::new(1.0, 0.1).unwrap();
        let mut s = scalar_state(Form::Spa, 1.0);
        let g = s.x[0];
        spa_step(&mut s, p, &[g]);
        assert_eq!(s.aux[0], 0.0);
        assert!((s.x[0] - 0.9).abs() < 1e-15);
        let g = s.x[0];
        spa_step(&mut s, p, &[g]);
        assert!((s.aux[0] + 0.9).abs() < 1e-14);
        assert!((s.x[0] - 0.72).abs() < 1e-14);
    }

    #[test]
    fn spa_with_full_averaging_is_sgd_bit_for_bit() {
        let mut a = scalar_state(Form::Spa, -1.7);
        let mut b = scalar_state(Form::Sgd, -1.7);
        for g in [0.3, -2.0, 0.9] {
            spa_step(&mut a, SpaParams { eta: 0.25, c: 1.0 }, &[g]);
            sgd_step(&mut b, 0.25, &[g]);
        }
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn spa_zero_gradient_pulls_x_toward_z() {
        let mut s = OptimizerState {
            x: vec![2.0],
            aux: vec![0.0],
            x_prev: vec![2.0],
            step: 5,
        };
        spa_step(&mut s, SpaParams { eta: 1.0, c: 0.25 }, &[0.0]);
        assert_eq!(s.aux, vec![0.0]);
        assert_relative_eq!(s.x[0], 1.5);
    }

    #[test]
    fn zero_step_run_returns_the_initial_state() {
        let oracle = QuadraticProblem::isotropic(2, 0.5).unwrap();
        let sched =
            AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta: 0.1, c: 0.5 }, 1).unwrap());
        let r = run(
            &oracle,
            Form::Spa,
            &sched,
            &[1.0, 2.0],
            0,
            0,
            &Diagnostics::default(),
        )
        .unwrap();
        assert!(r.trace.is_empty());
        assert_eq!(r.final_state.x, vec![1.0, 2.0]);
        assert_eq!(r.final_state.step, 0);
    }

    #[test]
    fn noiseless_sgd_at_one_over_l_descends_monotonically() {
        let oracle = QuadraticProblem::from_spectrum(vec![0.2, 1.0, 2.0], 0.0).unwrap();
        let eta = 1.0 / oracle.lipschitz().unwrap();
        let sched = AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta, c: 1.0 }, 50).unwrap());
        let r = run(
            &oracle,
            Form::Sgd,
            &sched,
            &[3.0, -2.0, 1.0],
            0,
            50,
            &Diagnostics::default(),
        )
        .unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].f_x <= w[0].f_x);
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let oracle = QuadraticProblem::from_spectrum(vec![0.5, 1.0], 0.7).unwrap();
        let sched =
            AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta: 0.3, c: 0.2 }, 100).unwrap());
        let diag = Diagnostics {
            lyapunov: true,
            remainder: true,
            ratio_decay: Some(0.99),
            record_iterates: true,
        };
        let a = run(&oracle, Form::Spa, &sched, &[2.0, -1.0], 7, 100, &diag).unwrap();
        let b = run(&oracle, Form::Spa, &sched, &[2.0, -1.0], 7, 100, &diag).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.iterates, b.iterates);
    }

    #[test]
    fn trace_rows_are_consecutive_from_zero() {
        let oracle = QuadraticProblem::isotropic(2, 0.1).unwrap();
        let sched =
            AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta: 0.5, c: 0.5 }, 10).unwrap());
        let r = run(
            &oracle,
            Form::Spa,
            &sched,
            &[1.0, 1.0],
            3,
            10,
            &Diagnostics::default(),
        )
        .unwrap();
        assert_eq!(r.trace.len(), 10);
        for (k, row) in r.trace.iter().enumerate() {
            assert_eq!(row.step, k as u64);
        }
    }

    #[test]
    fn short_schedules_are_rejected() {
        let oracle = QuadraticProblem::isotropic(1, 0.0).unwrap();
        let sched =
            AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta: 0.5, c: 0.5 }, 5).unwrap());
        assert!(run(
            &oracle,
            Form::Spa,
            &sched,
            &[1.0],
            0,
            6,
            &Diagnostics::default()
        )
        .is_err());
    }

    struct NoConstantsProblem;

    impl StochasticOracle for NoConstantsProblem {
        fn dim(&self) -> usize {
            1
        }
        fn capabilities(&self) -> crate::problems::Capabilities {
            crate::problems::Capabilities {
                has_lipschitz: false,
                has_optimum_value: false,
                has_noise_variance: false,
                has_second_moment: false,
            }
        }
        fn value(&self, x: &[f64]) -> crate::Result<f64> {
            Ok(x[0].powi(4))
        }
        fn grad(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
            Ok(vec![4.0 * x[0].powi(3)])
        }
        fn stoch_grad(
            &self,
            x: &[f64],
            _stream: &NoiseStream,
            _step: u64,
        ) -> crate::Result<Vec<f64>> {
            self.grad(x)
        }
    }

    #[test]
    fn potential_diagnostics_require_problem_constants() {
        let sched =
            AnySchedule::Spa(SpaSchedule::constant(SpaParams { eta: 0.1, c: 0.5 }, 5).unwrap());
        let diag = Diagnostics {
            lyapunov: true,
            ..Default::default()
        };
        let err = run(&NoConstantsProblem, Form::Spa, &sched, &[1.0], 0, 5, &diag).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCapability(_)));
    }

    #[test]
    fn potential_diagnostics_require_the_averaging_form() {
        let oracle = QuadraticProblem::isotropic(1, 0.0).unwrap();
        let sched = AnySchedule::Sgdm(
            SgdmSchedule::constant(SgdmParams::new(0.1, 0.9).unwrap(), 5).unwrap(),
        );
        let diag = Diagnostics {
            lyapunov: true,
            ..Default::default()
        };
        let err = run(&oracle, Form::Sgdm, &sched, &[1.0], 0, 5, &diag).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCapability(_)));
    }
}
