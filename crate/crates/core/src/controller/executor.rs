//! Sample-synchronous control loop step.

use super::mitigator::{mitigator_step, MitigatorAction, MitigatorState, U_NEUTRAL};
use crate::lti::{DiscreteFilter, FilterRunner};
use crate::plant::ContactState;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Actuator current range, mA.
pub const U_MIN: f64 = 0.0;
pub const U_MAX: f64 = 5.0;

/// What one control step did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    /// Current to apply, mA.
    pub u: f64,
    pub tracking: bool,
    /// `f_r - f_m + f_star` while tracking.
    pub corrected_error: Option<f64>,
    pub fault: bool,
}

/// How the current is derived from the reference once the mitigator allows it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LoopMode {
    /// `u = 2.5 + C(z) e`.
    Closed,
    /// `u = 2.5 + f_r / p_nominal`, no feedback.
    Open { p_nominal: f64 },
}

/// Controller filter state, mitigator state and output latency line.
#[derive(Debug, Clone)]
pub struct ControlLoop {
    runner: FilterRunner,
    pub mitigator: MitigatorState,
    pub mode: LoopMode,
    pending: VecDeque<f64>,
    latency: usize,
    pub faults: usize,
}

impl ControlLoop {
    pub fn new(c: &DiscreteFilter, mode: LoopMode, n_window: usize, latency: usize) -> Self {
        Self {
            runner: c.runner(),
            mitigator: MitigatorState::new(n_window),
            mode,
            pending: VecDeque::from(vec![U_NEUTRAL; latency]),
            latency,
            faults: 0,
        }
    }

    pub fn filter_state(&self) -> &[f64] {
        self.runner.state()
    }

    fn neutral(&mut self) {
        self.pending.iter_mut().for_each(|u| *u = U_NEUTRAL);
    }

    /// One step at the control rate.
    ///
    /// The sign of the Coulomb estimate tells the slip direction. Friction
    /// added by the actuator always opposes motion, so in negative slip the
    /// error is negated before entering `C(z)` and the signed force tracks
    /// `f_r` in both directions.
    pub fn step(&mut self, f_r: f64, f_m: f64, contact: ContactState) -> ControlOutput {
        if !(f_r.is_finite() && f_m.is_finite()) {
            self.faults += 1;
            self.neutral();
            return ControlOutput {
                u: U_NEUTRAL,
                tracking: false,
                corrected_error: None,
                fault: true,
            };
        }
        let (ms, action) = mitigator_step(self.mitigator, contact, f_m);
        self.mitigator = ms;
        let MitigatorAction::Track { f_star } = action else {
            self.neutral();
            return ControlOutput {
                u: U_NEUTRAL,
                tracking: false,
                corrected_error: None,
                fault: false,
            };
        };
        let e = f_r - f_m + f_star;
        let dir = if f_star < 0.0 { -1.0 } else { 1.0 };
        let du = match self.mode {
            LoopMode::Closed => self.runner.step(dir * e),
            LoopMode::Open { p_nominal } => dir * f_r / p_nominal,
        };
        let mut u = U_NEUTRAL + du;
        if !u.is_finite() {
            self.faults += 1;
            u = U_NEUTRAL;
        }
        let u = u.clamp(U_MIN, U_MAX);
        let out = if self.latency == 0 {
            u
        } else {
            self.pending.push_back(u);
            self.pending.pop_front().unwrap_or(U_NEUTRAL)
        };
        ControlOutput {
            u: out,
            tracking: true,
            corrected_error: Some(e),
            fault: false,
        }
    }
}

/// Free-function form of [`ControlLoop::step`].
pub fn control_step(
    state: &mut ControlLoop,
    f_r: f64,
    f_m: f64,
    contact: ContactState,
) -> ControlOutput {
    state.step(f_r, f_m, contact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::MitigatorMode;

    fn pi_like() -> DiscreteFilter {
        DiscreteFilter::new(vec![2.0, -1.0], vec![1.0, -1.0], 10_000.0).unwrap()
    }

    fn into_tracking(cl: &mut ControlLoop, f_m: f64) {
        for _ in 0..100 {
            let o = cl.step(0.0, f_m, ContactState::FullSlip);
            assert_eq!(o.u, U_NEUTRAL);
        }
        assert_eq!(cl.mitigator.mode, MitigatorMode::Controlling);
    }

    #[test]
    fn zero_error_gives_neutral() {
        let mut cl = ControlLoop::new(&pi_like(), LoopMode::Closed, 100, 0);
        into_tracking(&mut cl, 0.25);
        let f_r = 0.25 - cl.mitigator.f_star;
        let o = cl.step(f_r, 0.25, ContactState::FullSlip);
        assert!(o.tracking);
        assert!((o.u - 2.5).abs() < 1e-12);
    }

    #[test]
    fn step_error_follows_filter_step_response() {
        let c = pi_like();
        let mut cl = ControlLoop::new(&c, LoopMode::Closed, 100, 0);
        into_tracking(&mut cl, 0.25);
        let mut reference = c.runner();
        for _ in 0..5 {
            let o = cl.step(0.01, 0.25, ContactState::FullSlip);
            assert!((o.u - (2.5 + reference.step(0.01))).abs() < 1e-15);
        }
    }

    #[test]
    fn saturation_and_faults() {
        let mut cl = ControlLoop::new(&pi_like(), LoopMode::Closed, 100, 0);
        into_tracking(&mut cl, 0.25);
        assert_eq!(cl.step(100.0, 0.25, ContactState::FullSlip).u, 5.0);
        assert_eq!(cl.step(-1e6, 0.25, ContactState::FullSlip).u, 0.0);
        let o = cl.step(f64::NAN, 0.25, ContactState::FullSlip);
        assert!(o.fault);
        assert_eq!(o.u, 2.5);
    }

    #[test]
    fn state_frozen_while_neutral() {
        let mut cl = ControlLoop::new(&pi_like(), LoopMode::Closed, 100, 0);
        into_tracking(&mut cl, 0.25);
        cl.step(0.01, 0.25, ContactState::FullSlip);
        let frozen = cl.filter_state().to_vec();
        for _ in 0..50 {
            assert_eq!(cl.step(0.3, 0.0, ContactState::Stuck).u, 2.5);
        }
        assert_eq!(cl.filter_state(), frozen.as_slice());
    }
}
