//! DC friction mitigator.
//!
//! At each full-slip onset the mean measured friction over a short window is
//! taken as the Coulomb baseline `f_star` and subtracted from the error for
//! the rest of the swipe. Outside full slip the actuator is held neutral.

use crate::plant::ContactState;
use serde::{Deserialize, Serialize};

/// Neutral actuator current, mA.
pub const U_NEUTRAL: f64 = 2.5;
/// Default estimation window: 10 ms at 10 kHz.
pub const DEFAULT_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MitigatorMode {
    Neutral,
    Sampling,
    Controlling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigatorState {
    pub mode: MitigatorMode,
    pub n: usize,
    pub f_star: f64,
    pub n_window: usize,
}

impl Default for MitigatorState {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl MitigatorState {
    pub fn new(n_window: usize) -> Self {
        Self {
            mode: MitigatorMode::Neutral,
            n: 0,
            f_star: 0.0,
            n_window: n_window.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MitigatorAction {
    /// Output the neutral current.
    ForceNeutral,
    /// Run the controller on `f_r - f_m + f_star`.
    Track { f_star: f64 },
}

pub fn mitigator_step(
    ms: MitigatorState,
    contact: ContactState,
    f_m: f64,
) -> (MitigatorState, MitigatorAction) {
    if contact != ContactState::FullSlip {
        return (
            MitigatorState::new(ms.n_window),
            MitigatorAction::ForceNeutral,
        );
    }
    match ms.mode {
        MitigatorMode::Controlling => (ms, MitigatorAction::Track { f_star: ms.f_star }),
        MitigatorMode::Neutral | MitigatorMode::Sampling => {
            let (n, f_star) = if ms.mode == MitigatorMode::Neutral {
                (0, 0.0)
            } else {
                (ms.n, ms.f_star)
            };
            let f_star = f_star + f_m / ms.n_window as f64;
            let n = n + 1;
            let mode = if n >= ms.n_window {
                MitigatorMode::Controlling
            } else {
                MitigatorMode::Sampling
            };
            (
                MitigatorState {
                    mode,
                    n,
                    f_star,
                    n_window: ms.n_window,
                },
                MitigatorAction::ForceNeutral,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stuck_resets() {
        let ms = MitigatorState {
            mode: MitigatorMode::Controlling,
            n: 100,
            f_star: 0.3,
            n_window: 100,
        };
        let (ms, act) = mitigator_step(ms, ContactState::Stuck, 0.2);
        assert_eq!(act, MitigatorAction::ForceNeutral);
        assert_eq!(ms.mode, MitigatorMode::Neutral);
        assert_eq!(ms.f_star, 0.0);
        assert_eq!(ms.n, 0);
    }

    #[test]
    fn window_mean_of_constant() {
        let mut ms = MitigatorState::default();
        for k in 0..100 {
            let (next, act) = mitigator_step(ms, ContactState::FullSlip, 0.3);
            assert_eq!(act, MitigatorAction::ForceNeutral, "sample {k}");
            ms = next;
        }
        assert_eq!(ms.mode, MitigatorMode::Controlling);
        assert!((ms.f_star - 0.3).abs() < 1e-12);
        let (_, act) = mitigator_step(ms, ContactState::FullSlip, 0.1);
        assert_eq!(act, MitigatorAction::Track { f_star: ms.f_star });
    }
}
