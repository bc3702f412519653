//! Loop-shaping synthesis, discrete controller design, the DC friction
//! mitigator and the control-rate executor.

mod design;
mod executor;
mod mitigator;
mod synthesis;

pub use design::{
    design_discrete, sample_hold_response, BandwidthPrediction, DesignReport, DesignTarget,
    SampledLoop, StabilityPoint,
};
pub use executor::{control_step, ControlLoop, ControlOutput, LoopMode, U_MAX, U_MIN};
pub use mitigator::{
    mitigator_step, MitigatorAction, MitigatorMode, MitigatorState, DEFAULT_WINDOW, U_NEUTRAL,
};
pub use synthesis::{closed_loop_T, ideal_controller_at, synthesize_ideal};
