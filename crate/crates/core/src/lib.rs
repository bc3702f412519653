//! Closed-loop friction control for electroadhesion surface haptics.
//!
//! The crate covers the whole pipeline: characterizing the measurement chain
//! and actuation gain ([`sysid`]), synthesizing a loop-shaping controller and
//! the DC friction mitigator ([`controller`]), a virtual finger/tribometer
//! plant to run it against ([`plant`]), and the post-hoc tracking analysis
//! ([`analysis`]). [`experiment`] ties them together into reproducible runs.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod lti;
pub mod optim;
pub mod plant;
pub mod signals;
pub mod sysid;
pub mod trace;

pub use error::{Error, Result};
