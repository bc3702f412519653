//! Virtual finger/tribometer.
//!
//! Per control period the plant runs `internal_fs / control_fs` substeps.
//! Each substep evaluates the contact regime from the swipe kinematics,
//! forms the friction force (Coulomb baseline plus electroadhesion plus 1/f
//! noise), and pushes it through the measurement chain `L G`, discretized
//! with a zero-order hold at the substep rate. The ADC reading at the start
//! of a control period is what the controller sees.

mod config;
mod contact;
mod kinematics;
mod noise;

pub use config::{default_g, default_l, Fidelity, PlantConfig};
pub use contact::{ContactState, Direction};
pub use kinematics::{Kinematics, LoadProfile};
pub use noise::PinkNoise;

use crate::error::{Error, Result};
use crate::lti::{zoh_discretize, DiscreteStateSpace};
use crate::trace::{Trace, TraceRow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{FRAC_PI_2, PI};

/// Mid-tread quantizer: rounds to the nearest multiple of `lsb` and clamps.
pub fn quantize(x: f64, lsb: f64, lo: f64, hi: f64) -> f64 {
    ((x / lsb).round() * lsb).clamp(lo, hi)
}

/// Everything that evolves while the plant runs.
#[derive(Debug, Clone)]
pub struct PlantState {
    pub contact: ContactState,
    pub position: f64,
    pub velocity: f64,
    /// Current actuation gain, N/mA.
    pub p_t: f64,
    /// Relative gain drift (Ornstein-Uhlenbeck).
    pub drift: f64,
    /// Measurement chain `L G`.
    pub chain: DiscreteStateSpace,
    pub noise: PinkNoise,
    /// Substeps taken since start.
    pub tick: u64,
    rng: ChaCha8Rng,
}

impl PlantState {
    pub fn elapsed(&self, internal_fs: f64) -> f64 {
        self.tick as f64 / internal_fs
    }
}

/// Output of one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutput {
    /// ADC reading at the end of the period, N.
    pub f_m: f64,
    /// Normal load at the end of the period, N.
    pub w: f64,
    /// Contact regime at the end of the period.
    pub contact: ContactState,
}

/// A configured plant together with its state.
#[derive(Debug, Clone)]
pub struct Plant {
    pub cfg: PlantConfig,
    pub state: PlantState,
    internal_fs: f64,
    substeps: usize,
    adc_lsb: f64,
    dac_lsb: f64,
    drift_decay: f64,
    drift_kick: f64,
}

pub fn init_plant(cfg: &PlantConfig, seed: u64) -> Result<Plant> {
    cfg.validate()?;
    let internal_fs = cfg.effective_internal_fs();
    let chain = zoh_discretize(&cfg.g.mul(&cfg.l), internal_fs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = PinkNoise::new(
        cfg.noise_anchor_10hz,
        cfg.noise_anchor_1khz,
        cfg.noise_corner_hz,
        internal_fs,
    );
    noise.randomize(&mut rng);
    let dt = 1.0 / cfg.control_fs;
    let decay = (-dt / cfg.p_drift_tau_s).exp();
    let mut plant = Plant {
        cfg: cfg.clone(),
        state: PlantState {
            contact: ContactState::Stuck,
            position: cfg.kinematics.position(0.0),
            velocity: cfg.kinematics.velocity(0.0),
            p_t: cfg.p_nominal,
            drift: 0.0,
            chain,
            noise,
            tick: 0,
            rng,
        },
        internal_fs,
        substeps: cfg.substeps(),
        adc_lsb: 2.0 * cfg.adc_full_scale / 2f64.powi(cfg.adc_bits as i32),
        dac_lsb: cfg.dac_full_scale / 2f64.powi(cfg.dac_bits as i32),
        drift_decay: decay,
        drift_kick: cfg.p_drift_std * (1.0 - decay * decay).sqrt(),
    };
    // measurement chain at rest under the initial force
    let f0 = plant.friction_at(0.0, 0.0) + plant.state.noise.value();
    plant.state.chain.settle(f0);
    Ok(plant)
}

impl Plant {
    pub fn internal_fs(&self) -> f64 {
        self.internal_fs
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn time(&self) -> f64 {
        self.state.elapsed(self.internal_fs)
    }

    /// Contact regime at time `t`.
    pub fn contact_at(&self, t: f64) -> ContactState {
        let Some((t0, _)) = self.cfg.kinematics.last_reversal(t) else {
            return ContactState::Stuck;
        };
        let since = t - t0;
        if since < self.cfg.stick_dwell_s {
            ContactState::Stuck
        } else if since < self.cfg.stick_dwell_s + self.cfg.partial_slip_s {
            ContactState::PartialSlip
        } else {
            ContactState::FullSlip
        }
    }

    /// Slip direction at `t` (+1 or -1; +1 when motionless).
    pub fn direction_at(&self, t: f64) -> f64 {
        self.cfg.kinematics.last_reversal(t).map_or(1.0, |(_, d)| d)
    }

    /// Electroadhesion force for drive `u` (already through the DAC).
    fn adhesion(&self, u: f64, t: f64) -> f64 {
        match self.cfg.fidelity {
            Fidelity::Envelope => self.state.p_t * u,
            Fidelity::Carrier => {
                let c = (2.0 * PI * self.cfg.carrier_freq * t).sin();
                self.state.p_t * FRAC_PI_2 * (u * c).abs()
            }
        }
    }

    /// Noise-free friction force at `t` with electroadhesion force `fa`.
    fn friction_at(&self, t: f64, fa: f64) -> f64 {
        let k = &self.cfg.kinematics;
        let Some((t0, dir)) = k.last_reversal(t) else {
            return 0.0;
        };
        let mu = self.cfg.mu;
        let dwell = self.cfg.stick_dwell_s;
        let coulomb = dir * (mu * self.cfg.w_profile.at(t) + fa);
        match self.contact_at(t) {
            ContactState::Stuck => {
                let x0 = k.position(t0);
                let span = (k.position(t0 + dwell) - x0).abs();
                let breakaway = self.cfg.breakaway_ratio * mu * self.cfg.w_profile.at(t0 + dwell);
                if span > 0.0 {
                    breakaway * (k.position(t) - x0) / span
                } else {
                    0.0
                }
            }
            ContactState::PartialSlip => {
                let breakaway =
                    dir * self.cfg.breakaway_ratio * mu * self.cfg.w_profile.at(t0 + dwell);
                let r = ((t - t0 - dwell) / self.cfg.partial_slip_s).clamp(0.0, 1.0);
                (1.0 - r) * breakaway + r * coulomb
            }
            ContactState::FullSlip => coulomb,
        }
    }

    fn update_gain(&mut self, t: f64) {
        let z: f64 = StandardNormal.sample(&mut self.state.rng);
        self.state.drift = self.state.drift * self.drift_decay + self.drift_kick * z;
        let dir = self.direction_at(t);
        let p = self.cfg.p_nominal
            * (1.0 + self.cfg.direction_asymmetry * dir)
            * (1.0 + self.state.drift);
        self.state.p_t = p.clamp(self.cfg.p_min, self.cfg.p_max);
    }

    fn read_adc(&self) -> f64 {
        let fs = self.cfg.adc_full_scale;
        quantize(
            self.state.chain.output(0.0),
            self.adc_lsb,
            -fs,
            fs - self.adc_lsb,
        )
    }

    fn dac(&self, u: f64) -> f64 {
        quantize(u, self.dac_lsb, 0.0, self.cfg.dac_full_scale - self.dac_lsb)
    }

    /// Current ADC reading, contact and load, without advancing.
    pub fn observe(&self) -> PlantOutput {
        let t = self.time();
        PlantOutput {
            f_m: self.read_adc(),
            w: self.cfg.w_profile.at(t),
            contact: self.contact_at(t),
        }
    }

    /// Advances one control period with drive `u` (mA) held. When `trace`
    /// is given, one row is appended every `trace_stride` substeps with
    /// `f_r` recorded alongside.
    pub fn step(
        &mut self,
        u: f64,
        f_r: f64,
        mut trace: Option<(&mut Trace, usize)>,
    ) -> Result<PlantOutput> {
        if !u.is_finite() {
            return Err(Error::Actuation(format!("non-finite drive current {u}")));
        }
        let u_dac = self.dac(u);
        let t_start = self.time();
        self.update_gain(t_start);
        for _ in 0..self.substeps {
            let t = self.state.tick as f64 / self.internal_fs;
            let fa = self.adhesion(u_dac, t);
            let noise = self.state.noise.step(&mut self.state.rng);
            let f_f = self.friction_at(t, fa) + noise;
            if let Some((tr, stride)) = trace.as_mut() {
                if self.state.tick.is_multiple_of(*stride as u64) {
                    tr.push(TraceRow {
                        t,
                        f_r,
                        f_m: self.read_adc(),
                        f_f,
                        u,
                        w: self.cfg.w_profile.at(t),
                        contact: self.contact_at(t),
                        p_t: self.state.p_t,
                    });
                }
            }
            self.state.chain.step(f_f);
            self.state.tick += 1;
        }
        let t = self.time();
        self.state.position = self.cfg.kinematics.position(t);
        self.state.velocity = self.cfg.kinematics.velocity(t);
        self.state.contact = self.contact_at(t);
        if !self.state.chain.state().iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence {
                index: self.state.tick as usize,
            });
        }
        Ok(self.observe())
    }
}

/// State-in/state-out form of [`Plant::step`] without tracing.
pub fn plant_step(mut plant: Plant, u: f64) -> Result<(Plant, PlantOutput)> {
    let out = plant.step(u, 0.0, None)?;
    Ok((plant, out))
}
