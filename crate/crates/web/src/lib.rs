//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the page needs no generated TypeScript types. The `*_json` functions hold
//! the logic and are callable (and tested) natively.

use frictionloop::analysis::{amplitude_spectrum, evaluate_tracking};
use frictionloop::controller::{design_discrete, DesignTarget, SampledLoop};
use frictionloop::experiment::{build_controller, run_loop, ExperimentConfig, RunMode};
use frictionloop::lti::{log_grid, RationalTF};
use frictionloop::plant::PlantConfig;
use frictionloop::signals::{texture_by_label, ReferenceSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest simulation the page may request, s.
const MAX_SECONDS: f64 = 10.0;
/// Points per plotted series.
const PLOT_POINTS: usize = 3000;

#[derive(Serialize)]
struct DesignView {
    b: Vec<f64>,
    a: Vec<f64>,
    fs: f64,
    p: f64,
    stable: bool,
    bandwidth_hz: Option<f64>,
    freqs: Vec<f64>,
    mag_db: Vec<f64>,
    phase_deg: Vec<f64>,
}

#[derive(Serialize)]
struct RunView {
    t: Vec<f64>,
    f_r: Vec<f64>,
    f_m: Vec<f64>,
    r2: Option<f64>,
    lag_ms: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct SpectrumView {
    label: String,
    freqs: Vec<f64>,
    amplitude: Vec<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Designs the default controller with the given gain backoff and evaluates
/// the closed loop at actuation gain `p` (N/mA).
pub fn design_json(backoff: f64, p: f64) -> Result<String, String> {
    let target = DesignTarget {
        backoff,
        ..DesignTarget::default()
    };
    let plant = PlantConfig::default();
    let (c, _) = design_discrete(
        &target,
        &RationalTF::constant(target.p_design),
        &plant.l,
        &plant.g,
    )
    .map_err(|e| e.to_string())?;
    let sl = SampledLoop::new(&plant.l, &plant.g, target.fs, target.latency_samples)
        .map_err(|e| e.to_string())?;
    let freqs = log_grid(1.0, 4900.0, 200);
    let t: Vec<_> = freqs.iter().map(|&f| sl.t_at(&c, p, f)).collect();
    to_json(&DesignView {
        b: c.b().to_vec(),
        a: c.a().to_vec(),
        fs: c.fs(),
        p,
        stable: sl.is_stable(&c, p),
        bandwidth_hz: sl.bandwidth(&c, p),
        mag_db: t.iter().map(|z| 20.0 * z.norm().log10()).collect(),
        phase_deg: t.iter().map(|z| z.arg().to_degrees()).collect(),
        freqs,
    })
}

/// Simulates a run against `reference` ("square" or a texture label) and
/// returns decimated force traces with the tracking score.
pub fn simulate_json(
    reference: &str,
    mode: &str,
    seconds: f64,
    seed: u64,
) -> Result<String, String> {
    if !(seconds > 0.0 && seconds <= MAX_SECONDS) {
        return Err(format!("duration must be in (0, {MAX_SECONDS}] s"));
    }
    let reference = if reference.eq_ignore_ascii_case("square") {
        ReferenceSpec::default()
    } else {
        texture_by_label(reference).map_err(|e| e.to_string())?;
        ReferenceSpec::Texture {
            label: reference.to_string(),
            rms: None,
        }
    };
    let cfg = ExperimentConfig {
        reference,
        duration_s: seconds,
        seed,
        mode: mode.parse::<RunMode>().map_err(|e| e.to_string())?,
        ..ExperimentConfig::default()
    };
    let design = build_controller(&cfg).map_err(|e| e.to_string())?;
    let run = run_loop(&cfg, &design.controller).map_err(|e| e.to_string())?;
    let trace = &run.trace;
    let (r2, lag_ms, note) = match cfg
        .tracking_options()
        .and_then(|o| evaluate_tracking(trace, &o))
    {
        Ok(r) => (Some(r.r2), Some(r.lag_s * 1e3), run.abort.clone()),
        Err(e) => (
            None,
            None,
            Some(run.abort.clone().unwrap_or_else(|| e.to_string())),
        ),
    };
    let step = trace.t.len().div_ceil(PLOT_POINTS).max(1);
    let pick = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<_>>();
    to_json(&RunView {
        t: pick(&trace.t),
        f_r: pick(&trace.f_r),
        f_m: pick(&trace.f_m),
        r2,
        lag_ms,
        note,
    })
}

/// Amplitude spectrum of two seconds of a synthetic texture.
pub fn texture_spectrum_json(label: &str, seed: u64) -> Result<String, String> {
    let profile = texture_by_label(label).map_err(|e| e.to_string())?;
    let x = profile
        .generate(2.0, 10_000.0, seed)
        .map_err(|e| e.to_string())?;
    let sp = amplitude_spectrum(&x, 0.1).map_err(|e| e.to_string())?;
    let keep: Vec<usize> = (0..sp.freqs.len())
        .filter(|&i| (5.0..=2000.0).contains(&sp.freqs[i]))
        .collect();
    to_json(&SpectrumView {
        label: profile.label.to_string(),
        freqs: keep.iter().map(|&i| sp.freqs[i]).collect(),
        amplitude: keep.iter().map(|&i| sp.amplitude[i]).collect(),
    })
}

#[wasm_bindgen]
pub fn design(backoff: f64, p: f64) -> Result<String, JsValue> {
    design_json(backoff, p).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(reference: &str, mode: &str, seconds: f64, seed: u32) -> Result<String, JsValue> {
    simulate_json(reference, mode, seconds, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn texture_spectrum(label: &str, seed: u32) -> Result<String, JsValue> {
    texture_spectrum_json(label, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> serde_json::Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn default_design_is_stable_with_wide_bandwidth() {
        let v = parse(design_json(2.5, 0.06).unwrap());
        assert_eq!(v["stable"], true);
        assert!(v["bandwidth_hz"].as_f64().unwrap() > 500.0);
        assert_eq!(v["freqs"].as_array().unwrap().len(), 200);
    }

    #[test]
    fn closed_loop_square_tracks() {
        let v = parse(simulate_json("square", "closed", 3.0, 1).unwrap());
        assert!(v["r2"].as_f64().unwrap() > 0.9);
        assert!(v["t"].as_array().unwrap().len() <= PLOT_POINTS);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(simulate_json("nope", "closed", 1.0, 1).is_err());
        assert!(simulate_json("square", "sideways", 1.0, 1).is_err());
        assert!(simulate_json("square", "closed", 60.0, 1).is_err());
        assert!(texture_spectrum_json("XX", 0).is_err());
    }

    #[test]
    fn texture_spectrum_covers_the_band() {
        let v = parse(texture_spectrum_json("MS", 3).unwrap());
        let f = v["freqs"].as_array().unwrap();
        assert!(f.first().unwrap().as_f64().unwrap() <= 10.0);
        assert!(f.last().unwrap().as_f64().unwrap() >= 1000.0);
    }
}
