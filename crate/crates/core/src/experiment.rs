//! Experiment orchestration: build the controller, run the loop against the
//! plant, analyze, and write one directory per run.

use crate::analysis::{
    evaluate_tracking, sensitivity_row, swipe_responses, SensitivityTable, TrackingOptions,
    TrackingReport, REPORT_SCHEMA_VERSION,
};
use crate::controller::{
    design_discrete, ControlLoop, DesignReport, DesignTarget, LoopMode, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::lti::{log_grid, zoh_discretize, DiscreteFilter, RationalTF, Signal, Unit};
use crate::plant::{init_plant, Direction, Kinematics, PlantConfig};
use crate::signals::{sweep_grid, ReferenceSpec};
use crate::sysid::{
    average_impulse_spectra, estimate_gain, fit_second_order, GainEstimate, GainTrial,
    ImpulseAverage, SecondOrderFit,
};
use crate::trace::{Trace, TraceFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Closed,
    Open,
}

impl std::str::FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(RunMode::Closed),
            "open" => Ok(RunMode::Open),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Either a target to design against or a ready-made filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    Design(DesignTarget),
    Filter(DiscreteFilter),
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Design(DesignTarget::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub trace_format: TraceFormat,
    /// Plant substeps per logged row; `None` logs once per control period.
    pub trace_stride: Option<usize>,
    /// Sweeps keep per-condition traces only when set.
    pub sweep_traces: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trace_format: TraceFormat::Csv,
            trace_stride: None,
            sweep_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub controller: ControllerSpec,
    pub reference: ReferenceSpec,
    pub duration_s: f64,
    pub seed: u64,
    pub mode: RunMode,
    /// Samples averaged by the friction mitigator.
    pub mitigator_window: usize,
    /// Control periods between computing and applying `u`.
    pub loop_latency: usize,
    /// `None` picks the preset matching the reference.
    pub tracking: Option<TrackingOptions>,
    pub outputs: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            controller: ControllerSpec::default(),
            reference: ReferenceSpec::default(),
            duration_s: 10.0,
            seed: 0,
            mode: RunMode::Closed,
            mitigator_window: DEFAULT_WINDOW,
            loop_latency: 0,
            tracking: None,
            outputs: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("duration must be > 0".into()));
        }
        if self.mitigator_window == 0 {
            return Err(Error::Config("mitigator window must be >= 1".into()));
        }
        if self.outputs.trace_stride == Some(0) {
            return Err(Error::Config("trace stride must be >= 1".into()));
        }
        self.reference.validate(self.plant.control_fs)?;
        let c_fs = match &self.controller {
            ControllerSpec::Design(t) => {
                t.validate()?;
                t.fs
            }
            ControllerSpec::Filter(f) => f.fs(),
        };
        if (c_fs - self.plant.control_fs).abs() > 1e-9 * c_fs {
            return Err(Error::Config(format!(
                "controller rate {c_fs} Hz differs from control rate {} Hz",
                self.plant.control_fs
            )));
        }
        Ok(())
    }

    pub fn tracking_options(&self) -> Result<TrackingOptions> {
        match &self.tracking {
            Some(t) => Ok(t.clone()),
            None => TrackingOptions::by_name(self.reference.tracking_preset()),
        }
    }

    fn trace_stride(&self) -> usize {
        self.outputs
            .trace_stride
            .unwrap_or_else(|| self.plant.substeps())
    }
}

/// Design record written next to each run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub schema_version: u32,
    pub controller: DiscreteFilter,
    pub report: Option<DesignReport>,
}

/// Resolves the controller for `cfg`, designing it when needed.
pub fn build_controller(cfg: &ExperimentConfig) -> Result<DesignRecord> {
    let (controller, report) = match &cfg.controller {
        ControllerSpec::Filter(f) => (f.clone(), None),
        ControllerSpec::Design(t) => {
            let p = RationalTF::constant(cfg.plant.p_nominal);
            let (c, r) = design_discrete(t, &p, &cfg.plant.l, &cfg.plant.g)?;
            (c, Some(r))
        }
    };
    Ok(DesignRecord {
        schema_version: REPORT_SCHEMA_VERSION,
        controller,
        report,
    })
}

/// In-memory result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub faults: usize,
    /// Set when the plant aborted the run; `trace` then holds the prefix.
    pub abort: Option<String>,
}

/// Runs the control loop for `cfg.duration_s` with controller `c`.
pub fn run_loop(cfg: &ExperimentConfig, c: &DiscreteFilter) -> Result<RunOutput> {
    let mut plant = init_plant(&cfg.plant, cfg.seed)?;
    let fs = cfg.plant.control_fs;
    let reference = cfg.reference.generate(cfg.duration_s, fs, cfg.seed)?;
    let mode = match cfg.mode {
        RunMode::Closed => LoopMode::Closed,
        RunMode::Open => LoopMode::Open {
            p_nominal: cfg.plant.p_nominal,
        },
    };
    let mut ctl = ControlLoop::new(c, mode, cfg.mitigator_window, cfg.loop_latency);
    let stride = cfg.trace_stride();
    let rows = reference.len() * plant.substeps() / stride + 1;
    let mut trace = Trace::with_capacity(plant.internal_fs() / stride as f64, rows);
    let mut obs = plant.observe();
    for &f_r in reference.samples() {
        let out = ctl.step(f_r, obs.f_m, obs.contact);
        match plant.step(out.u, f_r, Some((&mut trace, stride))) {
            Ok(o) => obs = o,
            Err(e) => {
                return Ok(RunOutput {
                    trace,
                    faults: ctl.faults,
                    abort: Some(e.to_string()),
                })
            }
        }
    }
    Ok(RunOutput {
        trace,
        faults: ctl.faults,
        abort: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub mode: RunMode,
    pub duration_s: f64,
    pub trace_rows: usize,
    pub trace_fs: f64,
    pub controller_faults: usize,
    pub tracking_r2: Option<f64>,
    pub tracking_lag_s: Option<f64>,
    pub warnings: Vec<String>,
}

/// Paths and results of a finished run.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub dir: PathBuf,
    pub trace_path: PathBuf,
    pub summary: RunSummary,
    pub tracking: Option<TrackingReport>,
    pub design: DesignRecord,
}

pub const CONFIG_FILE: &str = "config.json";
pub const DESIGN_FILE: &str = "design.json";
pub const TRACKING_FILE: &str = "tracking_report.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SENSITIVITY_JSON: &str = "sensitivity.json";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Re-runs the tracking analysis on a stored trace.
pub fn analyze_trace(trace: &Trace, opts: &TrackingOptions) -> Result<TrackingReport> {
    evaluate_tracking(trace, opts)
}

/// Runs `cfg` and writes `config.json`, `design.json`, the trace,
/// `tracking_report.json` and `summary.json` into `dir`.
///
/// A rejected design aborts before anything runs. A plant fault writes the
/// trace prefix and the summary, then returns the fault.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentRecord> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let design = build_controller(cfg)?;
    write_json(&dir.join(DESIGN_FILE), &design)?;
    let run = run_loop(cfg, &design.controller)?;
    let trace_path = dir.join(format!("trace.{}", cfg.outputs.trace_format.extension()));
    run.trace.save(&trace_path)?;
    let mut warnings = Vec::new();
    let tracking = if run.abort.is_some() || matches!(cfg.reference, ReferenceSpec::Zero) {
        None
    } else {
        match evaluate_tracking(&run.trace, &cfg.tracking_options()?) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("tracking analysis skipped: {e}"));
                None
            }
        }
    };
    if let Some(t) = &tracking {
        write_json(&dir.join(TRACKING_FILE), t)?;
    }
    if let Some(msg) = &run.abort {
        warnings.push(format!("run aborted: {msg}"));
    }
    let summary = RunSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        mode: cfg.mode,
        duration_s: cfg.duration_s,
        trace_rows: run.trace.len(),
        trace_fs: run.trace.fs,
        controller_faults: run.faults,
        tracking_r2: tracking.as_ref().map(|t| t.r2),
        tracking_lag_s: tracking.as_ref().map(|t| t.lag_s),
        warnings,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    if let Some(msg) = run.abort {
        return Err(Error::Actuation(format!(
            "plant fault, trace prefix kept in {}: {msg}",
            dir.display()
        )));
    }
    Ok(ExperimentRecord {
        dir: dir.to_path_buf(),
        trace_path,
        summary,
        tracking,
        design,
    })
}

/// Seed of sweep condition `index`.
pub fn condition_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// Configuration of one sweep condition: `base` with a sine reference.
pub fn condition_config(
    base: &ExperimentConfig,
    index: usize,
    frequency: f64,
    amplitude: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        reference: ReferenceSpec::Sine {
            frequency,
            amplitude,
        },
        seed: condition_seed(base.seed, index),
        ..base.clone()
    }
}

/// Per-swipe responses of every condition in `grid`, in grid order.
pub fn sweep_responses(
    base: &ExperimentConfig,
    controller: &DiscreteFilter,
    grid: &[(f64, f64)],
    keep_traces: Option<&Path>,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let one = |(i, &(f, a)): (usize, &(f64, f64))| -> Result<Vec<(f64, f64)>> {
        let cfg = condition_config(base, i, f, a);
        let run = run_loop(&cfg, controller)?;
        if let Some(msg) = run.abort {
            return Err(Error::Actuation(format!(
                "condition {f:.1} Hz / {a} N: {msg}"
            )));
        }
        if let Some(dir) = keep_traces {
            let sub = dir.join(format!("cond_{i:03}"));
            fs::create_dir_all(&sub)?;
            write_json(&sub.join(CONFIG_FILE), &cfg)?;
            run.trace
                .save(&sub.join(format!("trace.{}", cfg.outputs.trace_format.extension())))?;
        }
        swipe_responses(&run.trace, f)
    };
    #[cfg(feature = "parallel")]
    let out: Vec<Result<Vec<(f64, f64)>>> = {
        use rayon::prelude::*;
        grid.par_iter().enumerate().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<Vec<(f64, f64)>>> = grid.iter().enumerate().map(one).collect();
    out.into_iter().collect()
}

/// Sensitivity sweep over the 20 x 4 grid; every condition is a
/// `base.duration_s` run with a sine reference.
pub fn run_sweep(base: &ExperimentConfig, dir: &Path) -> Result<SensitivityTable> {
    run_sweep_grid(base, &sweep_grid(), dir)
}

pub fn run_sweep_grid(
    base: &ExperimentConfig,
    grid: &[(f64, f64)],
    dir: &Path,
) -> Result<SensitivityTable> {
    base.validate()?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join(CONFIG_FILE), base)?;
    let design = build_controller(base)?;
    write_json(&dir.join(DESIGN_FILE), &design)?;
    let keep = base.outputs.sweep_traces.then_some(dir);
    let responses = sweep_responses(base, &design.controller, grid, keep)?;
    let table = SensitivityTable {
        schema_version: REPORT_SCHEMA_VERSION,
        rows: grid
            .iter()
            .zip(&responses)
            .map(|(&(f, a), r)| sensitivity_row(f, a, r))
            .collect(),
    };
    write_json(&dir.join(SENSITIVITY_JSON), &table)?;
    table.write_csv(fs::File::create(dir.join(SENSITIVITY_CSV))?)?;
    Ok(table)
}

/// Drives `cfg`'s plant with `2.5 + amplitude sin(2 pi f t)` mA while the
/// finger slides steadily in `direction`, and returns the drive and the
/// measured force after `settle_s` of the `duration_s` record.
pub fn simulate_gain_trial(
    cfg: &PlantConfig,
    frequency: f64,
    amplitude: f64,
    direction: Direction,
    duration_s: f64,
    settle_s: f64,
    seed: u64,
) -> Result<GainTrial> {
    let cfg = PlantConfig {
        kinematics: Kinematics::Constant {
            velocity: 0.02 * direction.sign(),
        },
        ..cfg.clone()
    };
    let mut plant = init_plant(&cfg, seed)?;
    let fs = cfg.control_fs;
    let n = (duration_s * fs).round() as usize;
    let mut trace = Trace::with_capacity(fs, n);
    for k in 0..n {
        let u = 2.5 + amplitude * (2.0 * PI * frequency * k as f64 / fs).sin();
        plant.step(u, 0.0, Some((&mut trace, cfg.substeps())))?;
    }
    let skip = ((settle_s * fs).round() as usize).min(n);
    let cut = |s: Signal| s.slice(skip, s.len());
    Ok(GainTrial {
        drive: cut(trace.current()?),
        force: cut(trace.measured()?),
        frequency,
        direction,
    })
}

/// Twenty trials, ten log-spaced frequencies from 20 to 200 Hz in each
/// direction, 2.5 s each with a 1 mA modulation.
pub fn simulate_gain_trials(cfg: &PlantConfig, seed: u64) -> Result<Vec<GainTrial>> {
    let freqs = log_grid(20.0, 200.0, 10);
    (0..20)
        .map(|i| {
            let dir = if i < 10 {
                Direction::Right
            } else {
                Direction::Left
            };
            simulate_gain_trial(
                cfg,
                freqs[i % 10],
                1.0,
                dir,
                2.5,
                0.5,
                seed.wrapping_add(i as u64),
            )
        })
        .collect()
}

/// Hammer-tap records through the plant's `G` at 60 kHz: a 50 us half-sine
/// of random strength in `strength` after 20 ms of quiet, plus uniform
/// sensor noise of `noise` N.
pub fn simulate_impulses(
    cfg: &PlantConfig,
    count: usize,
    strength: (f64, f64),
    noise: f64,
    seed: u64,
) -> Result<Vec<Signal>> {
    let fs = 60_000.0;
    let g = zoh_discretize(&cfg.g, fs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (onset, width, n) = (1200, 3, 12_000);
    (0..count)
        .map(|_| {
            let a: f64 = rng.random_range(strength.0..strength.1);
            let mut chain = g.clone();
            let x = (0..n)
                .map(|i| {
                    let pulse = if (onset..onset + width).contains(&i) {
                        a * (PI * (i - onset) as f64 / width as f64).sin()
                    } else {
                        0.0
                    };
                    chain.step(pulse) + noise * rng.random_range(-1.0..1.0)
                })
                .collect();
            Signal::new(x, fs, Unit::Newton)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseCharacterization {
    pub average: ImpulseAverage,
    pub fit: SecondOrderFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub schema_version: u32,
    pub gain: Option<GainEstimate>,
    pub impulse: Option<ImpulseCharacterization>,
}

/// Averages impulse records over `window_s` and fits a second-order model
/// inside `band`.
pub fn characterize_impulses(
    records: &[Signal],
    window_s: f64,
    band: (f64, f64),
) -> Result<ImpulseCharacterization> {
    let average = average_impulse_spectra(records, window_s)?;
    let fit = fit_second_order(&average.response, band)?;
    Ok(ImpulseCharacterization { average, fit })
}

/// Simulated characterization of `cfg`: gain trials and 15 impulse records.
pub fn characterize_simulated(cfg: &PlantConfig, seed: u64) -> Result<CharacterizationReport> {
    let gain = estimate_gain(&simulate_gain_trials(cfg, seed)?)?;
    let records = simulate_impulses(cfg, 15, (0.85, 1.15), 1e-5, seed)?;
    let impulse = characterize_impulses(&records, 0.1, (10.0, 10_000.0))?;
    Ok(CharacterizationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        gain: Some(gain),
        impulse: Some(impulse),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(reference: ReferenceSpec) -> ExperimentConfig {
        ExperimentConfig {
            reference,
            duration_s: 3.0,
            seed: 11,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let cfg = ExperimentConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&s).unwrap(), cfg);
        let bad = ExperimentConfig {
            duration_s: 0.0,
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let wrong_rate = ExperimentConfig {
            controller: ControllerSpec::Filter(DiscreteFilter::identity(1000.0).unwrap()),
            ..cfg
        };
        assert!(matches!(wrong_rate.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_files() {
        let cfg = short(ReferenceSpec::default());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        for name in [
            CONFIG_FILE,
            DESIGN_FILE,
            TRACKING_FILE,
            SUMMARY_FILE,
            "trace.csv",
        ] {
            let x = fs::read(a.path().join(name)).unwrap();
            let y = fs::read(b.path().join(name)).unwrap();
            assert!(x == y, "{name} differs");
        }
    }

    #[test]
    fn stored_trace_replays_report() {
        let cfg = short(ReferenceSpec::Texture {
            label: "HT".into(),
            rms: None,
        });
        let dir = tempfile::tempdir().unwrap();
        let rec = run_experiment(&cfg, dir.path()).unwrap();
        let trace = Trace::load(&rec.trace_path).unwrap();
        let again = analyze_trace(&trace, &cfg.tracking_options().unwrap()).unwrap();
        assert_eq!(Some(again), rec.tracking);
    }
}
