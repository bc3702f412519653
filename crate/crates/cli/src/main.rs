use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use frictionloop::analysis::{empirical_sensitivity, TrackingOptions};
use frictionloop::experiment::{
    analyze_trace, build_controller, characterize_impulses, characterize_simulated, run_experiment,
    run_sweep, CharacterizationReport, ExperimentConfig, RunMode,
};
use frictionloop::plant::{Direction, Fidelity};
use frictionloop::signals::read_force_csv;
use frictionloop::sysid::{estimate_gain, GainTrial};
use frictionloop::trace::Trace;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "frictionloop",
    version,
    about = "Closed-loop electroadhesion friction control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["closed", "open"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["envelope", "carrier"])]
    fidelity: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Design the discrete controller and write its report.
    Design {
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment and write its trace and reports.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Override the configured duration, s.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Sensitivity sweep over 20 frequencies and 4 amplitudes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Length of each condition, s.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Keep the trace of every condition.
        #[arg(long)]
        traces: bool,
    },
    /// Score a stored trace.
    Analyze {
        /// Trace file (.csv, .json or .bin).
        trace: PathBuf,
        #[arg(long, value_parser = ["texture", "square_wave"], default_value = "texture")]
        preset: String,
        /// Also report the response at this sine reference frequency, Hz.
        #[arg(long)]
        frequency: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify the actuation gain and the tribometer dynamics.
    ///
    /// With no recordings the configured plant is characterized in
    /// simulation.
    Characterize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gain-trial traces: sinusoidal drive while sliding.
        #[arg(long = "trace")]
        traces: Vec<PathBuf>,
        /// Modulation frequency of the gain trials, Hz.
        #[arg(long)]
        frequency: Option<f64>,
        /// Impulse recordings (CSV: time, force).
        #[arg(long = "impulse")]
        impulses: Vec<PathBuf>,
        /// Sample rate of single-column impulse recordings, Hz.
        #[arg(long)]
        impulse_fs: Option<f64>,
        /// Analysis window after each impulse onset, s.
        #[arg(long, default_value_t = 0.1)]
        window: f64,
        /// Upper edge of the second-order fit band, Hz.
        #[arg(long, default_value_t = 10_000.0)]
        band_hi: f64,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &common.mode {
        cfg.mode = m.parse::<RunMode>()?;
    }
    if let Some(f) = &common.fidelity {
        cfg.plant.fidelity = f.parse::<Fidelity>()?;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, default: &str) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(default))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn design(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    cfg.validate()?;
    let record = build_controller(&cfg)?;
    let dir = out_dir(&common, "design");
    write_json(&dir.join("design.json"), &record)?;
    println!("b = {:?}", record.controller.b());
    println!("a = {:?}", record.controller.a());
    if let Some(r) = &record.report {
        for b in &r.bandwidths {
            match b.bandwidth_hz {
                Some(bw) => println!("{:>8}  P = {:.4} N/mA  -3 dB at {bw:.1} Hz", b.label, b.p),
                None => println!("{:>8}  P = {:.4} N/mA  no -3 dB crossing", b.label, b.p),
            }
        }
        println!(
            "stable on {}/{} gains; fit rms {:.3} dB / {:.2} deg",
            r.stability.iter().filter(|s| s.stable).count(),
            r.stability.len(),
            r.fit_rms_mag_db,
            r.fit_rms_phase_deg
        );
    }
    println!("wrote {}", dir.join("design.json").display());
    Ok(())
}

fn run(common: Common, seed: u64, duration: Option<f64>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    cfg.seed = seed;
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    let dir = out_dir(&common, &format!("run-{seed}"));
    let rec = run_experiment(&cfg, &dir)?;
    println!(
        "trace: {} ({} rows)",
        rec.trace_path.display(),
        rec.summary.trace_rows
    );
    if let Some(t) = &rec.tracking {
        println!(
            "R2 = {:.4}, lag = {:.2} ms over {} swipes",
            t.r2,
            t.lag_s * 1e3,
            t.per_swipe.len()
        );
    }
    for w in &rec.summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn sweep(common: Common, seed: u64, duration: f64, traces: bool) -> Result<()> {
    let mut cfg = load_config(&common)?;
    cfg.seed = seed;
    cfg.duration_s = duration;
    cfg.outputs.sweep_traces |= traces;
    let dir = out_dir(&common, &format!("sweep-{seed}"));
    let table = run_sweep(&cfg, &dir)?;
    println!(
        "{:>9} {:>7} {:>6} {:>8} {:>9}",
        "f_Hz", "A_mN", "swipes", "ratio", "delay_ms"
    );
    for r in &table.rows {
        let fmt = |v: Option<f64>, p: usize| v.map_or("-".into(), |x| format!("{x:.p$}"));
        println!(
            "{:>9.1} {:>7.0} {:>6} {:>8} {:>9}",
            r.frequency,
            r.amplitude * 1e3,
            r.swipes,
            fmt(r.magnitude, 3),
            fmt(r.delay_ms, 3)
        );
        if let Some(w) = &r.warning {
            eprintln!("warning: {:.1} Hz / {} N: {w}", r.frequency, r.amplitude);
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn analyze(
    path: PathBuf,
    preset: String,
    frequency: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let trace = Trace::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let report = analyze_trace(&trace, &TrackingOptions::by_name(&preset)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let table = match frequency {
        Some(f) => {
            let amplitude = trace.f_r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let t = empirical_sensitivity(&[(f, amplitude, &trace)])?;
            println!("{}", serde_json::to_string_pretty(&t)?);
            Some(t)
        }
        None => None,
    };
    if let Some(dir) = out {
        write_json(&dir.join("tracking_report.json"), &report)?;
        if let Some(t) = table {
            write_json(&dir.join("sensitivity.json"), &t)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn characterize(
    common: Common,
    seed: u64,
    traces: Vec<PathBuf>,
    frequency: Option<f64>,
    impulses: Vec<PathBuf>,
    impulse_fs: Option<f64>,
    window: f64,
    band_hi: f64,
) -> Result<()> {
    let cfg = load_config(&common)?;
    let report = if traces.is_empty() && impulses.is_empty() {
        characterize_simulated(&cfg.plant, seed)?
    } else {
        let gain = if traces.is_empty() {
            None
        } else {
            let Some(f) = frequency else {
                bail!("--frequency is required with --trace");
            };
            let trials = traces
                .iter()
                .map(|p| -> Result<GainTrial> {
                    let t = Trace::load(p).with_context(|| format!("loading {}", p.display()))?;
                    let force = t.measured()?;
                    let mean = force.samples().iter().sum::<f64>() / force.len().max(1) as f64;
                    Ok(GainTrial {
                        drive: t.current()?,
                        force,
                        frequency: f,
                        direction: Direction::from_sign(mean),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(estimate_gain(&trials)?)
        };
        let impulse = if impulses.is_empty() {
            None
        } else {
            let records = impulses
                .iter()
                .map(|p| -> Result<_> {
                    let file =
                        fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                    Ok(read_force_csv(file, impulse_fs)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(characterize_impulses(&records, window, (0.0, band_hi))?)
        };
        CharacterizationReport {
            schema_version: 1,
            gain,
            impulse,
        }
    };
    if let Some(g) = &report.gain {
        println!(
            "P = {:.5} N/mA (min {:.5}, max {:.5}, {} trials)",
            g.mean,
            g.min,
            g.max,
            g.per_trial.len()
        );
    }
    if let Some(i) = &report.impulse {
        println!(
            "G fit: gain {:.4}, fn {:.1} Hz, zeta {:.4}{}",
            i.fit.gain,
            i.fit.fn_hz,
            i.fit.zeta,
            if i.fit.low_confidence {
                " (low confidence)"
            } else {
                ""
            }
        );
        for w in &i.average.warnings {
            eprintln!("warning: {w}");
        }
    }
    let dir = out_dir(&common, "characterize");
    write_json(&dir.join("characterization.json"), &report)?;
    println!("wrote {}", dir.join("characterization.json").display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Design { common } => design(common),
        Command::Run {
            common,
            seed,
            duration,
        } => run(common, seed, duration),
        Command::Sweep {
            common,
            seed,
            duration,
            traces,
        } => sweep(common, seed, duration, traces),
        Command::Analyze {
            trace,
            preset,
            frequency,
            out,
        } => analyze(trace, preset, frequency, out),
        Command::Characterize {
            common,
            seed,
            traces,
            frequency,
            impulses,
            impulse_fs,
            window,
            band_hi,
        } => characterize(
            common, seed, traces, frequency, impulses, impulse_fs, window, band_hi,
        ),
    }
}
