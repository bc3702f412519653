use std::path::Path;
use std::process::{Command, Output};

fn frictionloop(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_frictionloop"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn design_writes_filter_json() {
    let dir = tempfile::tempdir().unwrap();
    frictionloop(&["design", "--out", "d"], dir.path());
    let v = json(&dir.path().join("d/design.json"));
    assert_eq!(v["schema_version"], 1);
    let c = &v["controller"];
    assert_eq!(c["fs"], 10_000.0);
    assert!(c["b"].as_array().unwrap().len() >= 2);
    assert_eq!(c["a"][0], 1.0);
}

#[test]
fn run_then_analyze_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    frictionloop(
        &["run", "--seed", "4", "--duration", "3", "--out", "r"],
        dir.path(),
    );
    let trace = dir.path().join("r/trace.csv");
    let header = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "t_s,f_r_N,f_m_N,f_f_N,u_mA,W_N,contact,P_t_NpermA"
    );
    let stored = json(&dir.path().join("r/tracking_report.json"));
    assert!(stored["r2"].as_f64().unwrap() > 0.9);

    frictionloop(
        &[
            "analyze",
            "r/trace.csv",
            "--preset",
            "square_wave",
            "--out",
            "a",
        ],
        dir.path(),
    );
    let again = json(&dir.path().join("a/tracking_report.json"));
    assert_eq!(stored["r2"], again["r2"]);
    assert_eq!(stored["lag_s"], again["lag_s"]);
}

#[test]
fn run_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_frictionloop"))
        .args(["run", "--duration", "0.1"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn open_mode_tracks_worse_than_closed() {
    let dir = tempfile::tempdir().unwrap();
    frictionloop(
        &["run", "--seed", "9", "--duration", "3", "--out", "c"],
        dir.path(),
    );
    frictionloop(
        &[
            "run",
            "--seed",
            "9",
            "--duration",
            "3",
            "--mode",
            "open",
            "--out",
            "o",
        ],
        dir.path(),
    );
    let r2 = |d: &str| {
        json(&dir.path().join(d).join("tracking_report.json"))["r2"]
            .as_f64()
            .unwrap()
    };
    assert!(r2("c") > r2("o"), "closed {} open {}", r2("c"), r2("o"));
}
