use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn randhill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randhill"))
        .args(args)
        .env_remove("RANDHILL_THREADS")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn delta_cycle_is_unstable() {
    let v = json_stdout(&randhill(&["cycle", "--shape", "delta", "--lambda", "0.25", "--q", "4"]));
    assert!((v["h"].as_f64().unwrap() + 4.0).abs() < 1e-12);
    assert!((v["g"].as_f64().unwrap() + 2.5).abs() < 1e-12);
    assert_eq!(v["verdict"], "unstable");
}

#[test]
fn free_cycle_at_integer_frequency_is_on_the_boundary() {
    let v = json_stdout(&randhill(&["cycle", "--shape", "zero", "--lambda", "1"]));
    assert_eq!(v["discriminant"].as_f64().unwrap(), -2.0);
    assert_eq!(v["verdict"], "boundary");
}

#[test]
fn narrow_square_barrier_approaches_the_impulse() {
    let v = json_stdout(&randhill(&[
        "cycle", "--shape", "square", "--w", "1e-3", "--lambda", "0.25", "--q", "2",
    ]));
    assert!((v["h"].as_f64().unwrap() + 2.0).abs() < 1e-2);
    assert!((v["wronskian"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn exit_codes_follow_the_error_class() {
    assert_eq!(randhill(&["cycle", "--bogus"]).status.code(), Some(1));
    assert_eq!(randhill(&["cycle", "--shape", "square", "--w", "0", "--lambda", "1"]).status.code(), Some(2));
    assert_eq!(randhill(&["verify", "--suite", "nope"]).status.code(), Some(1));
    assert_eq!(randhill(&["--help"]).status.code(), Some(0));
}

#[test]
fn chart_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chart.csv");
    let st = randhill(&["chart", "--lambda", "0..4", "--q", "0..8", "--res", "20", "--out", path_str(&out)]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 20 * 20);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("chart.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "randhill");
    assert!(manifest["config"].is_object());
    assert!(manifest["command"].as_array().unwrap().len() > 2);
}

#[test]
fn monte_carlo_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("fig3_{threads}.csv"));
        let st = randhill(&[
            "--threads", threads, "mc", "--experiment", "fig3", "--seed", "7", "--cycles", "1000",
            "--realizations", "32", "--out", path_str(&out),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        let mut summary = out.clone().into_os_string();
        summary.push(".summary.json");
        files.push((std::fs::read(&out).unwrap(), std::fs::read(summary).unwrap()));
    }
    assert!(!files[0].0.is_empty());
    assert_eq!(files[0], files[1]);
}

#[test]
fn orbit_cycles_feed_the_growth_estimators() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let cyc = dir.path().join("cyc.csv");
    let v = json_stdout(&randhill(&[
        "orbit", "--t-max", "60", "--out", path_str(&traj), "--cycles-out", path_str(&cyc),
    ]));
    let gamma = v["gamma_infinity"].as_f64().unwrap();
    assert!(gamma > 0.0);

    let from_cycles = json_stdout(&randhill(&["growth", "--cycles", path_str(&cyc)]));
    let from_traj = json_stdout(&randhill(&[
        "growth", "--trajectory", path_str(&traj), "--shape", "1.5,1,0.6",
    ]));
    for i in 0..2 {
        let a = &from_cycles[i];
        let b = &from_traj[i];
        assert_eq!(a["samples"], b["samples"]);
        assert!((a["gamma_infinity"].as_f64().unwrap() - gamma).abs() < 1e-12);
        assert!((a["delta_gamma"].as_f64().unwrap() - b["delta_gamma"].as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn oracle_suite_passes() {
    let out = randhill(&["verify", "--suite", "oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
