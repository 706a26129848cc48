//! End-to-end tests of the `csivitals` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csivitals"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn csivitals")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const BREATHING_SCENE: &str = r#"{
  "tx_antennas": 1,
  "rx_antennas": 2,
  "static_paths_m": [2.0, 4.5],
  "noise_sigma": 1e-5,
  "dynamic_paths": [
    {"base_distance_m": 3.0,
     "trajectory": {"kind": "breathing_sinusoid", "rate_bpm": 30.0, "amplitude_m": 0.005, "phase_rad": 0.3}}
  ]
}"#;

const STILL_SCENE: &str = r#"{
  "static_paths_m": [2.0],
  "dynamic_paths": [{"base_distance_m": 3.0, "trajectory": {"kind": "still"}}]
}"#;

fn write_scene(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn synth(scene: &Path, out: &Path, labels: &Path, duration: &str, rate: &str, seed: &str) -> Output {
    run(&[
        "synth", "--scene", p(scene), "--duration", duration, "--seed", seed, "--out", p(out), "--labels",
        p(labels), "--rate", rate,
    ])
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "s.json", BREATHING_SCENE);
    let (a, b, la, lb) = (
        dir.path().join("a.jsonl"),
        dir.path().join("b.jsonl"),
        dir.path().join("la.jsonl"),
        dir.path().join("lb.jsonl"),
    );
    assert!(synth(&scene, &a, &la, "5", "50", "7").status.success());
    assert!(synth(&scene, &b, &lb, "5", "50", "7").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(&la).unwrap(), std::fs::read(&lb).unwrap());
    let c = dir.path().join("c.jsonl");
    assert!(synth(&scene, &c, &lb, "5", "50", "8").status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn still_scene_frames_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "still.json", STILL_SCENE);
    let (out, labels) = (dir.path().join("t.jsonl"), dir.path().join("gt.jsonl"));
    let o = synth(&scene, &out, &labels, "60", "20", "0");
    assert!(o.status.success(), "{}", stderr(&o));
    let frames = std::fs::read_to_string(&out).unwrap();
    assert_eq!(frames.lines().count(), 60 * 20);
    let gt = std::fs::read_to_string(&labels).unwrap();
    assert!(gt.lines().count() > 0);
    for line in gt.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["state"], "absent", "{line}");
    }
}

#[test]
fn missing_scene_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = synth(&missing, &dir.path().join("t"), &dir.path().join("l"), "1", "50", "0");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn malformed_scene_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "bad.json",
        r#"{"dynamic_paths": [{"base_distance_m": "far", "trajectory": {"kind": "still"}}]}"#,
    );
    let o = synth(&scene, &dir.path().join("t"), &dir.path().join("l"), "1", "50", "0");
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("dynamic_paths[0].base_distance_m"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "s.json", STILL_SCENE);
    let o = synth(&scene, &dir.path().join("t"), &dir.path().join("l"), "-3", "50", "0");
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["replay", "--trace", p(&dir.path().join("none")), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["replay", "--trace", p(&scene), "--out", p(&dir.path().join("r")), "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn replay_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "s.json", BREATHING_SCENE);
    let (trace, labels, night) =
        (dir.path().join("t.jsonl"), dir.path().join("gt.jsonl"), dir.path().join("night.json"));
    assert!(synth(&scene, &trace, &labels, "90", "100", "1").status.success());
    let replay = |out: &Path| {
        run(&[
            "replay", "--trace", p(&trace), "--gt", p(&labels), "--out", p(out), "--set", "nominal_rate_hz=100",
            "--set", "butter_cutoff=0.1",
        ])
    };
    let o = replay(&night);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = dir.path().join("again.json");
    assert!(replay(&again).status.success());
    assert_eq!(std::fs::read(&night).unwrap(), std::fs::read(&again).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&night).unwrap()).unwrap();
    assert_eq!(report["frames"], 9000);

    let o = run(&["report", "--night", p(&night)]);
    assert!(o.status.success());
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, report);

    let o = run(&["report", "--night", p(&night), "--format", "csv"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("minute,a,s_m,stage"));
    assert_eq!(csv.lines().count(), 1 + report["minutes"].as_array().unwrap().len());

    for (table, header) in [("bpm", "t,bpm,peaks,coverage"), ("events", "start_s,end_s,micro_events,peak_mahalanobis")] {
        let o = run(&["report", "--night", p(&night), "--format", "csv", "--table", table]);
        assert!(o.status.success());
        assert_eq!(String::from_utf8(o.stdout).unwrap().lines().next(), Some(header));
    }

    let o = run(&["report", "--night", p(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["report", "--night", p(&labels)]);
    assert_eq!(o.status.code(), Some(1));
}
