//! Live ingestion over TCP against offline replay.

mod common;

use common::*;
use csivitals::pipeline::process_frames;
use csivitals::service::{send_frames, IngestServer, Producer};
use csivitals::synth::CfrGenerator;
use csivitals::wire::ServerMessage;
use csivitals::NightReport;

const RATE: f64 = 100.0;

fn report_path(msg: &ServerMessage) -> std::path::PathBuf {
    match msg {
        ServerMessage::Done { report, .. } => report.into(),
        other => panic!("expected done, got {other:?}"),
    }
}

#[test]
fn one_minute_session_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let server = IngestServer::bind("127.0.0.1:0", config_for_rate(RATE), dir.path())
        .unwrap()
        .spawn()
        .unwrap();
    let frames = CfrGenerator::new(&sleeper_scene(20.0, NOISE_SIGMA), 60.0, RATE, 4).unwrap();
    let msg = send_frames(server.addr(), frames).unwrap();
    let path = report_path(&msg);
    assert_eq!(path, dir.path().join("session-0001").join("report.json"));
    let report: NightReport = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report.frames, 6000);
    assert!((1..=2).contains(&report.epochs));
    assert!(dir.path().join("session-0001").join("bpm.jsonl").exists());
    assert!(!dir.path().join("session-0001").join("report.tmp").exists());
    server.shutdown().unwrap();
}

#[test]
fn second_producer_is_refused_while_busy() {
    let dir = tempfile::tempdir().unwrap();
    let server = IngestServer::bind("127.0.0.1:0", config_for_rate(RATE), dir.path())
        .unwrap()
        .spawn()
        .unwrap();
    let mut first = Producer::connect(server.addr()).unwrap();
    let second = Producer::connect(server.addr());
    assert!(second.is_err(), "second producer was accepted");
    let frame = CfrGenerator::new(&sleeper_scene(20.0, 0.0), 1.0, RATE, 0).unwrap().next().unwrap();
    first.send_frame(&frame).unwrap();
    assert!(matches!(first.finish().unwrap(), ServerMessage::Done { frames: 1, .. }));
    // the slot frees up once the session ends
    let mut again = None;
    for _ in 0..50 {
        if let Ok(p) = Producer::connect(server.addr()) {
            again = Some(p);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    again.expect("server stayed busy").finish().unwrap();
    server.shutdown().unwrap();
}

#[test]
fn socket_report_equals_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = csivitals::Config {
        calibration_minutes: 5.0,
        ..config_for_rate(RATE)
    };
    let server = IngestServer::bind("127.0.0.1:0", cfg.clone(), dir.path())
        .unwrap()
        .spawn()
        .unwrap();
    let mut scene = sleeper_scene(30.0, NOISE_SIGMA);
    add_burst(&mut scene, 200.0, 6.0, 0.02, 8);
    let frames: Vec<_> = CfrGenerator::new(&scene, 400.0, RATE, 12).unwrap().collect();
    let msg = send_frames(server.addr(), frames.clone()).unwrap();
    let live = std::fs::read_to_string(report_path(&msg)).unwrap();
    let offline = process_frames(frames.into_iter().map(Ok), &cfg, None).unwrap().to_json();
    assert_eq!(live, offline);

    let rows = std::fs::read_to_string(dir.path().join("session-0001").join("bpm.jsonl")).unwrap();
    let report: NightReport = serde_json::from_str(&live).unwrap();
    assert_eq!(rows.lines().count(), report.bpm_series.len());
    assert!(report.bpm_series.iter().any(|s| s.bpm.is_some()));
    server.shutdown().unwrap();
}

#[test]
fn malformed_frame_gets_error_status() {
    let dir = tempfile::tempdir().unwrap();
    let server = IngestServer::bind("127.0.0.1:0", config_for_rate(RATE), dir.path())
        .unwrap()
        .spawn()
        .unwrap();
    let mut gen = CfrGenerator::new(&sleeper_scene(20.0, 0.0), 1.0, RATE, 0).unwrap();
    let mut p = Producer::connect(server.addr()).unwrap();
    p.send_frame(&gen.next().unwrap()).unwrap();
    p.send_frame(&gen.next().unwrap()).unwrap();
    p.send_raw(b"{\"t\":1.0,\"csi\":\"nope\"}").unwrap();
    match p.finish().unwrap() {
        ServerMessage::Error { message } => assert!(message.contains("line 3"), "{message}"),
        other => panic!("expected error, got {other:?}"),
    }
    // the partial report is still flushed
    assert!(dir.path().join("session-0001").join("report.json").exists());
    server.shutdown().unwrap();
}
