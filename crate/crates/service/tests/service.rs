mod common;

use std::net::TcpListener;
use std::path::PathBuf;

use common::*;
use gave_core::menu::Catalog;
use gave_core::protocol::{Event, Message};
use gave_core::vision::synthetic::SyntheticFace;
use gave_core::vision::{FrameCorpus, LandmarkRecord};
use gave_service::{LandmarkSpec, Service, ServiceError, SessionConfig, SessionLog, SourceSpec};
use gave_sim::{load_trace, replay, ReplayConfig};

fn replayed(i: usize) -> Vec<Message> {
    replay(&load_trace(trace_fixture(i)).unwrap(), &ReplayConfig::default()).unwrap()
}

// ── Service/replay equivalence ──────────────────────────────

#[test]
fn socket_stream_equals_headless_replay_on_every_fixture_trace() {
    for i in 0..10 {
        let got = serve_to_one_client(&trace_fixture(i));
        assert!(matches!(got.first().map(|m| &m.event), Some(Event::Hello { .. })));
        assert!(matches!(got.last().map(|m| &m.event), Some(Event::SourceEnded)));
        assert_eq!(lines(&pipeline_events(&got)), lines(&replayed(i)), "trace {i}");
    }
}

#[test]
fn two_clients_see_the_same_sequence() {
    let svc = trace_service(&trace_fixture(3), 2, None);
    let addr = svc.local_addr();
    let a = std::thread::spawn(move || LineClient::connect(addr).drain());
    let b = std::thread::spawn(move || LineClient::connect(addr).drain());
    let (a, b) = (a.join().unwrap(), b.join().unwrap());
    svc.wait().unwrap();
    assert!(a.len() > 100);
    assert_eq!(lines(&a), lines(&b));
}

// ── Controls ────────────────────────────────────────────────

#[test]
fn set_condition_changes_the_focus_threshold() {
    // two expected clients: the first configures, the second opens the gate
    let svc = trace_service(&fixtures().join("fig6_walkthrough.jsonl"), 2, None);
    let mut a = LineClient::connect(svc.local_addr());
    a.send(r#"{"type":"set_condition","dwell_ms":800}"#);
    let echo = a.until(|m| matches!(m.event, Event::Condition { .. }));
    assert!(matches!(
        echo.last().unwrap().event,
        Event::Condition { dwell_ms: 800, .. }
    ));
    let mut b = LineClient::connect(svc.local_addr());
    let rest = a.drain();
    b.drain();
    svc.wait().unwrap();
    let thresholds: Vec<u64> = rest
        .iter()
        .filter_map(|m| match m.event {
            Event::Focus { threshold_ms, .. } => Some(threshold_ms),
            _ => None,
        })
        .collect();
    assert!(!thresholds.is_empty());
    assert!(thresholds.iter().all(|&t| t == 800), "{thresholds:?}");
}

#[test]
fn invalid_controls_get_a_private_error_and_change_nothing() {
    let svc = trace_service(&trace_fixture(0), 2, None);
    let mut a = LineClient::connect(svc.local_addr());
    let bad = [
        "not json",
        r#"{"type":"warp_drive"}"#,
        r#"{"type":"set_condition","dwell_ms":0}"#,
        r#"{"type":"set_condition","area":"huge"}"#,
        r#"{"type":"start_experiment","targets":["unicorn"]}"#,
        r#"{"type":"start_experiment","targets":[]}"#,
    ];
    for line in bad {
        a.send(line);
    }
    let mut errors = 0;
    let mut seen = Vec::new();
    while errors < bad.len() {
        let m = a.next().expect("server still up");
        if matches!(m.event, Event::Error { .. }) {
            errors += 1;
        }
        seen.push(m);
    }
    let mut b = LineClient::connect(svc.local_addr());
    let a_rest = a.drain();
    let b_all = b.drain();
    svc.wait().unwrap();
    assert!(seen
        .iter()
        .all(|m| matches!(m.event, Event::Hello { .. } | Event::Error { .. })));
    assert!(b_all.iter().all(|m| !matches!(m.event, Event::Error { .. })));
    // the session behaves exactly as if nothing had been sent
    assert_eq!(lines(&pipeline_events(&a_rest)), lines(&replayed(0)));
    assert_eq!(lines(&pipeline_events(&b_all)), lines(&replayed(0)));
}

#[test]
fn stop_control_shuts_down_and_flushes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    let mut cfg = SessionConfig::new(SourceSpec::RatioTrace {
        path: fixtures().join("fig6_walkthrough.jsonl"),
    });
    cfg.port = 0;
    cfg.wait_clients = 1;
    cfg.log_path = Some(log.clone());
    let svc = Service::start(cfg).unwrap();
    let mut c = LineClient::connect(svc.local_addr());
    let before = c.until(|m| matches!(m.event, Event::SourceEnded));
    c.send(r#"{"type":"stop"}"#);
    assert!(c.drain().is_empty());
    svc.wait().unwrap();
    let log = SessionLog::load(&log).unwrap();
    assert_eq!(lines(&log.events), lines(&pipeline_events(&before)));
}

// ── Session logs ────────────────────────────────────────────

#[test]
fn session_log_replays_to_its_own_events() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("s.jsonl");
    let svc = trace_service(&trace_fixture(4), 1, Some(&log_path));
    let mut c = LineClient::connect(svc.local_addr());
    c.send(r#"{"type":"set_condition","dwell_ms":1200,"area":"large"}"#);
    let got = c.drain();
    svc.wait().unwrap();
    let log = SessionLog::load(&log_path).unwrap();
    assert_eq!(log.header.config.replay, ReplayConfig::default());
    assert_eq!(lines(&log.replay().unwrap()), lines(&log.events));
    assert_eq!(lines(&log.events), lines(&pipeline_events(&got)));
}

fn write_face_corpus(dir: &std::path::Path) -> PathBuf {
    let face = SyntheticFace::centered(320, 240);
    let right = face.clone().with_gaze(6.0, 0.0);
    let mut frames = Vec::new();
    let mut landmarks = Vec::new();
    for k in 0..150u64 {
        let t = k * 33;
        let f = if (90..120).contains(&k) { &right } else { &face };
        frames.push(f.render(t));
        landmarks.push(LandmarkRecord::from_landmarks(&f.landmarks(t)));
    }
    let corpus_dir = dir.join("frames");
    FrameCorpus::write(&corpus_dir, &frames).unwrap();
    let lm = dir.join("landmarks.jsonl");
    let mut out = std::fs::File::create(&lm).unwrap();
    gave_core::vision::write_landmark_trace(&mut out, &landmarks).unwrap();
    corpus_dir
}

#[test]
fn frame_source_session_is_replayable_from_its_log() {
    let dir = tempfile::tempdir().unwrap();
    let frames = write_face_corpus(dir.path());
    let log_path = dir.path().join("s.jsonl");
    let mut cfg = SessionConfig::new(SourceSpec::FrameDir { dir: frames });
    cfg.landmarks = LandmarkSpec::Trace {
        path: dir.path().join("landmarks.jsonl"),
    };
    cfg.port = 0;
    cfg.wait_clients = 1;
    cfg.exit_on_end = true;
    cfg.log_path = Some(log_path.clone());
    let svc = Service::start(cfg).unwrap();
    let mut c = LineClient::connect(svc.local_addr());
    c.send(r#"{"type":"start_calibration"}"#);
    let got = c.drain();
    svc.wait().unwrap();
    let done = got.iter().find_map(|m| match m.event {
        Event::CalibrationDone { h_c, v_c, .. } => Some((h_c, v_c)),
        _ => None,
    });
    let (h_c, v_c) = done.expect("calibration completes on the synthetic face");
    assert!((0.0..=1.0).contains(&h_c) && (0.0..=1.0).contains(&v_c));
    let log = SessionLog::load(&log_path).unwrap();
    assert_eq!(log.inputs.len(), 151);
    assert_eq!(lines(&log.replay().unwrap()), lines(&log.events));
    assert_eq!(lines(&log.events), lines(&pipeline_events(&got)));
}

// ── WebSocket ───────────────────────────────────────────────

#[test]
fn websocket_client_gets_the_same_stream() {
    let svc = trace_service(&trace_fixture(1), 1, None);
    let url = format!("ws://{}/", svc.local_addr());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    let mut got = Vec::new();
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => got.push(Message::from_line(&t).unwrap()),
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(_) => break,
        }
    }
    svc.wait().unwrap();
    assert!(matches!(got[0].event, Event::Hello { version: 1, .. }));
    assert_eq!(lines(&pipeline_events(&got)), lines(&replayed(1)));
}

#[test]
fn websocket_client_can_send_controls() {
    let svc = trace_service(&trace_fixture(2), 2, None);
    let url = format!("ws://{}/", svc.local_addr());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    ws.send(tungstenite::Message::Text(r#"{"type":"bogus"}"#.into()))
        .unwrap();
    let mut saw_error = false;
    while !saw_error {
        if let tungstenite::Message::Text(t) = ws.read().unwrap() {
            saw_error = matches!(Message::from_line(&t).unwrap().event, Event::Error { .. });
        }
    }
    let mut other = LineClient::connect(svc.local_addr());
    other.drain();
    drop(ws);
    svc.wait().unwrap();
}

// ── Startup errors ──────────────────────────────────────────

#[test]
fn busy_port_is_a_startup_error() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let mut cfg = SessionConfig::new(SourceSpec::RatioTrace { path: trace_fixture(0) });
    cfg.port = held.local_addr().unwrap().port();
    assert!(matches!(Service::start(cfg), Err(ServiceError::Bind { .. })));
}

#[test]
fn missing_source_is_a_startup_error() {
    let cfg = SessionConfig::new(SourceSpec::RatioTrace {
        path: "/nonexistent/trace.jsonl".into(),
    });
    assert!(matches!(Service::start(cfg), Err(ServiceError::Config(_))));
    let mut cfg = SessionConfig::new(SourceSpec::FrameDir { dir: fixtures() });
    cfg.port = 0;
    assert!(matches!(Service::start(cfg), Err(ServiceError::Source(_))));
}

#[test]
fn catalog_fixture_is_what_the_service_serves() {
    let cfg = SessionConfig::new(SourceSpec::RatioTrace { path: trace_fixture(0) });
    assert_eq!(
        cfg.replay.catalog,
        Catalog::load(fixtures().join("catalog.json")).unwrap()
    );
}
