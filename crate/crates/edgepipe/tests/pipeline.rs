use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use edgepipe::{
    person_trigger, ClassMap, ConstantTemp, DeadLetter, DeadLetterRecord, Detector, Dispatcher,
    EventBody, EventKind, FileSink, FrameStatus, GuardStep, Pipeline, PipelineConfig, ReplayTemp,
    RetryPolicy, Sink, TcpSink, TempReading, TempSource, TemperatureGuard, WireEvent,
};
use phantom_core::frames::{Frame, SyntheticSource};
use phantom_core::postprocess::{BBox, Detection};
use proptest::prelude::*;

/// Returns canned detections per frame index and records which frames it saw.
struct Scripted {
    per_frame: HashMap<u64, Vec<Detection>>,
    seen: Arc<Mutex<Vec<u64>>>,
}

impl Detector for Scripted {
    fn detect(&mut self, frame: &Frame) -> phantom_core::Result<Vec<Detection>> {
        self.seen.lock().unwrap().push(frame.index);
        Ok(self
            .per_frame
            .get(&frame.index)
            .cloned()
            .unwrap_or_default())
    }
}

fn det(class_id: usize, score: f32) -> Detection {
    Detection {
        bbox: BBox::new(4.0, 4.0, 20.0, 28.0),
        class_id,
        score,
    }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        retries: 3,
        base: Duration::from_millis(1),
    }
}

struct Rig {
    pipeline: Pipeline,
    seen: Arc<Mutex<Vec<u64>>>,
}

fn rig(
    frames: u64,
    per_frame: HashMap<u64, Vec<Detection>>,
    temps: Box<dyn TempSource>,
    sinks: Vec<Box<dyn Sink>>,
    dead_letter: &Path,
) -> Rig {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let pipeline = Pipeline {
        source: Box::new(SyntheticSource::new(0, 32, frames)),
        detector: Box::new(Scripted {
            per_frame,
            seen: Arc::clone(&seen),
        }),
        temps,
        dispatcher: Dispatcher::new(sinks, fast_retry(), DeadLetter::new(dead_letter)),
        guard: TemperatureGuard::default(),
        classes: ClassMap::default(),
        device_id: "pi-test".into(),
        conf_thresh: 0.25,
    };
    Rig { pipeline, seen }
}

fn read_wire(path: &Path) -> Vec<WireEvent> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .map(|l| WireEvent::parse_line(l).unwrap())
        .collect()
}

#[test]
fn quiet_run_processes_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.jsonl");
    let r = rig(
        10,
        HashMap::new(),
        Box::new(ConstantTemp(40.0)),
        vec![Box::new(FileSink::new(&out))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(false));
    assert_eq!((s.frames_read, s.frames_inferred, s.events), (10, 10, 0));
    assert_eq!(*r.seen.lock().unwrap(), (0..10).collect::<Vec<u64>>());
    assert!(read_wire(&out).is_empty());
}

#[test]
fn scripted_trace_halts_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.jsonl");
    let trace = [
        40.0, 45.0, 61.0, 62.0, 57.0, 56.0, 54.0, 50.0, 59.9, 60.5, 40.0,
    ];
    // A person in every frame, so any inference during a halt would surface as an event.
    let per_frame = (0..trace.len() as u64)
        .map(|i| (i, vec![det(0, 0.9)]))
        .collect();
    let r = rig(
        trace.len() as u64,
        per_frame,
        Box::new(ReplayTemp::new(trace.to_vec()).unwrap()),
        vec![Box::new(FileSink::new(&out))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(false));

    let halted: Vec<u64> = vec![2, 3, 4, 5, 9];
    let inferred: Vec<u64> = vec![0, 1, 6, 7, 8, 10];
    assert_eq!(*r.seen.lock().unwrap(), inferred);
    for f in &s.frames {
        let was_halted = f.status == FrameStatus::Halted;
        assert_eq!(was_halted, halted.contains(&f.index), "frame {}", f.index);
    }
    assert_eq!((s.halts, s.resumes), (2, 2));
    assert_eq!(s.frames_halted, halted.len() as u64);

    let wire = read_wire(&out);
    let transitions: Vec<(EventKind, u64)> = wire
        .iter()
        .filter(|e| matches!(e.body.kind(), EventKind::Halt | EventKind::Resume))
        .map(|e| (e.body.kind(), e.body.frame()))
        .collect();
    assert_eq!(
        transitions,
        [
            (EventKind::Halt, 2),
            (EventKind::Resume, 6),
            (EventKind::Halt, 9),
            (EventKind::Resume, 10)
        ]
    );
    for e in &wire {
        if let EventBody::Halt { celsius, .. } = e.body {
            assert!(celsius > 60.0);
        }
    }

    // Replaying the event log: no detection ever falls inside a halt window.
    let mut halted_now = false;
    for e in &wire {
        match e.body.kind() {
            EventKind::Halt => halted_now = true,
            EventKind::Resume => halted_now = false,
            _ => assert!(
                !halted_now,
                "event for frame {} while halted",
                e.body.frame()
            ),
        }
    }
    assert!(wire.windows(2).all(|w| w[0].ts_ms <= w[1].ts_ms));
}

#[test]
fn person_frame_yields_exactly_the_trigger_events() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.jsonl");
    let frame1 = vec![
        det(0, 0.95),
        det(1, 0.9),
        det(0, 0.8),
        det(0, 0.6),
        det(0, 0.1),
    ];
    let r = rig(
        3,
        HashMap::from([(1, frame1.clone())]),
        Box::new(ConstantTemp(40.0)),
        vec![Box::new(FileSink::new(&out))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(false));
    let above: Vec<Detection> = frame1.into_iter().filter(|d| d.score >= 0.25).collect();
    let want = person_trigger(&above, &ClassMap::default(), 1);
    let got: Vec<EventBody> = read_wire(&out).into_iter().map(|e| e.body).collect();
    assert_eq!(got, want);
    let n = |k| got.iter().filter(|b| b.kind() == k).count();
    assert_eq!((n(EventKind::Detection), n(EventKind::Alert)), (3, 1));
    assert_eq!((s.detections, s.alerts), (3, 1));
    for b in &got {
        if let EventBody::Detection { score, .. } = b {
            assert!(*score >= 0.25);
        }
    }
}

#[test]
fn every_event_is_acked_or_dead_lettered() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.jsonl");
    let dl = dir.path().join("dl.jsonl");
    let closed = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let per_frame = HashMap::from([(0, vec![det(0, 0.9)]), (2, vec![det(0, 0.9), det(0, 0.7)])]);
    let r = rig(
        4,
        per_frame,
        Box::new(ConstantTemp(30.0)),
        vec![
            Box::new(FileSink::new(&out)),
            Box::new(TcpSink::new(closed.to_string()).with_timeout(Duration::from_millis(200))),
        ],
        &dl,
    );
    let s = r.pipeline.run(&AtomicBool::new(false));
    assert_eq!(s.events, 5);
    assert_eq!(s.acked + s.dead_lettered, 2 * s.events);
    assert_eq!((s.acked, s.dead_lettered, s.lost), (5, 5, 0));

    let delivered = read_wire(&out);
    let dead: Vec<DeadLetterRecord> = std::fs::read_to_string(&dl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(
        delivered.iter().map(|e| e.seq).collect::<Vec<_>>(),
        [0, 1, 2, 3, 4]
    );
    assert_eq!(
        dead.iter().map(|r| r.event.seq).collect::<Vec<_>>(),
        [0, 1, 2, 3, 4]
    );
    for (a, b) in delivered.iter().zip(&dead) {
        assert_eq!(a.body, b.event.body);
        assert_eq!(b.attempts, 4);
        assert!(b.sink.starts_with("tcp:"));
    }
}

#[test]
fn tcp_sink_down_dead_letters_after_full_backoff() {
    let dir = tempfile::tempdir().unwrap();
    let dl = dir.path().join("dl.jsonl");
    let closed = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let mut d = Dispatcher::new(
        vec![Box::new(TcpSink::new(closed.to_string()))],
        RetryPolicy::default(),
        DeadLetter::new(&dl),
    );
    let ev = edgepipe::PipelineEvent {
        ts_ms: 1,
        device_id: "pi".into(),
        body: EventBody::Alert {
            class: "person".into(),
            frame: 0,
            count: 1,
        },
    };
    let t0 = Instant::now();
    let acks = d.dispatch(&ev);
    let waited = t0.elapsed();
    assert_eq!(
        acks[0].outcome,
        edgepipe::Outcome::DeadLettered { attempts: 4 }
    );
    assert!(waited >= Duration::from_millis(700), "{waited:?}");
    assert!(waited < Duration::from_millis(3000), "{waited:?}");
    let rec: DeadLetterRecord =
        serde_json::from_str(std::fs::read_to_string(&dl).unwrap().trim()).unwrap();
    assert_eq!(rec.event.body, ev.body);
}

#[test]
fn tcp_sink_delivers_ordered_unique_sequence_numbers() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let reader = std::thread::spawn(move || {
        let (conn, _) = listener.accept().unwrap();
        BufReader::new(conn)
            .lines()
            .map(|l| WireEvent::parse_line(&l.unwrap()).unwrap())
            .collect::<Vec<_>>()
    });
    let dir = tempfile::tempdir().unwrap();
    let per_frame = (0..20).map(|i| (i, vec![det(0, 0.9)])).collect();
    let r = rig(
        20,
        per_frame,
        Box::new(ConstantTemp(30.0)),
        vec![Box::new(TcpSink::new(addr.to_string()))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(false));
    let got = reader.join().unwrap();
    assert_eq!(s.events, 40);
    assert_eq!(got.len(), 40);
    assert!(got.iter().enumerate().all(|(i, e)| e.seq == i as u64));
    assert!(got.iter().all(|e| e.v == 1 && e.device_id == "pi-test"));
    assert!(got.windows(2).all(|w| w[0].ts_ms <= w[1].ts_ms));
}

#[test]
fn slow_sink_applies_backpressure_without_loss() {
    struct Slow(Arc<Mutex<Vec<String>>>);
    impl Sink for Slow {
        fn describe(&self) -> String {
            "slow".into()
        }
        fn write_line(&mut self, line: &str) -> std::io::Result<()> {
            std::thread::sleep(Duration::from_millis(2));
            self.0.lock().unwrap().push(line.to_string());
            Ok(())
        }
    }
    let lines = Arc::new(Mutex::new(Vec::new()));
    let dir = tempfile::tempdir().unwrap();
    let per_frame = (0..30)
        .map(|i| (i, vec![det(0, 0.9), det(0, 0.8)]))
        .collect();
    let r = rig(
        30,
        per_frame,
        Box::new(ConstantTemp(30.0)),
        vec![Box::new(Slow(Arc::clone(&lines)))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(false));
    assert_eq!(s.events, 90);
    assert_eq!(lines.lock().unwrap().len(), 90);
    let frames: Vec<u64> = lines
        .lock()
        .unwrap()
        .iter()
        .map(|l| WireEvent::parse_line(l).unwrap().body.frame())
        .collect();
    assert!(frames.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn stop_flag_ends_the_run_and_drains() {
    let dir = tempfile::tempdir().unwrap();
    let r = rig(
        1000,
        HashMap::new(),
        Box::new(ConstantTemp(30.0)),
        vec![Box::new(FileSink::new(dir.path().join("e")))],
        &dir.path().join("dl"),
    );
    let s = r.pipeline.run(&AtomicBool::new(true));
    assert_eq!(s.frames_read, 0);
}

#[test]
fn model_backed_pipeline_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trace.txt"), "40\n65\n").unwrap();
    let cfg = r#"{
        "model": {"config": "builtin:phantom", "weights": "random:3"},
        "source": {"type": "synthetic", "frames": 3, "seed": 1},
        "input_size": 64,
        "temp_source": "trace.txt",
        "sinks": [{"type": "file", "path": "events.jsonl"}],
        "conf_thresh": 0.25,
        "device_id": "pi-01",
        "dead_letter": "dead.jsonl"
    }"#;
    let path = dir.path().join("pipeline.json");
    std::fs::write(&path, cfg).unwrap();
    let c = PipelineConfig::load(&path).unwrap();
    let s = c.build().unwrap().run(&AtomicBool::new(false));
    assert_eq!(
        (s.frames_read, s.frames_inferred, s.frames_halted),
        (3, 1, 2)
    );
    let wire = read_wire(&dir.path().join("events.jsonl"));
    assert!(matches!(
        wire.last().unwrap().body,
        EventBody::Halt { frame: 1, .. }
    ));
    assert!(wire.iter().all(|e| e.device_id == "pi-01"));
}

#[test]
fn model_load_failure_aborts_before_processing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "model": {"config": "builtin:phantom", "weights": "missing.json"},
        "source": {"type": "synthetic", "frames": 3},
        "temp_source": "constant:40",
        "sinks": [{"type": "file", "path": "events.jsonl"}],
        "device_id": "pi-01"
    }"#;
    let path = dir.path().join("pipeline.json");
    std::fs::write(&path, cfg).unwrap();
    assert!(PipelineConfig::load(&path).unwrap().build().is_err());
    assert!(!dir.path().join("events.jsonl").exists());
}

fn walk(trace: &[f64]) -> Vec<GuardStep> {
    let mut g = TemperatureGuard::default();
    trace
        .iter()
        .map(|&celsius| g.observe(TempReading { celsius, ts_ms: 0 }))
        .collect()
}

proptest! {
    /// Any trace confined to (threshold − hysteresis, threshold] never changes state.
    #[test]
    fn no_oscillation_inside_band(start_hot in any::<bool>(), trace in proptest::collection::vec(55.0001f64..=60.0, 1..200)) {
        let mut g = TemperatureGuard::default();
        if start_hot {
            g.observe(TempReading { celsius: 80.0, ts_ms: 0 });
        }
        for &celsius in &trace {
            let step = g.observe(TempReading { celsius, ts_ms: 0 });
            prop_assert!(matches!(step, GuardStep::Running | GuardStep::StillHalted));
            prop_assert_eq!(g.is_halted(), start_hot);
        }
    }

    /// Transitions alternate halt/resume, and each is justified by its reading.
    #[test]
    fn transitions_alternate(trace in proptest::collection::vec(30.0f64..80.0, 1..300)) {
        let mut halted = false;
        for (c, step) in trace.iter().zip(walk(&trace)) {
            match step {
                GuardStep::Halted => { prop_assert!(!halted && *c > 60.0); halted = true; }
                GuardStep::Resumed => { prop_assert!(halted && *c <= 55.0); halted = false; }
                GuardStep::StillHalted => prop_assert!(halted && *c > 55.0),
                GuardStep::Running => prop_assert!(!halted && *c <= 60.0),
            }
        }
    }
}
