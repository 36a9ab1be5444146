use std::path::Path;
use std::process::Command;

use wristdrive::gesture::{
    extract_epochs, load_templates, reference_templates, synthesize_gesture, synthesize_rest, write_sidecar,
    EpochBoundary, GestureClass,
};
use wristdrive::harness::{
    report_from_log, replay, run_scenario, score_log_file, train, HarnessError, ReplayReport, RunOptions, RunReport,
    TrainOptions,
};
use wristdrive::imu::{save_trace, ImuSample};
use wristdrive::command::{ControlConfig, OperationalMode};
use wristdrive::sim::{Scenario, ScenarioKind};
use wristdrive::wire::{encode, Message, Role};

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wristdrive")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Concatenates epochs into one 50 Hz stream starting at `t0`, returning the
/// samples and each epoch's start time.
fn stream(epochs: &[wristdrive::gesture::Epoch], t0: u64) -> (Vec<ImuSample>, Vec<u64>) {
    let mut t = t0;
    let mut samples = Vec::new();
    let mut starts = Vec::new();
    for e in epochs {
        starts.push(t);
        samples.extend(e.to_samples(t));
        t += e.len() as u64 * 20_000;
    }
    (samples, starts)
}

#[test]
fn replay_padded_circle_detects_once() {
    let (trace, _) = stream(
        &[
            synthesize_rest(100, 1, 0.3),
            synthesize_gesture(GestureClass::Circle, 2, 0.3),
            synthesize_rest(100, 3, 0.3),
        ],
        0,
    );
    let r = replay(&trace, reference_templates(), &ControlConfig::default(), None).unwrap();
    assert_eq!(r.detections.len(), 1);
    assert_eq!(r.detections[0].gesture, GestureClass::Circle);
    assert_eq!(r.final_mode, OperationalMode::Teleoperated);
    assert_eq!(r.command_count, trace.len());

    let empty = replay(&[], reference_templates(), &ControlConfig::default(), None).unwrap();
    assert!(empty.detections.is_empty());
    assert_eq!(empty.command_count, 0);
}

#[test]
fn replay_drives_a_scenario() {
    let (mut trace, _) = stream(
        &[
            synthesize_rest(50, 1, 0.05),
            synthesize_gesture(GestureClass::Circle, 2, 0.05),
            synthesize_rest(50, 3, 0.05),
        ],
        0,
    );
    let mut t = trace.last().unwrap().timestamp_us;
    for _ in 0..250 {
        t += 20_000;
        trace.push(ImuSample::new(t, [0.0, 9.81 * 0.5f64.sin(), 9.81 * 0.5f64.cos()], [0.0; 3]));
    }
    let r = replay(&trace, reference_templates(), &ControlConfig::default(), Some(&Scenario::builtin(ScenarioKind::Slalom)))
        .unwrap();
    let run = r.run.unwrap();
    assert!(run.travel_time_s > 4.0, "{run:?}");
    assert_eq!(run.detections.len(), 1);
}

#[test]
fn train_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut epochs = Vec::new();
    let mut labels = Vec::new();
    for (i, class) in [GestureClass::Up, GestureClass::Left, GestureClass::Circle].into_iter().enumerate() {
        for k in 0..6u64 {
            epochs.push(synthesize_rest(20, 100 + k, 0.1));
            epochs.push(synthesize_gesture(class, i as u64 * 10 + k, 0.1));
            labels.push(class);
        }
    }
    let (trace, starts) = stream(&epochs, 1_000_000);
    let bounds: Vec<EpochBoundary> = labels
        .iter()
        .enumerate()
        .map(|(j, class)| EpochBoundary {
            start_us: starts[2 * j + 1],
            end_us: starts[2 * j + 1] + 60 * 20_000,
            class: *class,
        })
        .collect();
    let trace_path = dir.path().join("trace.jsonl");
    let sidecar_path = dir.path().join("epochs.jsonl");
    let store = dir.path().join("templates.json");
    save_trace(&trace_path, &trace).unwrap();
    write_sidecar(std::fs::File::create(&sidecar_path).unwrap(), &bounds).unwrap();

    let p = |x: &Path| x.to_str().unwrap().to_string();
    let (code, out, err) = cli(&["train", "--trace", &p(&trace_path), "--sidecar", &p(&sidecar_path), "--out", &p(&store)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("circle: 6 epochs"));
    let loaded = load_templates(&store).unwrap();
    let direct = train(&trace, &bounds, &TrainOptions::default()).unwrap();
    assert_eq!(loaded, direct);
    assert_eq!(loaded.iter().map(|t| t.class).collect::<Vec<_>>(), [GestureClass::Up, GestureClass::Circle, GestureClass::Left]);

    let (code, _, err) = cli(&[
        "train", "--trace", &p(&trace_path), "--sidecar", &p(&sidecar_path), "--out", &p(&store), "--require-all",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("down"), "{err}");

    // The trained store recognizes its own class.
    let (code, out, _) = cli(&["match", "--trace", &p(&trace_path), "--templates", &p(&store)]);
    assert_eq!(code, 0);
    let d: wristdrive::gesture::MatchDecision = serde_json::from_str(&out).unwrap();
    assert_eq!(d.class, Some(GestureClass::Circle));

    let by_class = extract_epochs(&trace, &bounds, 50.0, 60).unwrap();
    assert_eq!(by_class[&GestureClass::Up].len(), 6);
}

#[test]
fn train_rejects_epochs_outside_the_trace() {
    let (trace, _) = stream(&[synthesize_gesture(GestureClass::Up, 1, 0.1)], 0);
    let bounds = [EpochBoundary { start_us: 0, end_us: 10_000_000, class: GestureClass::Up }];
    let err = train(&trace, &bounds, &TrainOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Data(_)));
}

#[test]
fn simulate_log_rescores_identically() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let log_s = log.to_str().unwrap();
    let (code, out, err) = cli(&["simulate", "--scenario", "building", "--seed", "5", "--log", log_s]);
    assert_eq!(code, 0, "{err}");
    let live: RunReport = serde_json::from_str(&out).unwrap();
    assert!(live.goal_reached);
    let (code, out, _) = cli(&["score", "--log", log_s]);
    assert_eq!(code, 0);
    let rescored: RunReport = serde_json::from_str(&out).unwrap();
    assert_eq!(live, rescored);
    assert_eq!(score_log_file(&log).unwrap(), live);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let s = Scenario::builtin(ScenarioKind::Targets);
    let a = run_scenario(&s, &RunOptions { seed: 9, ..RunOptions::default() }).unwrap();
    let b = run_scenario(&s, &RunOptions { seed: 9, ..RunOptions::default() }).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(report_from_log(&a.log).unwrap(), a.report);
    assert_eq!(a.report.pin_contacts, 7);
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["simulate", "--seed", "minus-one"]).0, 1);
    assert_eq!(cli(&["simulate", "--tick-hz", "-5"]).0, 1);
    assert_eq!(cli(&["simulate", "--scenario", "/no/such/scenario.toml"]).0, 2);
    assert_eq!(cli(&["score", "--log", "/no/such/log"]).0, 2);

    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "v_max = 0.5\nturbo = true\n").unwrap();
    assert_eq!(cli(&["simulate", "--config", bad_cfg.to_str().unwrap()]).0, 2);

    let capture = dir.path().join("capture.bin");
    let mut bytes = encode(&Message::Hello(Role::Operator)).unwrap();
    bytes.extend(encode(&Message::Mode(OperationalMode::Teleoperated)).unwrap());
    std::fs::write(&capture, &bytes).unwrap();
    let (code, _, err) = cli(&["replay", "--trace", capture.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn replay_cli_reads_frame_captures() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = stream(
        &[synthesize_rest(60, 1, 0.1), synthesize_gesture(GestureClass::Right, 2, 0.1), synthesize_rest(60, 3, 0.1)],
        0,
    );
    let mut bytes = encode(&Message::Hello(Role::Operator)).unwrap();
    for s in &trace {
        bytes.extend(encode(&Message::from_sample(s)).unwrap());
    }
    let capture = dir.path().join("capture.bin");
    std::fs::write(&capture, &bytes).unwrap();
    let (code, out, err) = cli(&["replay", "--trace", capture.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let r: ReplayReport = serde_json::from_str(&out).unwrap();
    assert_eq!(r.detections.len(), 1);
    assert_eq!(r.detections[0].gesture, GestureClass::Right);
    assert_eq!(r.final_mode, OperationalMode::Autonomous);
}
