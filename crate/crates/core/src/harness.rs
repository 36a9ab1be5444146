//! Headless runs: scenario simulation, trace replay, template training,
//! one-shot matching and scoring from an event log.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autopilot::{Autopilot, AutopilotConfig};
use crate::command::{
    map_pose_to_velocity, ControlConfig, ControllerEvent, OperationalMode, VelocityCommand,
};
use crate::gesture::{
    build_template, default_epoch_len, extract_epochs, match_window, reference_templates,
    sample_period_us, synthesize_gesture, synthesize_rest, EpochBoundary, GestureClass,
    GestureTemplate, MatchDecision, CALIBRATED_NOISE_SIGMA,
};
use crate::imu::{read_trace, ImuSample, OrientationEstimate, SignalWindow, DEFAULT_WINDOW_CAPACITY, MATCH_CHANNELS};
use crate::pipeline::Pipeline;
use crate::wire::{decode_all, route, Endpoint, Message, Role, MAGIC};
use crate::sim::{score_run, Scenario, ScoringMode, SimEvent, SimEventKind, World};

pub const DEFAULT_TICK_HZ: f64 = 50.0;
pub const DEFAULT_MAX_DURATION_S: f64 = 600.0;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Protocol(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    crate::imu::ImuError,
    crate::imu::TraceError,
    crate::gesture::GestureError,
    crate::command::CommandError,
    crate::sim::SimError,
    std::io::Error,
    serde_json::Error
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub gesture: GestureClass,
    pub score: f64,
    pub t_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub scoring: ScoringMode,
    pub seed: u64,
    pub goal_reached: bool,
    /// From the first nonzero command to the goal (or the end of the run).
    pub travel_time_s: f64,
    pub pin_contacts: usize,
    pub total_time_s: f64,
    pub wall_contacts: usize,
    pub detections: Vec<Detection>,
    pub command_count: usize,
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    RunStart { scenario: String, scoring: ScoringMode, seed: u64, tick_hz: f64 },
    Detection(Detection),
    Command { t: f64, v: f64, omega: f64 },
    Sim(SimEvent),
    RunEnd { elapsed: f64 },
}

/// A delivered command together with the estimate it was mapped from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandProvenance {
    pub estimate: OrientationEstimate,
    pub command: VelocityCommand,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub tick_hz: f64,
    pub max_duration_s: f64,
    pub control: ControlConfig,
    /// Noise on the engagement gesture.
    pub noise_sigma: f64,
    /// Overrides the scenario's route.
    pub autopilot: Option<AutopilotConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tick_hz: DEFAULT_TICK_HZ,
            max_duration_s: DEFAULT_MAX_DURATION_S,
            control: ControlConfig::default(),
            noise_sigma: CALIBRATED_NOISE_SIGMA,
            autopilot: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub log: Vec<LogRecord>,
    pub provenance: Vec<CommandProvenance>,
    pub world: World,
}

fn travel_time(first_motion: Option<f64>, finish: f64) -> f64 {
    first_motion.map_or(0.0, |t0| (finish - t0).max(0.0))
}

/// Engages teleoperation with a Circle gesture through the full pipeline,
/// then drives the scenario with the autopilot until the goal or timeout.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    if !(opts.tick_hz > 0.0 && opts.tick_hz.is_finite()) {
        return Err(HarnessError::Usage(format!("tick rate must be positive, got {}", opts.tick_hz)));
    }
    scenario.validate()?;
    let mut pipeline = Pipeline::new(opts.control.clone(), reference_templates())?;
    let mut log = vec![LogRecord::RunStart {
        scenario: scenario.name.clone(),
        scoring: scenario.scoring,
        seed: opts.seed,
        tick_hz: opts.tick_hz,
    }];

    let period = sample_period_us(opts.control.sample_rate_hz);
    let mut t_us = 0u64;
    let s = opts.seed.wrapping_mul(3);
    for epoch in [
        synthesize_rest(50, s, opts.noise_sigma),
        synthesize_gesture(GestureClass::Circle, s + 1, opts.noise_sigma),
        synthesize_rest(50, s + 2, opts.noise_sigma),
    ] {
        for sample in epoch.to_samples(t_us) {
            let out = pipeline.ingest(&sample)?;
            for e in &out.events {
                if let ControllerEvent::VibrationAck { gesture } = e {
                    log.push(LogRecord::Detection(Detection {
                        gesture: *gesture,
                        score: out.decision.score,
                        t_us: sample.timestamp_us,
                    }));
                }
            }
        }
        t_us += epoch.len() as u64 * period;
    }
    if pipeline.mode() != OperationalMode::Teleoperated {
        return Err(HarnessError::Data(
            "engagement gesture was not recognized; teleoperation never started".into(),
        ));
    }

    let gains = pipeline.state().gains;
    let mode = pipeline.mode();
    let mut world = World::from_scenario(scenario);
    let ap_cfg = opts.autopilot.clone().unwrap_or_else(|| AutopilotConfig::for_scenario(scenario));
    let mut pilot = Autopilot::new(ap_cfg, gains, [world.pose.x, world.pose.y]).map_err(HarnessError::Usage)?;

    let dt = 1.0 / opts.tick_hz;
    let ticks = (opts.max_duration_s * opts.tick_hz).ceil() as u64;
    let engaged_us = t_us;
    let mut provenance = Vec::new();
    let mut first_motion = None;
    let mut goal_time = None;
    for tick in 0..ticks {
        let t = tick as f64 * dt;
        let stamp = engaged_us + (t * 1e6).round() as u64;
        let est = pilot.step(&world, stamp);
        let cmd = map_pose_to_velocity(&est, &gains, mode);
        if first_motion.is_none() && !cmd.is_zero() {
            first_motion = Some(t);
        }
        log.push(LogRecord::Command { t, v: cmd.v, omega: cmd.omega });
        provenance.push(CommandProvenance { estimate: est, command: cmd });
        for ev in world.step(&cmd, dt)? {
            if ev.kind == SimEventKind::GoalReached && goal_time.is_none() {
                goal_time = Some(ev.time);
            }
            log.push(LogRecord::Sim(ev));
        }
        if goal_time.is_some() {
            break;
        }
    }
    log.push(LogRecord::RunEnd { elapsed: world.elapsed });
    let report = report_from_log(&log)?;
    debug_assert_eq!(report.travel_time_s, travel_time(first_motion, goal_time.unwrap_or(world.elapsed)));
    Ok(RunOutcome {
        report,
        log,
        provenance,
        world,
    })
}

/// Rebuilds a run report from its log alone.
pub fn report_from_log(log: &[LogRecord]) -> Result<RunReport, HarnessError> {
    let Some(LogRecord::RunStart { scenario, scoring, seed, .. }) = log.first() else {
        return Err(HarnessError::Data("event log does not begin with run_start".into()));
    };
    let mut detections = Vec::new();
    let mut events = Vec::new();
    let mut command_count = 0;
    let mut first_motion = None;
    let mut end = None;
    for rec in &log[1..] {
        match rec {
            LogRecord::RunStart { .. } => {
                return Err(HarnessError::Data("event log holds more than one run".into()))
            }
            LogRecord::Detection(d) => detections.push(*d),
            LogRecord::Command { t, v, omega } => {
                command_count += 1;
                if first_motion.is_none() && (*v != 0.0 || *omega != 0.0) {
                    first_motion = Some(*t);
                }
            }
            LogRecord::Sim(e) => events.push(*e),
            LogRecord::RunEnd { elapsed } => end = Some(*elapsed),
        }
    }
    let end = end.ok_or_else(|| HarnessError::Data("event log has no run_end record".into()))?;
    let goal = events
        .iter()
        .find(|e| e.kind == SimEventKind::GoalReached)
        .map(|e| e.time);
    let travel = travel_time(first_motion, goal.unwrap_or(end));
    let score = score_run(&events, *scoring, travel);
    Ok(RunReport {
        scenario: scenario.clone(),
        scoring: *scoring,
        seed: *seed,
        goal_reached: goal.is_some(),
        travel_time_s: score.travel_time_s,
        pin_contacts: score.pins_touched,
        total_time_s: score.total_time_s,
        wall_contacts: events.iter().filter(|e| e.kind == SimEventKind::WallContact).count(),
        detections,
        command_count,
    })
}

pub fn write_log<W: Write>(mut w: W, log: &[LogRecord]) -> std::io::Result<()> {
    for rec in log {
        writeln!(w, "{}", serde_json::to_string(rec).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<Vec<LogRecord>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| HarnessError::Data(format!("log line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

pub fn score_log_file(path: &Path) -> Result<RunReport, HarnessError> {
    let file = std::fs::File::open(path)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    report_from_log(&read_log(std::io::BufReader::new(file))?)
}

/// Reads operator samples from a captured frame stream. The capture may open
/// with an operator Hello; anything else an operator may not send is a
/// protocol error.
pub fn samples_from_frames(bytes: &[u8]) -> Result<Vec<ImuSample>, HarnessError> {
    let mut role = None;
    let mut out = Vec::new();
    for msg in decode_all(bytes) {
        let from = role.map_or(Endpoint::Unidentified, Endpoint::Session);
        route(from, &msg).map_err(|v| HarnessError::Protocol(v.to_string()))?;
        match msg {
            Message::Hello(Role::Operator) => role = Some(Role::Operator),
            Message::Hello(r) => {
                return Err(HarnessError::Protocol(format!("capture is from a {r} session, not an operator")))
            }
            m => out.extend(m.to_sample()),
        }
    }
    Ok(out)
}

/// Loads a trace file, or a frame capture when the file starts with the
/// frame magic.
pub fn load_samples(path: &Path) -> Result<Vec<ImuSample>, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(&MAGIC) {
        samples_from_frames(&bytes)
    } else {
        Ok(read_trace(&bytes[..])?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub samples: usize,
    pub detections: Vec<Detection>,
    pub command_count: usize,
    pub final_mode: OperationalMode,
    /// Present when a scenario was driven by the replayed commands.
    pub run: Option<RunReport>,
}

/// Streams a recorded trace through the pipeline. With a scenario, each
/// emitted command drives the world until the next one arrives.
pub fn replay(
    trace: &[ImuSample],
    templates: Vec<GestureTemplate>,
    config: &ControlConfig,
    scenario: Option<&Scenario>,
) -> Result<ReplayReport, HarnessError> {
    let mut pipeline = Pipeline::new(config.clone(), templates)?;
    let mut detections = Vec::new();
    let mut command_count = 0;
    let mut world = scenario.map(World::from_scenario);
    let mut log = scenario
        .map(|s| {
            vec![LogRecord::RunStart {
                scenario: s.name.clone(),
                scoring: s.scoring,
                seed: 0,
                tick_hz: config.command_rate_hz,
            }]
        })
        .unwrap_or_default();
    let t0 = trace.first().map_or(0, |s| s.timestamp_us);
    let mut pending: Option<VelocityCommand> = None;

    for sample in trace {
        let out = pipeline.ingest(sample)?;
        for e in &out.events {
            if let ControllerEvent::VibrationAck { gesture } = e {
                let d = Detection {
                    gesture: *gesture,
                    score: out.decision.score,
                    t_us: sample.timestamp_us,
                };
                detections.push(d);
                if world.is_some() {
                    log.push(LogRecord::Detection(d));
                }
            }
        }
        let Some(cmd) = out.command else { continue };
        command_count += 1;
        if let Some(w) = world.as_mut() {
            if let Some(prev) = pending {
                let dt = (cmd.timestamp_us - prev.timestamp_us) as f64 * 1e-6;
                log.extend(w.step(&prev, dt)?.into_iter().map(LogRecord::Sim));
            }
            let t = (cmd.timestamp_us - t0) as f64 * 1e-6;
            log.push(LogRecord::Command { t, v: cmd.v, omega: cmd.omega });
            pending = Some(cmd);
        }
    }
    let run = match world {
        Some(w) => {
            log.push(LogRecord::RunEnd { elapsed: w.elapsed });
            Some(report_from_log(&log)?)
        }
        None => None,
    };
    Ok(ReplayReport {
        samples: trace.len(),
        detections,
        command_count,
        final_mode: pipeline.mode(),
        run,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub sample_rate_hz: f64,
    /// Epochs are trimmed to this many samples.
    pub epoch_len: usize,
    /// Classes that must appear in the sidecar.
    pub required: Vec<GestureClass>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::imu::DEFAULT_SAMPLE_RATE_HZ,
            epoch_len: default_epoch_len(),
            required: Vec::new(),
        }
    }
}

/// Builds one template per labelled class.
pub fn train(
    trace: &[ImuSample],
    bounds: &[EpochBoundary],
    opts: &TrainOptions,
) -> Result<Vec<GestureTemplate>, HarnessError> {
    if bounds.is_empty() {
        return Err(HarnessError::Data("sidecar lists no epochs".into()));
    }
    let by_class = extract_epochs(trace, bounds, opts.sample_rate_hz, opts.epoch_len)?;
    let present: BTreeSet<_> = by_class.keys().copied().collect();
    let missing: Vec<_> = opts.required.iter().filter(|c| !present.contains(c)).map(|c| c.name()).collect();
    if !missing.is_empty() {
        return Err(HarnessError::Data(format!("no training epochs for: {}", missing.join(", "))));
    }
    by_class
        .iter()
        .map(|(class, epochs)| {
            build_template(*class, epochs)
                .map_err(|e| HarnessError::Data(format!("class {}: {e}", class.name())))
        })
        .collect()
}

/// Scores the tail of a trace once, without refractory state.
pub fn match_trace(
    trace: &[ImuSample],
    templates: &[GestureTemplate],
    threshold: f64,
    sample_rate_hz: f64,
) -> Result<MatchDecision, HarnessError> {
    let longest = templates.iter().map(|t| t.signal.len()).max().unwrap_or(0);
    let mut window = SignalWindow::new(MATCH_CHANNELS, DEFAULT_WINDOW_CAPACITY.max(longest), sample_rate_hz);
    for s in trace {
        window.push_sample(s)?;
    }
    Ok(match_window(&window, templates, threshold, 0.0, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioKind;

    #[test]
    fn log_round_trips_through_json() {
        let log = vec![
            LogRecord::RunStart {
                scenario: "x".into(),
                scoring: ScoringMode::PinPenalty,
                seed: 3,
                tick_hz: 50.0,
            },
            LogRecord::Command { t: 0.0, v: 0.5, omega: -0.1 },
            LogRecord::Sim(SimEvent { kind: SimEventKind::PinContact { pin: 2 }, time: 1.5 }),
            LogRecord::RunEnd { elapsed: 4.0 },
        ];
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        assert_eq!(read_log(&buf[..]).unwrap(), log);
        let r = report_from_log(&log).unwrap();
        assert_eq!(r.pin_contacts, 1);
        assert_eq!(r.travel_time_s, 4.0);
        assert_eq!(r.total_time_s, 9.0);
        assert!(!r.goal_reached);
    }

    #[test]
    fn log_without_start_is_rejected() {
        assert!(report_from_log(&[LogRecord::RunEnd { elapsed: 1.0 }]).is_err());
    }

    #[test]
    fn commands_are_mapped_from_estimates() {
        let opts = RunOptions { max_duration_s: 5.0, ..RunOptions::default() };
        let out = run_scenario(&Scenario::builtin(ScenarioKind::Building), &opts).unwrap();
        let gains = ControlConfig::default().gains().unwrap();
        assert!(!out.provenance.is_empty());
        for p in &out.provenance {
            let m = map_pose_to_velocity(&p.estimate, &gains, OperationalMode::Teleoperated);
            assert_eq!((m.v, m.omega), (p.command.v, p.command.omega));
        }
        assert_eq!(out.report.detections.len(), 1);
        assert_eq!(out.report.detections[0].gesture, GestureClass::Circle);
    }

    #[test]
    fn frame_capture_must_come_from_an_operator() {
        let sample = ImuSample::new(20_000, [0.0, 0.5, 9.75], [0.25; 3]);
        let mut bytes = crate::wire::encode(&Message::Hello(Role::Operator)).unwrap();
        bytes.extend(crate::wire::encode(&Message::from_sample(&sample)).unwrap());
        assert_eq!(samples_from_frames(&bytes).unwrap(), vec![sample]);

        bytes.extend(crate::wire::encode(&Message::VelocityCmd { timestamp_us: 0, v: 1.0, omega: 0.0 }).unwrap());
        assert_eq!(samples_from_frames(&bytes).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn zero_tick_rate_is_usage_error() {
        let opts = RunOptions { tick_hz: 0.0, ..RunOptions::default() };
        let err = run_scenario(&Scenario::builtin(ScenarioKind::Slalom), &opts).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
