//! Per-sample processing chain: orientation filter, signal window, gesture
//! recognizer and mode controller.

use crate::command::{
    map_pose_to_velocity, ControlConfig, ControllerEvent, ControllerState, ModeTable,
    OperationalMode, VelocityCommand,
};
use crate::gesture::{GestureTemplate, MatchDecision, Recognizer};
use crate::imu::{
    ImuError, ImuSample, OrientationEstimate, OrientationFilter, SignalWindow,
    DEFAULT_WINDOW_CAPACITY, MATCH_CHANNELS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub estimate: Option<OrientationEstimate>,
    pub decision: MatchDecision,
    pub events: Vec<ControllerEvent>,
    /// Present whenever a command is due at the configured rate.
    pub command: Option<VelocityCommand>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: ControlConfig,
    filter: OrientationFilter,
    window: SignalWindow,
    recognizer: Recognizer,
    table: ModeTable,
    state: ControllerState,
    last_command_us: Option<u64>,
}

impl Pipeline {
    pub fn new(config: ControlConfig, templates: Vec<GestureTemplate>) -> Result<Self, crate::command::CommandError> {
        config.validate()?;
        let longest = templates.iter().map(|t| t.signal.len()).max().unwrap_or(0);
        Ok(Self {
            filter: OrientationFilter::new(config.filter_alpha).expect("validated alpha"),
            window: SignalWindow::new(
                MATCH_CHANNELS,
                DEFAULT_WINDOW_CAPACITY.max(longest),
                config.sample_rate_hz,
            ),
            recognizer: Recognizer::new(templates, config.gesture_threshold, config.refractory_s),
            table: ModeTable::default(),
            state: ControllerState::new(config.gains()?),
            last_command_us: None,
            config,
        })
    }

    pub fn with_table(mut self, table: ModeTable) -> Self {
        self.table = table;
        self
    }

    pub fn mode(&self) -> OperationalMode {
        self.state.mode
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    pub fn window(&self) -> &SignalWindow {
        &self.window
    }

    /// Forgets stream history (new operator session); the mode is kept.
    pub fn reset_stream(&mut self) {
        self.filter.reset();
        self.window.clear();
        self.recognizer.reset();
        self.last_command_us = None;
    }

    /// Processes one sample. Stale samples are rejected and leave every
    /// stage untouched.
    pub fn ingest(&mut self, sample: &ImuSample) -> Result<PipelineOutput, ImuError> {
        self.window.push_sample(sample)?;
        let estimate = self.filter.update(sample);
        let decision = self.recognizer.observe(&self.window);
        let (state, events) = self.table.step(&self.state, &decision);
        self.state = state;

        let period_us = 1e6 / self.config.command_rate_hz;
        let due = self
            .last_command_us
            .is_none_or(|last| (sample.timestamp_us - last) as f64 >= period_us - 0.5);
        let mode_changed = events
            .iter()
            .any(|e| matches!(e, ControllerEvent::ModeChanged { .. }));
        let command = if due || mode_changed {
            self.last_command_us = Some(sample.timestamp_us);
            let est = estimate.unwrap_or_else(|| OrientationEstimate::level(sample.timestamp_us));
            let mut cmd = map_pose_to_velocity(&self.config.orient(&est), &self.state.gains, self.state.mode);
            cmd.timestamp_us = sample.timestamp_us;
            Some(cmd)
        } else {
            None
        };
        Ok(PipelineOutput {
            estimate,
            decision,
            events,
            command,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{reference_templates, synthesize_gesture, synthesize_rest, GestureClass};

    fn feed(p: &mut Pipeline, epochs: &[crate::gesture::Epoch], start_us: u64) -> (Vec<PipelineOutput>, u64) {
        let mut t = start_us;
        let mut out = Vec::new();
        for e in epochs {
            for s in e.to_samples(t) {
                out.push(p.ingest(&s).unwrap());
            }
            t += e.len() as u64 * 20_000;
        }
        (out, t)
    }

    #[test]
    fn circle_engages_teleoperation() {
        let mut p = Pipeline::new(ControlConfig::default(), reference_templates()).unwrap();
        let (out, _) = feed(
            &mut p,
            &[
                synthesize_rest(40, 1, 0.05),
                synthesize_gesture(GestureClass::Circle, 2, 0.05),
                synthesize_rest(60, 3, 0.05),
            ],
            0,
        );
        let acks: Vec<_> = out
            .iter()
            .flat_map(|o| o.events.iter())
            .filter(|e| matches!(e, ControllerEvent::VibrationAck { .. }))
            .collect();
        assert_eq!(acks.len(), 1);
        assert_eq!(p.mode(), OperationalMode::Teleoperated);
        assert!(out.iter().all(|o| o.command.is_some()));
    }

    #[test]
    fn stale_sample_is_dropped() {
        let mut p = Pipeline::new(ControlConfig::default(), reference_templates()).unwrap();
        let s = crate::imu::ImuSample::new(100, [0.0, 0.0, 9.81], [0.0; 3]);
        p.ingest(&s).unwrap();
        assert!(p.ingest(&s).is_err());
        assert_eq!(p.window().len(), 1);
    }

    #[test]
    fn command_rate_decimates() {
        let cfg = ControlConfig { command_rate_hz: 10.0, ..ControlConfig::default() };
        let mut p = Pipeline::new(cfg, reference_templates()).unwrap();
        let (out, _) = feed(&mut p, &[synthesize_rest(50, 0, 0.0)], 0);
        assert_eq!(out.iter().filter(|o| o.command.is_some()).count(), 10);
    }
}
