//! Operational-mode state machine and wrist-pose to velocity mapping.
//!
//! The controller starts in [`OperationalMode::Autonomous`], where the robot
//! is held still. A recognized Circle toggles between Autonomous and
//! Teleoperated; every recognized gesture is acknowledged with a vibration
//! event. In Teleoperated mode roll drives linear velocity and pitch drives
//! angular velocity, with gains chosen so a quarter-turn of the wrist maps
//! to the robot's velocity limit.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{GestureClass, MatchDecision, DEFAULT_REFRACTORY_S, DEFAULT_THRESHOLD};
use crate::imu::{clamp_angle, OrientationEstimate, DEFAULT_FILTER_ALPHA, DEFAULT_SAMPLE_RATE_HZ};

pub const DEFAULT_V_MAX: f64 = 0.7;
pub const DEFAULT_OMEGA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationalMode {
    #[default]
    Autonomous,
    Teleoperated,
}

impl OperationalMode {
    pub fn wire_code(self) -> u8 {
        match self {
            OperationalMode::Autonomous => 0,
            OperationalMode::Teleoperated => 1,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OperationalMode::Autonomous),
            1 => Some(OperationalMode::Teleoperated),
            _ => None,
        }
    }
}

impl fmt::Display for OperationalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperationalMode::Autonomous => "autonomous",
            OperationalMode::Teleoperated => "teleoperated",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommandError {
    #[error("velocity limits must be positive, got v_max = {v_max}, omega_max = {omega_max}")]
    NonPositiveLimit { v_max: f64, omega_max: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Proportional gains from wrist angle to body velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    /// (m/s)/rad
    pub k_roll: f64,
    /// (rad/s)/rad
    pub k_pitch: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

pub fn make_gains(v_max: f64, omega_max: f64) -> Result<GainConfig, CommandError> {
    if !(v_max > 0.0 && omega_max > 0.0) || !v_max.is_finite() || !omega_max.is_finite() {
        return Err(CommandError::NonPositiveLimit { v_max, omega_max });
    }
    Ok(GainConfig {
        k_roll: v_max / FRAC_PI_2,
        k_pitch: omega_max / FRAC_PI_2,
        v_max,
        omega_max,
    })
}

impl Default for GainConfig {
    fn default() -> Self {
        make_gains(DEFAULT_V_MAX, DEFAULT_OMEGA_MAX).expect("default limits are positive")
    }
}

/// Body-frame command for the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// m/s
    pub v: f64,
    /// rad/s
    pub omega: f64,
    pub timestamp_us: u64,
}

impl VelocityCommand {
    pub fn stop(timestamp_us: u64) -> Self {
        Self {
            v: 0.0,
            omega: 0.0,
            timestamp_us,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0.0 && self.omega == 0.0
    }
}

/// `v = K_r * roll`, `omega = K_p * pitch` in Teleoperated mode, zero otherwise.
///
/// Evaluated as `limit * angle / (pi/2)`, which is the same product but lands
/// exactly on the limit at a full quarter turn.
pub fn map_pose_to_velocity(
    est: &OrientationEstimate,
    gains: &GainConfig,
    mode: OperationalMode,
) -> VelocityCommand {
    match mode {
        OperationalMode::Autonomous => VelocityCommand::stop(est.timestamp_us),
        OperationalMode::Teleoperated => {
            let roll = clamp_angle(est.roll);
            let pitch = clamp_angle(est.pitch);
            VelocityCommand {
                v: (gains.v_max * (roll / FRAC_PI_2)).clamp(-gains.v_max, gains.v_max),
                omega: (gains.omega_max * (pitch / FRAC_PI_2))
                    .clamp(-gains.omega_max, gains.omega_max),
                timestamp_us: est.timestamp_us,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControllerEvent {
    VibrationAck { gesture: GestureClass },
    ModeChanged { mode: OperationalMode },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub mode: OperationalMode,
    pub gains: GainConfig,
    pub last_fire_us: Option<u64>,
}

impl ControllerState {
    pub fn new(gains: GainConfig) -> Self {
        Self {
            mode: OperationalMode::Autonomous,
            gains,
            last_fire_us: None,
        }
    }
}

/// Gesture-driven transitions. Gestures without an entry are acknowledged
/// and otherwise ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    transitions: BTreeMap<(OperationalMode, GestureClass), OperationalMode>,
}

impl Default for ModeTable {
    fn default() -> Self {
        let mut transitions = BTreeMap::new();
        transitions.insert(
            (OperationalMode::Autonomous, GestureClass::Circle),
            OperationalMode::Teleoperated,
        );
        transitions.insert(
            (OperationalMode::Teleoperated, GestureClass::Circle),
            OperationalMode::Autonomous,
        );
        Self { transitions }
    }
}

impl ModeTable {
    pub fn with_transition(
        mut self,
        from: OperationalMode,
        gesture: GestureClass,
        to: OperationalMode,
    ) -> Self {
        self.transitions.insert((from, gesture), to);
        self
    }

    pub fn target(&self, from: OperationalMode, gesture: GestureClass) -> Option<OperationalMode> {
        self.transitions.get(&(from, gesture)).copied()
    }

    pub fn step(
        &self,
        state: &ControllerState,
        decision: &MatchDecision,
    ) -> (ControllerState, Vec<ControllerEvent>) {
        let Some(gesture) = decision.class else {
            return (*state, Vec::new());
        };
        let mut next = *state;
        next.last_fire_us = Some(decision.timestamp_us);
        let mut events = vec![ControllerEvent::VibrationAck { gesture }];
        if let Some(mode) = self.target(state.mode, gesture) {
            if mode != state.mode {
                next.mode = mode;
                events.push(ControllerEvent::ModeChanged { mode });
            }
        }
        (next, events)
    }
}

/// Applies one match decision under the default Circle-toggle table.
pub fn step_mode(
    state: &ControllerState,
    decision: &MatchDecision,
) -> (ControllerState, Vec<ControllerEvent>) {
    ModeTable::default().step(state, decision)
}

/// Runtime configuration, read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub v_max: f64,
    pub omega_max: f64,
    /// Negate roll before mapping (left-wrist wear).
    pub mirror_roll: bool,
    /// Negate pitch before mapping.
    pub mirror_pitch: bool,
    pub command_rate_hz: f64,
    pub gesture_threshold: f64,
    pub refractory_s: f64,
    pub filter_alpha: f64,
    pub sample_rate_hz: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            v_max: DEFAULT_V_MAX,
            omega_max: DEFAULT_OMEGA_MAX,
            mirror_roll: false,
            mirror_pitch: false,
            command_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            gesture_threshold: DEFAULT_THRESHOLD,
            refractory_s: DEFAULT_REFRACTORY_S,
            filter_alpha: DEFAULT_FILTER_ALPHA,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl ControlConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CommandError> {
        let cfg: ControlConfig =
            toml::from_str(text).map_err(|e| CommandError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CommandError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), CommandError> {
        make_gains(self.v_max, self.omega_max)?;
        if !(self.gesture_threshold > 0.0 && self.gesture_threshold <= 1.0) {
            return Err(CommandError::Config(format!(
                "gesture_threshold must lie in (0, 1], got {}",
                self.gesture_threshold
            )));
        }
        if !(self.refractory_s >= 0.0) {
            return Err(CommandError::Config("refractory_s must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.filter_alpha) {
            return Err(CommandError::Config("filter_alpha must lie in [0, 1]".into()));
        }
        if !(self.command_rate_hz > 0.0 && self.sample_rate_hz > 0.0) {
            return Err(CommandError::Config("rates must be positive".into()));
        }
        Ok(())
    }

    pub fn gains(&self) -> Result<GainConfig, CommandError> {
        make_gains(self.v_max, self.omega_max)
    }

    /// Applies the configured axis mirroring.
    pub fn orient(&self, est: &OrientationEstimate) -> OrientationEstimate {
        let flip = |on: bool, a: f64| if on { -a } else { a };
        OrientationEstimate {
            roll: flip(self.mirror_roll, est.roll),
            pitch: flip(self.mirror_pitch, est.pitch),
            timestamp_us: est.timestamp_us,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn est(roll: f64, pitch: f64) -> OrientationEstimate {
        OrientationEstimate::new(roll, pitch, 0)
    }

    fn fire(class: GestureClass) -> MatchDecision {
        MatchDecision::recognized(class, 0.9, 1_000)
    }

    #[test]
    fn circle_toggles_mode() {
        let s = ControllerState::new(GainConfig::default());
        let (s, ev) = step_mode(&s, &fire(GestureClass::Circle));
        assert_eq!(s.mode, OperationalMode::Teleoperated);
        assert_eq!(
            ev,
            vec![
                ControllerEvent::VibrationAck { gesture: GestureClass::Circle },
                ControllerEvent::ModeChanged { mode: OperationalMode::Teleoperated },
            ]
        );
        let (s, ev) = step_mode(&s, &fire(GestureClass::Circle));
        assert_eq!(s.mode, OperationalMode::Autonomous);
        assert_eq!(ev[1], ControllerEvent::ModeChanged { mode: OperationalMode::Autonomous });
    }

    #[test]
    fn other_gestures_only_ack() {
        let s = ControllerState::new(GainConfig::default());
        let (n, ev) = step_mode(&s, &fire(GestureClass::Up));
        assert_eq!(n.mode, OperationalMode::Autonomous);
        assert_eq!(ev, vec![ControllerEvent::VibrationAck { gesture: GestureClass::Up }]);
        let (n, ev) = step_mode(&s, &MatchDecision::none(5));
        assert_eq!(n, s);
        assert!(ev.is_empty());
    }

    #[test]
    fn table_extension_point() {
        let table = ModeTable::default().with_transition(
            OperationalMode::Teleoperated,
            GestureClass::Down,
            OperationalMode::Autonomous,
        );
        let mut s = ControllerState::new(GainConfig::default());
        s.mode = OperationalMode::Teleoperated;
        let (n, _) = table.step(&s, &fire(GestureClass::Down));
        assert_eq!(n.mode, OperationalMode::Autonomous);
    }

    #[test]
    fn mapping_examples() {
        let teleop = OperationalMode::Teleoperated;
        let g = make_gains(0.7, 1.0).unwrap();
        assert!(map_pose_to_velocity(&est(0.0, 0.0), &g, teleop).is_zero());
        let c = map_pose_to_velocity(&est(FRAC_PI_2, 0.0), &g, teleop);
        assert_eq!((c.v, c.omega), (0.7, 0.0));
        let c = map_pose_to_velocity(&est(FRAC_PI_4, -FRAC_PI_4), &g, teleop);
        assert!((c.v - 0.35).abs() < 1e-12);
        assert!((c.omega + 0.5).abs() < 1e-12);
        let c = map_pose_to_velocity(&est(1.0, -1.2), &g, OperationalMode::Autonomous);
        assert!(c.is_zero());
    }

    #[test]
    fn gain_examples() {
        assert!((make_gains(FRAC_PI_2, 1.0).unwrap().k_roll - 1.0).abs() < 1e-15);
        assert!((make_gains(0.7, 1.0).unwrap().k_roll - 1.4 / PI).abs() < 1e-15);
        assert!((make_gains(0.7, 1.0).unwrap().k_roll - 0.4456).abs() < 1e-4);
        assert!(make_gains(0.0, 1.0).is_err());
        assert!(make_gains(0.7, -1.0).is_err());
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        assert_eq!(ControlConfig::from_toml_str("").unwrap(), ControlConfig::default());
        let c = ControlConfig::from_toml_str("v_max = 0.5\nmirror_roll = true\n").unwrap();
        assert_eq!(c.v_max, 0.5);
        assert!(c.mirror_roll);
        assert!(ControlConfig::from_toml_str("vmax = 0.5\n").is_err());
        assert!(ControlConfig::from_toml_str("gesture_threshold = 0.0\n").is_err());
        let mirrored = c.orient(&est(0.3, 0.2));
        assert_eq!((mirrored.roll, mirrored.pitch), (-0.3, 0.2));
    }

    proptest! {
        #[test]
        fn double_circle_is_identity(start_teleop: bool) {
            let mut s = ControllerState::new(GainConfig::default());
            if start_teleop {
                s.mode = OperationalMode::Teleoperated;
            }
            let (a, _) = step_mode(&s, &fire(GestureClass::Circle));
            let (b, _) = step_mode(&a, &fire(GestureClass::Circle));
            prop_assert_eq!(b.mode, s.mode);
        }

        #[test]
        fn velocities_saturate(
            roll in -FRAC_PI_2..=FRAC_PI_2, pitch in -FRAC_PI_2..=FRAC_PI_2,
            v_max in 0.1..3.0f64, w_max in 0.1..3.0f64,
        ) {
            let g = make_gains(v_max, w_max).unwrap();
            let c = map_pose_to_velocity(&est(roll, pitch), &g, OperationalMode::Teleoperated);
            prop_assert!(c.v.abs() <= v_max);
            prop_assert!(c.omega.abs() <= w_max);
        }
    }
}
