//! Differential-drive kinematics, scenario worlds and run scoring.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{OperationalMode, VelocityCommand};

/// Seconds added per touched pin in penalty scoring.
pub const PIN_PENALTY_S: f64 = 5.0;
/// Below this angular rate the straight-line step is used.
pub const STRAIGHT_EPSILON: f64 = 1e-9;
pub const DEFAULT_FOOTPRINT_RADIUS: f64 = 0.35;
pub const DEFAULT_PIN_RADIUS: f64 = 0.05;
pub const DEFAULT_TICK_HZ: f64 = 50.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step must be positive, got {0}")]
    NonPositiveTimestep(f64),
    #[error("wheel parameters must be positive (r = {r}, d = {d})")]
    BadWheels { r: f64, d: f64 },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelParams {
    /// Wheel radius, m.
    pub r: f64,
    /// Distance between the wheels, m.
    pub d: f64,
}

impl WheelParams {
    pub fn new(r: f64, d: f64) -> Result<Self, SimError> {
        if !(r > 0.0 && d > 0.0) {
            return Err(SimError::BadWheels { r, d });
        }
        Ok(Self { r, d })
    }
}

impl Default for WheelParams {
    fn default() -> Self {
        // roughly a four-wheel skid-steer platform's equivalent axle
        Self { r: 0.11, d: 0.4 }
    }
}

/// Wheel angular rates to body velocities `(v, omega)`.
pub fn wheel_to_body(omega_right: f64, omega_left: f64, p: &WheelParams) -> (f64, f64) {
    (
        p.r * (omega_right + omega_left) / 2.0,
        p.r * (omega_right - omega_left) / p.d,
    )
}

/// Inverse of [`wheel_to_body`]: `(omega_right, omega_left)`.
pub fn body_to_wheel(v: f64, omega: f64, p: &WheelParams) -> (f64, f64) {
    (
        (2.0 * v + omega * p.d) / (2.0 * p.r),
        (2.0 * v - omega * p.d) / (2.0 * p.r),
    )
}

/// Wraps into `[0, 2pi)`.
pub fn normalize_heading(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_pi(a: f64) -> f64 {
    let t = normalize_heading(a);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_heading(theta),
        }
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        (self.x - p[0]).hypot(self.y - p[1])
    }
}

/// Exact constant-input unicycle step.
///
/// The chord form `v*dt*sinc(h)*(cos, sin)(theta + h)` with `h = omega*dt/2`
/// equals `(v/omega)(sin(theta') - sin(theta), cos(theta) - cos(theta'))` and
/// stays well conditioned as `omega` shrinks.
pub fn integrate(pose: &RobotPose, cmd: &VelocityCommand, dt: f64) -> Result<RobotPose, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveTimestep(dt));
    }
    let (v, w) = (cmd.v, cmd.omega);
    let (x, y) = if w.abs() < STRAIGHT_EPSILON {
        (
            pose.x + v * pose.theta.cos() * dt,
            pose.y + v * pose.theta.sin() * dt,
        )
    } else {
        let half = 0.5 * w * dt;
        let chord = v * dt * half.sin() / half;
        let mid = pose.theta + half;
        (pose.x + chord * mid.cos(), pose.y + chord * mid.sin())
    };
    Ok(RobotPose::new(x, y, pose.theta + w * dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinState {
    Standing,
    Knocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub position: [f64; 2],
    pub radius: f64,
    pub state: PinState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

impl Wall {
    fn closest_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (dx, dy) = (self.to[0] - self.from[0], self.to[1] - self.from[1]);
        let len_sq = dx * dx + dy * dy;
        let t = if len_sq == 0.0 {
            0.0
        } else {
            (((p[0] - self.from[0]) * dx + (p[1] - self.from[1]) * dy) / len_sq).clamp(0.0, 1.0)
        };
        [self.from[0] + t * dx, self.from[1] + t * dy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Goal {
    /// Cross the segment `from`-`to`.
    Line { from: [f64; 2], to: [f64; 2] },
    /// Knock down every pin.
    AllPins,
    /// Visit the points in order, each within `tolerance` metres.
    Waypoints { points: Vec<[f64; 2]>, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Travel time plus a fixed penalty per touched pin.
    PinPenalty,
    /// Travel time only.
    TravelOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Slalom,
    Targets,
    Building,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Slalom, ScenarioKind::Targets, ScenarioKind::Building];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Slalom => "slalom",
            ScenarioKind::Targets => "targets",
            ScenarioKind::Building => "building",
        }
    }

    pub fn scoring(self) -> ScoringMode {
        match self {
            ScenarioKind::Slalom => ScoringMode::PinPenalty,
            ScenarioKind::Targets | ScenarioKind::Building => ScoringMode::TravelOnly,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimError::UnknownScenario(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_pin_radius")]
    pub radius: f64,
}

fn default_pin_radius() -> f64 {
    DEFAULT_PIN_RADIUS
}

fn default_footprint() -> f64 {
    DEFAULT_FOOTPRINT_RADIUS
}

/// Route hints for the scripted pilot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteHint {
    pub route: Vec<[f64; 2]>,
    pub lookahead: Option<f64>,
    pub angular_gain: Option<f64>,
}

/// Scenario file contents (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub scoring: ScoringMode,
    pub arena: Bounds,
    pub start: RobotPose,
    #[serde(default = "default_footprint")]
    pub footprint_radius: f64,
    #[serde(default)]
    pub wheels: WheelParams,
    #[serde(default)]
    pub pins: Vec<PinSpec>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    pub goal: Goal,
    #[serde(default)]
    pub autopilot: Option<RouteHint>,
}

const SLALOM_TOML: &str = include_str!("../scenarios/slalom.toml");
const TARGETS_TOML: &str = include_str!("../scenarios/targets.toml");
const BUILDING_TOML: &str = include_str!("../scenarios/building.toml");

impl Scenario {
    /// Built-in fixture geometry for each of the three course types.
    pub fn builtin(kind: ScenarioKind) -> Scenario {
        let text = match kind {
            ScenarioKind::Slalom => SLALOM_TOML,
            ScenarioKind::Targets => TARGETS_TOML,
            ScenarioKind::Building => BUILDING_TOML,
        };
        Scenario::from_toml_str(text).expect("built-in scenarios parse")
    }

    pub fn builtin_text(kind: ScenarioKind) -> &'static str {
        match kind {
            ScenarioKind::Slalom => SLALOM_TOML,
            ScenarioKind::Targets => TARGETS_TOML,
            ScenarioKind::Building => BUILDING_TOML,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SimError::Scenario(m) => SimError::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// A built-in name (`slalom`, `targets`, `building`) or a path to a file.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, SimError> {
        match name_or_path.parse::<ScenarioKind>() {
            Ok(kind) => Ok(Scenario::builtin(kind)),
            Err(_) => Scenario::load(Path::new(name_or_path)),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let a = &self.arena;
        if !(a.max_x > a.min_x && a.max_y > a.min_y) {
            return Err(SimError::Scenario("arena: max must exceed min".into()));
        }
        if !(self.footprint_radius > 0.0) {
            return Err(SimError::Scenario("footprint_radius must be positive".into()));
        }
        WheelParams::new(self.wheels.r, self.wheels.d)?;
        if let Some((i, _)) = self.pins.iter().enumerate().find(|(_, p)| !(p.radius > 0.0)) {
            return Err(SimError::Scenario(format!("pins[{i}]: radius must be positive")));
        }
        if let Goal::Waypoints { points, tolerance } = &self.goal {
            if points.is_empty() || !(*tolerance > 0.0) {
                return Err(SimError::Scenario(
                    "goal: waypoint list must be non-empty with positive tolerance".into(),
                ));
            }
        }
        if matches!(self.goal, Goal::AllPins) && self.pins.is_empty() {
            return Err(SimError::Scenario("goal all_pins needs at least one pin".into()));
        }
        Ok(())
    }
}

/// Parses scenario text and builds its initial world.
pub fn load_scenario(spec: &str) -> Result<World, SimError> {
    Ok(World::from_scenario(&Scenario::from_toml_str(spec)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEventKind {
    PinContact { pin: usize },
    GoalReached,
    WallContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    #[serde(flatten)]
    pub kind: SimEventKind,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub pose: RobotPose,
    pub footprint_radius: f64,
    pub wheels: WheelParams,
    pub arena: Bounds,
    pub pins: Vec<Pin>,
    pub walls: Vec<Wall>,
    pub goal: Goal,
    pub scoring: ScoringMode,
    pub elapsed: f64,
    pub events: Vec<SimEvent>,
    pub last_command: VelocityCommand,
    next_waypoint: usize,
    goal_reached: bool,
    in_wall_contact: bool,
}

impl World {
    pub fn from_scenario(s: &Scenario) -> World {
        World {
            pose: RobotPose::new(s.start.x, s.start.y, s.start.theta),
            footprint_radius: s.footprint_radius,
            wheels: s.wheels,
            arena: s.arena,
            pins: s
                .pins
                .iter()
                .map(|p| Pin {
                    position: [p.x, p.y],
                    radius: p.radius,
                    state: PinState::Standing,
                })
                .collect(),
            walls: s.walls.clone(),
            goal: s.goal.clone(),
            scoring: s.scoring,
            elapsed: 0.0,
            events: Vec::new(),
            last_command: VelocityCommand::default(),
            next_waypoint: 0,
            goal_reached: false,
            in_wall_contact: false,
        }
    }

    pub fn goal_reached(&self) -> bool {
        self.goal_reached
    }

    pub fn standing_pins(&self) -> usize {
        self.pins.iter().filter(|p| p.state == PinState::Standing).count()
    }

    /// Index of the next goal waypoint still to visit.
    pub fn next_waypoint(&self) -> usize {
        self.next_waypoint
    }

    /// Advances the world by `dt` under `cmd`, returning the events fired.
    pub fn step(&mut self, cmd: &VelocityCommand, dt: f64) -> Result<Vec<SimEvent>, SimError> {
        let prev = self.pose;
        let mut pose = integrate(&self.pose, cmd, dt)?;
        self.elapsed += dt;
        self.last_command = *cmd;
        let time = self.elapsed;
        let mut fired = Vec::new();

        let contact = self.resolve_walls(&mut pose, &prev);
        if contact && !self.in_wall_contact {
            fired.push(SimEvent { kind: SimEventKind::WallContact, time });
        }
        self.in_wall_contact = contact;
        self.pose = pose;

        for (i, pin) in self.pins.iter_mut().enumerate() {
            if pin.state == PinState::Standing
                && pose.distance_to(pin.position) < self.footprint_radius + pin.radius
            {
                pin.state = PinState::Knocked;
                fired.push(SimEvent { kind: SimEventKind::PinContact { pin: i }, time });
            }
        }

        if !self.goal_reached && self.check_goal(&prev) {
            self.goal_reached = true;
            fired.push(SimEvent { kind: SimEventKind::GoalReached, time });
        }
        self.events.extend_from_slice(&fired);
        Ok(fired)
    }

    // Pushes the footprint out of walls and arena edges; true on contact.
    fn resolve_walls(&self, pose: &mut RobotPose, prev: &RobotPose) -> bool {
        let r = self.footprint_radius;
        let mut contact = false;
        for wall in &self.walls {
            let q = wall.closest_point([pose.x, pose.y]);
            let (dx, dy) = (pose.x - q[0], pose.y - q[1]);
            let dist = dx.hypot(dy);
            if dist < r {
                contact = true;
                let (nx, ny) = if dist > 1e-12 {
                    (dx / dist, dy / dist)
                } else {
                    let (px, py) = (prev.x - q[0], prev.y - q[1]);
                    let pd = px.hypot(py).max(1e-12);
                    (px / pd, py / pd)
                };
                pose.x = q[0] + nx * r;
                pose.y = q[1] + ny * r;
            }
        }
        let a = &self.arena;
        let (lo_x, hi_x) = (a.min_x + r, a.max_x - r);
        let (lo_y, hi_y) = (a.min_y + r, a.max_y - r);
        let cx = pose.x.clamp(lo_x.min(hi_x), hi_x.max(lo_x));
        let cy = pose.y.clamp(lo_y.min(hi_y), hi_y.max(lo_y));
        if cx != pose.x || cy != pose.y {
            contact = true;
            pose.x = cx;
            pose.y = cy;
        }
        contact
    }

    fn check_goal(&mut self, prev: &RobotPose) -> bool {
        match &self.goal {
            Goal::Line { from, to } => {
                segments_intersect([prev.x, prev.y], [self.pose.x, self.pose.y], *from, *to)
            }
            Goal::AllPins => self.pins.iter().all(|p| p.state == PinState::Knocked),
            Goal::Waypoints { points, tolerance } => {
                while self.next_waypoint < points.len()
                    && self.pose.distance_to(points[self.next_waypoint]) <= *tolerance
                {
                    self.next_waypoint += 1;
                }
                self.next_waypoint == points.len()
            }
        }
    }

    /// One telemetry record for consoles and logs.
    pub fn snapshot(&self, mode: OperationalMode) -> TelemetrySnapshot {
        let (wr, wl) = body_to_wheel(self.last_command.v, self.last_command.omega, &self.wheels);
        TelemetrySnapshot {
            t: self.elapsed,
            x: self.pose.x,
            y: self.pose.y,
            theta: self.pose.theta,
            mode,
            v: self.last_command.v,
            omega: self.last_command.omega,
            wheel_right: wr,
            wheel_left: wl,
            pins: self.pins.iter().map(|p| p.state).collect(),
            goal_reached: self.goal_reached,
            last_event: self.events.last().copied(),
        }
    }
}

/// `step_world` in free-function form.
pub fn step_world(world: &mut World, cmd: &VelocityCommand, dt: f64) -> Result<Vec<SimEvent>, SimError> {
    world.step(cmd, dt)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Closed-segment intersection test.
fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| {
        p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub mode: OperationalMode,
    pub v: f64,
    pub omega: f64,
    pub wheel_right: f64,
    pub wheel_left: f64,
    pub pins: Vec<PinState>,
    pub goal_reached: bool,
    pub last_event: Option<SimEvent>,
}

impl TelemetrySnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("telemetry serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub travel_time_s: f64,
    pub pins_touched: usize,
    pub total_time_s: f64,
}

pub fn score_run(events: &[SimEvent], scoring: ScoringMode, travel_time_s: f64) -> RunScore {
    let pins_touched = events
        .iter()
        .filter(|e| matches!(e.kind, SimEventKind::PinContact { .. }))
        .count();
    let total_time_s = match scoring {
        ScoringMode::PinPenalty => travel_time_s + PIN_PENALTY_S * pins_touched as f64,
        ScoringMode::TravelOnly => travel_time_s,
    };
    RunScore {
        travel_time_s,
        pins_touched,
        total_time_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cmd(v: f64, omega: f64) -> VelocityCommand {
        VelocityCommand { v, omega, timestamp_us: 0 }
    }

    fn pin_events(n: usize) -> Vec<SimEvent> {
        (0..n)
            .map(|i| SimEvent { kind: SimEventKind::PinContact { pin: i }, time: i as f64 })
            .collect()
    }

    #[test]
    fn wheel_examples() {
        let p = WheelParams::new(0.1, 0.4).unwrap();
        let (v, w) = wheel_to_body(5.0, 5.0, &p);
        assert!((v - 0.5).abs() < 1e-15 && w == 0.0);
        let (v, w) = wheel_to_body(2.0, 1.0, &p);
        assert!((v - 0.15).abs() < 1e-15 && (w - 0.25).abs() < 1e-15);
        assert_eq!(wheel_to_body(3.0, -3.0, &p).0, 0.0);

        let (r, l) = body_to_wheel(0.5, 0.0, &p);
        assert!((r - 5.0).abs() < 1e-12 && (l - 5.0).abs() < 1e-12);
        let (r, l) = body_to_wheel(0.15, 0.25, &p);
        assert!((r - 2.0).abs() < 1e-12 && (l - 1.0).abs() < 1e-12);
        assert_eq!(body_to_wheel(0.0, 0.0, &p), (0.0, 0.0));
        assert!(WheelParams::new(0.0, 0.4).is_err());
    }

    #[test]
    fn integrate_examples() {
        let p = integrate(&RobotPose::new(0.0, 0.0, 0.0), &cmd(1.0, 0.0), 0.5).unwrap();
        assert_eq!((p.x, p.y, p.theta), (0.5, 0.0, 0.0));

        for n in [1usize, 7, 100] {
            let mut p = RobotPose::new(0.0, 0.0, 0.0);
            for _ in 0..n {
                p = integrate(&p, &cmd(1.0, 1.0), PI / n as f64).unwrap();
            }
            assert!(p.x.abs() < 1e-9 && (p.y - 2.0).abs() < 1e-9, "{p:?}");
            assert!((p.theta - PI).abs() < 1e-9);
        }

        let start = RobotPose::new(1.0, -2.0, 4.0);
        assert_eq!(integrate(&start, &cmd(0.0, 0.0), 0.3).unwrap(), start);
        assert!(integrate(&start, &cmd(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn heading_normalization() {
        assert_eq!(normalize_heading(-1e-18), 0.0);
        assert!((normalize_heading(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
        assert!(normalize_heading(TAU) < TAU);
        assert!((wrap_pi(1.5 * PI) + 0.5 * PI).abs() < 1e-15);
    }

    fn open_scenario(pins: &str, goal: &str) -> String {
        format!(
            "name = \"t\"\nscoring = \"pin_penalty\"\nstart = {{ x = 1.0, y = 1.0, theta = 0.0 }}\n\
             arena = {{ min_x = 0.0, min_y = 0.0, max_x = 10.0, max_y = 4.0 }}\n{pins}\n{goal}\n"
        )
    }

    #[test]
    fn driving_over_a_pin_knocks_it_once() {
        let text = open_scenario(
            "pins = [{ x = 2.0, y = 1.0 }]",
            "goal = { kind = \"line\", from = [8.0, 0.0], to = [8.0, 4.0] }",
        );
        let mut w = load_scenario(&text).unwrap();
        let mut contacts = 0;
        for _ in 0..100 {
            contacts += w
                .step(&cmd(1.0, 0.0), 0.02)
                .unwrap()
                .iter()
                .filter(|e| matches!(e.kind, SimEventKind::PinContact { pin: 0 }))
                .count();
        }
        assert_eq!(contacts, 1);
        assert_eq!(w.pins[0].state, PinState::Knocked);
        assert!((w.pose.x - 3.0).abs() < 1e-9);
    }

    #[test]
    fn idle_command_only_advances_time() {
        let mut w = World::from_scenario(&Scenario::builtin(ScenarioKind::Slalom));
        let before = w.pose;
        let ev = w.step(&cmd(0.0, 0.0), 0.02).unwrap();
        assert!(ev.is_empty());
        assert_eq!(w.pose, before);
        assert!((w.elapsed - 0.02).abs() < 1e-15);
        assert_eq!(w.standing_pins(), 7);
    }

    #[test]
    fn wall_contact_clamps() {
        let text = open_scenario("", "goal = { kind = \"line\", from = [8.0, 0.0], to = [8.0, 4.0] }")
            .replace("x = 1.0, y = 1.0, theta = 0.0", "x = 9.65, y = 1.0, theta = 0.0");
        let mut w = load_scenario(&text).unwrap();
        let ev = w.step(&cmd(1.0, 0.0), 0.1).unwrap();
        assert!(ev.iter().any(|e| e.kind == SimEventKind::WallContact));
        assert!((w.pose.x - 9.65).abs() < 1e-12);

        let walled = open_scenario(
            "walls = [{ from = [3.0, 0.0], to = [3.0, 4.0] }]",
            "goal = { kind = \"line\", from = [8.0, 0.0], to = [8.0, 4.0] }",
        );
        let mut w = load_scenario(&walled).unwrap();
        let mut hits = 0;
        for _ in 0..200 {
            hits += w.step(&cmd(0.7, 0.0), 0.02).unwrap().len();
        }
        assert_eq!(hits, 1);
        assert!((w.pose.x - (3.0 - 0.35)).abs() < 1e-9);
    }

    #[test]
    fn builtin_geometry() {
        let s = Scenario::builtin(ScenarioKind::Slalom);
        assert_eq!((s.arena.width(), s.arena.height()), (3.3, 9.0));
        assert_eq!(s.pins.len(), 7);
        let t = World::from_scenario(&Scenario::builtin(ScenarioKind::Targets));
        assert_eq!(t.standing_pins(), 7);
        assert!(!t.goal_reached());
        let b = Scenario::builtin(ScenarioKind::Building);
        assert!(!b.walls.is_empty());
    }

    #[test]
    fn missing_arena_is_a_parse_error() {
        let text = "name = \"x\"\nscoring = \"travel_only\"\nstart = { x = 0.0, y = 0.0, theta = 0.0 }\ngoal = { kind = \"all_pins\" }\n";
        match Scenario::from_toml_str(text) {
            Err(SimError::Scenario(m)) => assert!(m.contains("arena"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_run(&pin_events(1), ScoringMode::PinPenalty, 80.0).total_time_s, 85.0);
        assert_eq!(score_run(&pin_events(2), ScoringMode::PinPenalty, 129.0).total_time_s, 139.0);
        assert_eq!(score_run(&[], ScoringMode::PinPenalty, 58.0).total_time_s, 58.0);
        assert_eq!(score_run(&pin_events(7), ScoringMode::TravelOnly, 40.0).total_time_s, 40.0);
    }

    proptest! {
        #[test]
        fn wheel_maps_invert(v in -5.0..5.0f64, w in -5.0..5.0f64, r in 0.01..1.0f64, d in 0.05..2.0f64) {
            let p = WheelParams::new(r, d).unwrap();
            let (wr, wl) = body_to_wheel(v, w, &p);
            let (v2, w2) = wheel_to_body(wr, wl, &p);
            prop_assert!((v - v2).abs() < 1e-12 && (w - w2).abs() < 1e-12);
        }

        #[test]
        fn straight_and_spin_steps(v in -2.0..2.0f64, w in -3.0..3.0f64, th in 0.0..TAU, dt in 0.001..2.0f64) {
            let p = RobotPose::new(0.5, -0.5, th);
            let s = integrate(&p, &cmd(v, 0.0), dt).unwrap();
            prop_assert!((s.distance_to([p.x, p.y]) - v.abs() * dt).abs() < 1e-12);
            prop_assert_eq!(s.theta, p.theta);
            let r = integrate(&p, &cmd(0.0, w), dt).unwrap();
            prop_assert_eq!((r.x, r.y), (p.x, p.y));
        }

        #[test]
        fn standing_pins_never_increase(ws in proptest::collection::vec(-1.0..1.0f64, 1..200)) {
            let mut world = World::from_scenario(&Scenario::builtin(ScenarioKind::Targets));
            let mut standing = world.standing_pins();
            for w in ws {
                world.step(&cmd(0.7, w), 0.1).unwrap();
                prop_assert!(world.standing_pins() <= standing);
                standing = world.standing_pins();
            }
        }
    }
}
