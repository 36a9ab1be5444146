//! Scripted operator for headless runs.
//!
//! The autopilot follows a polyline route with a lookahead point and a
//! proportional heading law, then expresses the wanted `(v, omega)` as wrist
//! angles by inverting the pose-to-velocity gains. Commands therefore still
//! flow through [`crate::command::map_pose_to_velocity`].

use serde::{Deserialize, Serialize};

use crate::command::GainConfig;
use crate::imu::{clamp_angle, OrientationEstimate};
use crate::sim::{wrap_pi, Goal, Scenario, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutopilotConfig {
    pub waypoints: Vec<[f64; 2]>,
    /// Metres ahead of the robot's projection on the route.
    pub lookahead: f64,
    /// Heading-error gain, 1/s.
    pub angular_gain: f64,
    /// Distance at which a waypoint counts as reached.
    pub tolerance: f64,
}

pub const DEFAULT_LOOKAHEAD: f64 = 0.4;
pub const DEFAULT_ANGULAR_GAIN: f64 = 3.0;
pub const DEFAULT_TOLERANCE: f64 = 0.15;

impl AutopilotConfig {
    /// Route from the scenario's hint, else its goal geometry.
    pub fn for_scenario(s: &Scenario) -> AutopilotConfig {
        let hint = s.autopilot.as_ref();
        let waypoints = match (hint, &s.goal) {
            (Some(h), _) if !h.route.is_empty() => h.route.clone(),
            (_, Goal::Waypoints { points, .. }) => points.clone(),
            (_, Goal::AllPins) => s.pins.iter().map(|p| [p.x, p.y]).collect(),
            (_, Goal::Line { from, to }) => vec![[(from[0] + to[0]) / 2.0, (from[1] + to[1]) / 2.0]],
        };
        AutopilotConfig {
            waypoints,
            lookahead: hint.and_then(|h| h.lookahead).unwrap_or(DEFAULT_LOOKAHEAD),
            angular_gain: hint.and_then(|h| h.angular_gain).unwrap_or(DEFAULT_ANGULAR_GAIN),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Autopilot {
    config: AutopilotConfig,
    gains: GainConfig,
    route: Vec<[f64; 2]>,
    segment: usize,
    finished: bool,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl Autopilot {
    /// `start` is prepended to the route so the first segment begins at the
    /// robot.
    pub fn new(config: AutopilotConfig, gains: GainConfig, start: [f64; 2]) -> Result<Self, String> {
        if !(config.lookahead > 0.0) {
            return Err(format!("lookahead must be positive, got {}", config.lookahead));
        }
        if config.waypoints.is_empty() {
            return Err("autopilot needs at least one waypoint".into());
        }
        let mut route = vec![start];
        route.extend_from_slice(&config.waypoints);
        Ok(Self {
            config,
            gains,
            route,
            segment: 0,
            finished: false,
        })
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    /// The `(v, omega)` the pilot wants, before conversion to angles.
    pub fn desired_velocity(&mut self, world: &World) -> (f64, f64) {
        let p = [world.pose.x, world.pose.y];
        let last = self.route.len() - 1;
        let tol = self.config.tolerance;
        while self.segment < last - 1 {
            let (a, b) = (self.route[self.segment], self.route[self.segment + 1]);
            let ab = sub(b, a);
            let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len_sq > 0.0 {
                (sub(p, a)[0] * ab[0] + sub(p, a)[1] * ab[1]) / len_sq
            } else {
                1.0
            };
            if t >= 1.0 || norm(sub(p, b)) <= tol {
                self.segment += 1;
            } else {
                break;
            }
        }
        let goal = self.route[last];
        if self.finished || (self.segment == last - 1 && norm(sub(p, goal)) <= tol) {
            self.finished = true;
            return (0.0, 0.0);
        }

        let target = self.lookahead_point(p);
        let to = sub(target, p);
        let alpha = wrap_pi(to[1].atan2(to[0]) - world.pose.theta);
        let w_max = self.gains.omega_max;
        let omega = (self.config.angular_gain * alpha).clamp(-w_max, w_max);
        let v = if alpha.abs() >= std::f64::consts::FRAC_PI_2 {
            0.0
        } else {
            let remaining = norm(sub(goal, p)) + self.remaining_route_length();
            (self.gains.v_max * alpha.cos() * alpha.cos()).min(remaining.max(0.1))
        };
        (v, omega)
    }

    /// Wrist angles that reproduce the desired velocity through the gains.
    pub fn step(&mut self, world: &World, timestamp_us: u64) -> OrientationEstimate {
        let (v, omega) = self.desired_velocity(world);
        OrientationEstimate {
            roll: clamp_angle(v / self.gains.k_roll),
            pitch: clamp_angle(omega / self.gains.k_pitch),
            timestamp_us,
        }
    }

    fn remaining_route_length(&self) -> f64 {
        self.route[self.segment + 1..]
            .windows(2)
            .map(|w| norm(sub(w[1], w[0])))
            .sum()
    }

    fn lookahead_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (a, b) = (self.route[self.segment], self.route[self.segment + 1]);
        let ab = sub(b, a);
        let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len_sq > 0.0 {
            ((sub(p, a)[0] * ab[0] + sub(p, a)[1] * ab[1]) / len_sq).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let mut from = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let mut remaining = self.config.lookahead;
        let mut seg = self.segment;
        loop {
            let to = self.route[seg + 1];
            let d = norm(sub(to, from));
            if d >= remaining {
                let k = remaining / d;
                return [from[0] + k * (to[0] - from[0]), from[1] + k * (to[1] - from[1])];
            }
            remaining -= d;
            seg += 1;
            if seg + 1 >= self.route.len() {
                return to;
            }
            // Do not look around a reversal; drive into the corner first.
            let (incoming, outgoing) = (sub(to, self.route[seg - 1]), sub(self.route[seg + 1], to));
            if incoming[0] * outgoing[0] + incoming[1] * outgoing[1] < 0.0 {
                return to;
            }
            from = to;
        }
    }
}
