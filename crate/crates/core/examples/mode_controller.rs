//! The mode state machine and the wrist-to-velocity mapping.
//!
//! ```bash
//! cargo run --example mode_controller
//! ```

use std::f64::consts::FRAC_PI_2;

use wristdrive::command::{make_gains, map_pose_to_velocity, ControllerState, ModeTable};
use wristdrive::gesture::{GestureClass, MatchDecision};
use wristdrive::imu::OrientationEstimate;

fn main() {
    let gains = make_gains(0.7, 1.0).unwrap();
    println!("K_roll = {:.4} m/s/rad, K_pitch = {:.4} 1/s/rad", gains.k_roll, gains.k_pitch);

    let table = ModeTable::default();
    let mut state = ControllerState::new(gains);
    let pose = OrientationEstimate::new(FRAC_PI_2 / 2.0, -FRAC_PI_2 / 4.0, 0);
    let inputs = [None, Some(GestureClass::Up), Some(GestureClass::Circle), None, Some(GestureClass::Left), Some(GestureClass::Circle)];

    for (i, g) in inputs.into_iter().enumerate() {
        let t = i as u64 * 1_500_000;
        let d = match g {
            Some(c) => MatchDecision::recognized(c, 0.9, t),
            None => MatchDecision::none(t),
        };
        let (next, events) = table.step(&state, &d);
        state = next;
        let cmd = map_pose_to_velocity(&pose, &state.gains, state.mode);
        let gesture = g.map_or("-", |c| c.name());
        println!(
            "{gesture:<7} -> {:<13} v {:+.3}  omega {:+.3}  events {}",
            state.mode.to_string(),
            cmd.v,
            cmd.omega,
            serde_json::to_string(&events).unwrap()
        );
    }

    // A table with an extra transition, e.g. Up also engages teleoperation.
    let custom = ModeTable::default().with_transition(
        wristdrive::command::OperationalMode::Autonomous,
        GestureClass::Up,
        wristdrive::command::OperationalMode::Teleoperated,
    );
    let (s, _) = custom.step(&ControllerState::new(gains), &MatchDecision::recognized(GestureClass::Up, 0.9, 0));
    println!("custom table: Up from autonomous -> {}", s.mode);
}
