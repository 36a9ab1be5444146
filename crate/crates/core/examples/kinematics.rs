//! Wheel speeds, body velocity and exact pose integration.
//!
//! ```bash
//! cargo run --example kinematics
//! ```

use wristdrive::command::VelocityCommand;
use wristdrive::sim::{body_to_wheel, integrate, wheel_to_body, RobotPose, WheelParams};

fn main() {
    let wheels = WheelParams::default();
    let (v, omega) = (0.5, 0.8);
    let (right, left) = body_to_wheel(v, omega, &wheels);
    println!("v={v} m/s, omega={omega} rad/s -> right {right:.4} rad/s, left {left:.4} rad/s");
    let (v2, w2) = wheel_to_body(right, left, &wheels);
    println!("and back: v={v2:.12}, omega={w2:.12}");

    // A full circle of radius v/omega returns to the start, in one step or many.
    let cmd = VelocityCommand { v, omega, timestamp_us: 0 };
    let period = std::f64::consts::TAU / omega;
    for n in [1usize, 4, 1000] {
        let mut p = RobotPose::new(1.0, 2.0, 0.3);
        for _ in 0..n {
            p = integrate(&p, &cmd, period / n as f64).unwrap();
        }
        println!("{n:>5} steps: x={:.12} y={:.12} theta={:.12}", p.x, p.y, p.theta);
    }
}
