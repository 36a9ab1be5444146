//! Roll and pitch from a wrist held still, then tilted, through the
//! complementary filter.
//!
//! ```bash
//! cargo run --example orientation_filter
//! ```

use wristdrive::imu::{accel_to_roll_pitch, ImuSample, OrientationFilter, STANDARD_GRAVITY};

fn main() {
    let mut filter = OrientationFilter::new(0.98).unwrap();
    let g = STANDARD_GRAVITY;

    // 1 s level, then a 0.5 s roll ramp to 45 degrees at a constant rate.
    let rate = std::f64::consts::FRAC_PI_4 / 0.5;
    let mut roll: f64 = 0.0;
    for i in 0..100u64 {
        let t = i * 20_000;
        let gyro_x = if (50..75).contains(&i) { rate } else { 0.0 };
        roll += gyro_x * 0.02;
        let s = ImuSample::new(t, [0.0, g * roll.sin(), g * roll.cos()], [gyro_x, 0.0, 0.0]);
        let est = filter.update(&s).unwrap();
        if i % 10 == 9 {
            let (ar, _) = accel_to_roll_pitch(&s).unwrap();
            println!(
                "t={:.2}s  accel roll {:6.1} deg  filtered roll {:6.1} deg  pitch {:5.1} deg",
                t as f64 * 1e-6,
                ar.to_degrees(),
                est.roll.to_degrees(),
                est.pitch.to_degrees()
            );
        }
    }

    // A zero accelerometer reading cannot be resolved; the filter holds.
    let before = filter.estimate().unwrap();
    let held = filter.update(&ImuSample::new(2_000_000, [0.0; 3], [0.0; 3])).unwrap();
    assert_eq!((before.roll, before.pitch), (held.roll, held.pitch));
    println!("free-fall sample ignored, estimate held at {:.1} deg", held.roll.to_degrees());
}
