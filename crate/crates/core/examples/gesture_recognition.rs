//! Streams a noisy session through the recognizer and prints each detection.
//!
//! ```bash
//! cargo run --example gesture_recognition
//! ```

use wristdrive::gesture::{
    reference_templates, synthesize_gesture, synthesize_rest, GestureClass, Recognizer, CALIBRATED_NOISE_SIGMA,
    DEFAULT_REFRACTORY_S, DEFAULT_THRESHOLD,
};
use wristdrive::imu::SignalWindow;

fn main() {
    let sigma = CALIBRATED_NOISE_SIGMA;
    let script = [GestureClass::Circle, GestureClass::Up, GestureClass::Right, GestureClass::Down, GestureClass::Circle];

    let mut recognizer = Recognizer::new(reference_templates(), DEFAULT_THRESHOLD, DEFAULT_REFRACTORY_S);
    let mut window = SignalWindow::for_matching();
    let mut t = 0u64;
    let mut epochs = Vec::new();
    for (i, class) in script.iter().enumerate() {
        epochs.push(synthesize_rest(75, 100 + i as u64, sigma));
        epochs.push(synthesize_gesture(*class, i as u64, sigma));
    }
    epochs.push(synthesize_rest(75, 99, sigma));

    for epoch in &epochs {
        for s in epoch.to_samples(t) {
            window.push_sample(&s).unwrap();
            let d = recognizer.observe(&window);
            if let Some(class) = d.class {
                println!("{:6.2} s  {:<6} score {:.3}", d.timestamp_us as f64 * 1e-6, class.name(), d.score);
            }
        }
        t += epoch.len() as u64 * 20_000;
    }
    println!("performed: {}", script.map(|c| c.name()).join(", "));
}
