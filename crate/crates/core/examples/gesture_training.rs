//! Builds a template from misaligned repetitions and stores it.
//!
//! Repetitions are generated with random onset shifts and noise, aligned by
//! cross-correlation and averaged.
//!
//! ```bash
//! cargo run --example gesture_training
//! ```

use wristdrive::gesture::{
    build_template, correlation_coefficient, ncc_best_lag, reference_templates, synthesize_gesture,
    synthesize_shifted_gesture, templates_from_json, templates_to_json, GestureClass, TRAINING_REPETITIONS,
};

fn main() {
    let class = GestureClass::Left;
    let epochs: Vec<_> = (0..TRAINING_REPETITIONS)
        .map(|i| {
            let shift = (i as isize % 11) - 5;
            synthesize_shifted_gesture(class, shift, i as u64, 0.3)
        })
        .collect();

    let canonical = synthesize_gesture(class, 0, 0.0);
    let (lag, score) = ncc_best_lag(canonical.channels(), epochs[3].channels(), 12).unwrap();
    println!("repetition 3 sits at lag {lag:+} (ncc {score:.3})");

    let template = build_template(class, &epochs).unwrap();
    println!(
        "{} template: {} repetitions, {} samples after cropping to the common overlap",
        template.class,
        template.training_count,
        template.signal.len()
    );
    let canonical_crop = canonical.slice(0, template.signal.len());
    let fit = correlation_coefficient(canonical_crop.channels(), template.signal.channels()).unwrap();
    println!("correlation with the noiseless gesture: {fit:.3}");

    let mut store = reference_templates();
    store.retain(|t| t.class != class);
    store.push(template);
    let json = templates_to_json(&store).unwrap();
    let back = templates_from_json(&json).unwrap();
    assert_eq!(back, store);
    println!("store of {} templates round-trips through {} bytes of JSON", back.len(), json.len());
}
