//! Pin-penalty scoring on a few hand-entered runs.
//!
//! ```bash
//! cargo run --example table_scoring
//! ```

use wristdrive::sim::{score_run, ScoringMode, SimEvent, SimEventKind};

fn main() {
    let runs = [(58.0, 0), (107.0, 1), (129.0, 2), (80.0, 1)];
    for (travel, pins) in runs {
        let events: Vec<SimEvent> = (0..pins)
            .map(|pin| SimEvent { kind: SimEventKind::PinContact { pin }, time: 1.0 + pin as f64 })
            .collect();
        let s = score_run(&events, ScoringMode::PinPenalty, travel);
        println!("travel {:>5.0} s, {} pins -> total {:>5.0} s", s.travel_time_s, s.pins_touched, s.total_time_s);
    }
    let s = score_run(&[], ScoringMode::TravelOnly, 37.0);
    println!("travel-only course: {} s", s.total_time_s);
}
