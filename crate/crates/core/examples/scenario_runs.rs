//! Headless autopilot runs of the three built-in courses.
//!
//! ```bash
//! cargo run --release --example scenario_runs
//! ```

use wristdrive::harness::{run_scenario, RunOptions};
use wristdrive::sim::{Scenario, ScenarioKind};

fn main() {
    for kind in ScenarioKind::ALL {
        let scenario = Scenario::builtin(kind);
        let out = run_scenario(&scenario, &RunOptions::default()).unwrap();
        let r = &out.report;
        println!(
            "{:<9} goal {:<5} travel {:6.2} s  pins {}  total {:6.2} s  commands {}",
            r.scenario, r.goal_reached, r.travel_time_s, r.pin_contacts, r.total_time_s, r.command_count
        );
        let p = out.world.pose;
        println!("          final pose ({:.2}, {:.2}, {:.2} rad), {} log records", p.x, p.y, p.theta, out.log.len());
    }
}
