//! Starts the service in-process, connects a viewer and an operator over
//! TCP, engages teleoperation with a Circle and rolls the wrist forward.
//!
//! ```bash
//! cargo run --example live_operator
//! ```

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use wristdrive::gesture::{reference_templates, synthesize_gesture, synthesize_rest, GestureClass};
use wristdrive::imu::ImuSample;
use wristdrive::service::{start, ServiceConfig};
use wristdrive::sim::{Scenario, ScenarioKind, TelemetrySnapshot};
use wristdrive::wire::{encode, FrameReader, Message, Role};

fn connect(addr: std::net::SocketAddr, role: Role) -> TcpStream {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
    s.write_all(&encode(&Message::Hello(role)).unwrap()).unwrap();
    s
}

fn drain(s: &mut TcpStream, reader: &mut FrameReader) -> Vec<Message> {
    let mut buf = [0u8; 8192];
    if let Ok(n) = s.read(&mut buf) {
        reader.extend(&buf[..n]);
    }
    std::iter::from_fn(|| reader.next_message().ok().flatten()).collect()
}

fn main() {
    let mut cfg = ServiceConfig::new(Scenario::builtin(ScenarioKind::Building), reference_templates());
    cfg.port = 0;
    let svc = start(cfg).unwrap();
    println!("service on {} (bridge {})", svc.local_addr(), svc.bridge_addr());

    let mut viewer = connect(svc.local_addr(), Role::Viewer);
    let mut op = connect(svc.local_addr(), Role::Operator);
    std::thread::sleep(Duration::from_millis(50));

    let mut t = 0u64;
    for e in [
        synthesize_rest(50, 1, 0.05),
        synthesize_gesture(GestureClass::Circle, 2, 0.05),
        synthesize_rest(60, 3, 0.05),
    ] {
        for s in e.to_samples(t) {
            op.write_all(&encode(&Message::from_sample(&s)).unwrap()).unwrap();
        }
        t += e.len() as u64 * 20_000;
    }
    let roll = 0.8f64;
    let start = Instant::now();
    let (mut op_rx, mut view_rx) = (FrameReader::new(), FrameReader::new());
    let mut last = None;
    while start.elapsed() < Duration::from_secs(2) {
        let s = ImuSample::new(t, [0.0, 9.81 * roll.sin(), 9.81 * roll.cos()], [0.0; 3]);
        op.write_all(&encode(&Message::from_sample(&s)).unwrap()).unwrap();
        t += 20_000;
        for m in drain(&mut op, &mut op_rx) {
            println!("operator got {m:?}");
        }
        for m in drain(&mut viewer, &mut view_rx) {
            if let Message::Telemetry(text) = m {
                last = serde_json::from_str::<TelemetrySnapshot>(&text).ok();
            }
        }
    }
    if let Some(snap) = last {
        println!(
            "after 2 s: mode {}, pose ({:.2}, {:.2}), v {:.2} m/s",
            snap.mode, snap.x, snap.y, snap.v
        );
    }
    svc.shutdown();
    svc.join();
}
