//! Encoding, decoding and stream resynchronization.
//!
//! ```bash
//! cargo run --example wire_codec
//! ```

use wristdrive::command::OperationalMode;
use wristdrive::wire::{decode, encode, route, Endpoint, FrameReader, Message, Role};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let stop = encode(&Message::VelocityCmd { timestamp_us: 0, v: 0.0, omega: 0.0 }).unwrap();
    println!("stop command: {}", hex(&stop));

    let messages = [
        Message::Hello(Role::Operator),
        Message::ImuSample { timestamp_us: 20_000, accel: [0.1, 0.2, 9.8], gyro: [0.0; 3], mag: None },
        Message::Mode(OperationalMode::Teleoperated),
    ];
    let mut stream = vec![0xff, 0x57, 0x00];
    for m in &messages {
        stream.extend(encode(m).unwrap());
        stream.extend([0x13, 0x37]);
    }
    let mut corrupt = encode(&Message::GestureAck { gesture: 3 }).unwrap();
    corrupt[8] ^= 0x01;
    stream.extend(&corrupt);

    let mut reader = FrameReader::new();
    for chunk in stream.chunks(7) {
        reader.extend(chunk);
        loop {
            match reader.next_message() {
                Ok(Some(m)) => println!("decoded {m:?}"),
                Ok(None) => break,
                Err(e) => println!("rejected: {e}"),
            }
        }
    }

    println!("single-frame decode: {:?}", decode(&stop[..10]).unwrap_err());
    for m in &messages[1..] {
        println!("operator may send {:?}: {:?}", m.kind(), route(Endpoint::Session(Role::Operator), m));
    }
}
