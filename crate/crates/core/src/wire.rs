//! Framed binary protocol between the operator device, the processing node,
//! the robot and passive viewers.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! 0x57 0x50 | version u8 = 1 | kind u8 | length u32 | payload | crc32 u32
//! ```
//!
//! The CRC-32 (IEEE) covers `kind`, `length` and `payload`.

use std::fmt;

use thiserror::Error;

use crate::command::OperationalMode;
use crate::gesture::GestureClass;

pub const MAGIC: [u8; 2] = [0x57, 0x50];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const TRAILER_LEN: usize = 4;
/// Frames claiming a longer payload are treated as corrupt.
pub const MAX_PAYLOAD: usize = 64 * 1024;

pub const KIND_IMU: u8 = 0x01;
pub const KIND_VELOCITY: u8 = 0x02;
pub const KIND_GESTURE_ACK: u8 = 0x03;
pub const KIND_MODE: u8 = 0x04;
pub const KIND_TELEMETRY: u8 = 0x05;
pub const KIND_HELLO: u8 = 0x06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Operator = 0,
    Robot = 1,
    Viewer = 2,
}

impl Role {
    pub fn from_code(code: u8) -> Option<Role> {
        match code {
            0 => Some(Role::Operator),
            1 => Some(Role::Robot),
            2 => Some(Role::Viewer),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Operator => "operator",
            Role::Robot => "robot",
            Role::Viewer => "viewer",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    ImuSample {
        timestamp_us: u64,
        accel: [f32; 3],
        gyro: [f32; 3],
        /// Sent as three NaNs when absent.
        mag: Option<[f32; 3]>,
    },
    VelocityCmd {
        timestamp_us: u64,
        v: f32,
        omega: f32,
    },
    /// Gesture id 1 to 5.
    GestureAck { gesture: u8 },
    Mode(OperationalMode),
    /// One structured-text telemetry snapshot.
    Telemetry(String),
    Hello(Role),
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::ImuSample { .. } => KIND_IMU,
            Message::VelocityCmd { .. } => KIND_VELOCITY,
            Message::GestureAck { .. } => KIND_GESTURE_ACK,
            Message::Mode(_) => KIND_MODE,
            Message::Telemetry(_) => KIND_TELEMETRY,
            Message::Hello(_) => KIND_HELLO,
        }
    }

    pub fn gesture_ack(class: GestureClass) -> Message {
        Message::GestureAck { gesture: class.id() }
    }

    pub fn from_sample(s: &crate::imu::ImuSample) -> Message {
        let f = |v: [f64; 3]| v.map(|x| x as f32);
        Message::ImuSample {
            timestamp_us: s.timestamp_us,
            accel: f(s.accel),
            gyro: f(s.gyro),
            mag: s.mag.map(f),
        }
    }

    /// Widens an IMU message back into a sample.
    pub fn to_sample(&self) -> Option<crate::imu::ImuSample> {
        let f = |v: [f32; 3]| v.map(f64::from);
        match self {
            Message::ImuSample { timestamp_us, accel, gyro, mag } => Some(crate::imu::ImuSample {
                timestamp_us: *timestamp_us,
                accel: f(*accel),
                gyro: f(*gyro),
                mag: mag.map(f),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("gesture id {0} outside 1..=5")]
    BadGesture(u8),
    #[error("non-finite sensor or command value")]
    NonFinite,
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// Not enough bytes yet; nothing consumed.
    #[error("incomplete frame")]
    Incomplete,
    /// Leading bytes are not a frame start; drop `skipped` and retry.
    #[error("skipped {skipped} bytes of garbage")]
    Resync { skipped: usize },
    #[error("corrupt frame (crc mismatch)")]
    Corrupt { consumed: usize },
    #[error("unsupported frame version {version:#04x}")]
    BadVersion { version: u8, consumed: usize },
    #[error("unsupported message kind {kind:#04x}")]
    UnsupportedKind { kind: u8, consumed: usize },
    #[error("malformed payload for kind {kind:#04x}: {reason}")]
    Malformed { kind: u8, reason: &'static str, consumed: usize },
}

impl DecodeError {
    /// Bytes the caller should drop before decoding again.
    pub fn consumed(&self) -> usize {
        match *self {
            DecodeError::Incomplete => 0,
            DecodeError::Resync { skipped } => skipped,
            DecodeError::Corrupt { consumed }
            | DecodeError::BadVersion { consumed, .. }
            | DecodeError::UnsupportedKind { consumed, .. }
            | DecodeError::Malformed { consumed, .. } => consumed,
        }
    }
}

fn finite3(v: &[f32; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn encode_payload(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let mut p = Vec::new();
    match msg {
        Message::ImuSample { timestamp_us, accel, gyro, mag } => {
            if !finite3(accel) || !finite3(gyro) || mag.is_some_and(|m| !finite3(&m)) {
                return Err(EncodeError::NonFinite);
            }
            p.extend_from_slice(&timestamp_us.to_le_bytes());
            let mag = mag.unwrap_or([f32::NAN; 3]);
            for v in accel.iter().chain(gyro).chain(&mag) {
                p.extend_from_slice(&v.to_le_bytes());
            }
        }
        Message::VelocityCmd { timestamp_us, v, omega } => {
            if !v.is_finite() || !omega.is_finite() {
                return Err(EncodeError::NonFinite);
            }
            p.extend_from_slice(&timestamp_us.to_le_bytes());
            p.extend_from_slice(&v.to_le_bytes());
            p.extend_from_slice(&omega.to_le_bytes());
        }
        Message::GestureAck { gesture } => {
            if GestureClass::from_id(*gesture).is_none() {
                return Err(EncodeError::BadGesture(*gesture));
            }
            p.push(*gesture);
        }
        Message::Mode(mode) => p.push(mode.wire_code()),
        Message::Telemetry(text) => p.extend_from_slice(text.as_bytes()),
        Message::Hello(role) => p.push(*role as u8),
    }
    if p.len() > MAX_PAYLOAD {
        return Err(EncodeError::TooLarge(p.len()));
    }
    Ok(p)
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let payload = encode_payload(msg)?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + TRAILER_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.kind());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out[3..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn f32_at(p: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(p[off..off + 4].try_into().expect("4 bytes"))
}

fn u64_at(p: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(p[off..off + 8].try_into().expect("8 bytes"))
}

fn decode_payload(kind: u8, p: &[u8], consumed: usize) -> Result<Message, DecodeError> {
    let malformed = |reason| DecodeError::Malformed { kind, reason, consumed };
    let fixed = |n: usize| if p.len() == n { Ok(()) } else { Err(malformed("wrong payload length")) };
    match kind {
        KIND_IMU => {
            fixed(8 + 9 * 4)?;
            let v3 = |i: usize| [f32_at(p, 8 + 12 * i), f32_at(p, 12 + 12 * i), f32_at(p, 16 + 12 * i)];
            let (accel, gyro, mag) = (v3(0), v3(1), v3(2));
            let mag = if mag.iter().all(|m| m.is_nan()) { None } else { Some(mag) };
            Ok(Message::ImuSample { timestamp_us: u64_at(p, 0), accel, gyro, mag })
        }
        KIND_VELOCITY => {
            fixed(16)?;
            Ok(Message::VelocityCmd {
                timestamp_us: u64_at(p, 0),
                v: f32_at(p, 8),
                omega: f32_at(p, 12),
            })
        }
        KIND_GESTURE_ACK => {
            fixed(1)?;
            GestureClass::from_id(p[0]).ok_or(malformed("gesture id outside 1..=5"))?;
            Ok(Message::GestureAck { gesture: p[0] })
        }
        KIND_MODE => {
            fixed(1)?;
            OperationalMode::from_wire_code(p[0])
                .map(Message::Mode)
                .ok_or(malformed("mode byte must be 0 or 1"))
        }
        KIND_TELEMETRY => String::from_utf8(p.to_vec())
            .map(Message::Telemetry)
            .map_err(|_| malformed("telemetry is not utf-8")),
        KIND_HELLO => {
            fixed(1)?;
            Role::from_code(p[0])
                .map(Message::Hello)
                .ok_or(malformed("unknown role"))
        }
        _ => Err(DecodeError::UnsupportedKind { kind, consumed }),
    }
}

/// Decodes the first frame in `buf`.
///
/// On success returns the message and the number of bytes it occupied. A
/// buffer that does not start with the magic pair yields
/// [`DecodeError::Resync`] naming how much to skip; a truncated frame yields
/// [`DecodeError::Incomplete`] with nothing consumed. Rejected frames
/// consume only their magic pair so that a frame hidden behind a damaged
/// header is still found.
pub fn decode(buf: &[u8]) -> Result<(Message, usize), DecodeError> {
    match find_magic(buf) {
        Some(0) => {}
        Some(at) => return Err(DecodeError::Resync { skipped: at }),
        None => {
            // keep a trailing 0x57: it may be the first half of a magic pair
            let keep = usize::from(buf.last() == Some(&MAGIC[0]));
            return if buf.len() > keep {
                Err(DecodeError::Resync { skipped: buf.len() - keep })
            } else {
                Err(DecodeError::Incomplete)
            };
        }
    }
    if buf.len() < HEADER_LEN {
        return Err(DecodeError::Incomplete);
    }
    let reject = MAGIC.len();
    if buf[2] != VERSION {
        return Err(DecodeError::BadVersion { version: buf[2], consumed: reject });
    }
    let kind = buf[3];
    let len = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes")) as usize;
    if len > MAX_PAYLOAD {
        return Err(DecodeError::Corrupt { consumed: reject });
    }
    let total = HEADER_LEN + len + TRAILER_LEN;
    if buf.len() < total {
        return Err(DecodeError::Incomplete);
    }
    let body_end = HEADER_LEN + len;
    let crc = u32::from_le_bytes(buf[body_end..total].try_into().expect("4 bytes"));
    if crc32fast::hash(&buf[3..body_end]) != crc {
        return Err(DecodeError::Corrupt { consumed: reject });
    }
    let msg = decode_payload(kind, &buf[HEADER_LEN..body_end], total)?;
    Ok((msg, total))
}

fn find_magic(buf: &[u8]) -> Option<usize> {
    buf.windows(2).position(|w| w == MAGIC)
}

/// Incremental decoder for a byte stream.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
    rejected: usize,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Frames rejected so far (corrupt, unsupported or malformed).
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Next complete message, skipping garbage and bad frames. Errors other
    /// than resync are returned once each so callers may count or act on
    /// them; `Ok(None)` means more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<Message>, DecodeError> {
        loop {
            match decode(&self.buf) {
                Ok((msg, n)) => {
                    self.buf.drain(..n);
                    return Ok(Some(msg));
                }
                Err(DecodeError::Incomplete) => return Ok(None),
                Err(DecodeError::Resync { skipped }) => {
                    self.buf.drain(..skipped);
                }
                Err(e) => {
                    self.buf.drain(..e.consumed());
                    self.rejected += 1;
                    return Err(e);
                }
            }
        }
    }

    /// Drains a finished stream: when stuck on an incomplete frame the
    /// leading byte is dropped and scanning resumes.
    pub fn finish(mut self) -> Vec<Message> {
        let mut out = Vec::new();
        while !self.buf.is_empty() {
            match self.next_message() {
                Ok(Some(m)) => out.push(m),
                Ok(None) => {
                    let n = self.buf.len().min(1);
                    self.buf.drain(..n);
                }
                Err(_) => {}
            }
        }
        out
    }
}

/// Decodes every recoverable message from a complete byte buffer.
pub fn decode_all(bytes: &[u8]) -> Vec<Message> {
    let mut r = FrameReader::new();
    r.extend(bytes);
    r.finish()
}

/// Where a message goes next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Into gesture recognition and control.
    Pipeline,
    /// To connected robots and the simulator.
    Robots,
    /// To the operator only.
    Operator,
    /// To the operator and every viewer.
    Observers,
    /// Session handshake, handled by the session itself.
    Handshake,
}

/// Originator of a message inside the service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// A connected peer that has completed its handshake.
    Session(Role),
    /// A connected peer before its handshake.
    Unidentified,
    Pipeline,
    Simulator,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("protocol violation: {endpoint:?} may not send message kind {kind:#04x}")]
pub struct ProtocolViolation {
    pub endpoint: Endpoint,
    pub kind: u8,
}

/// Routing table for the three-party pipeline.
pub fn route(from: Endpoint, msg: &Message) -> Result<Route, ProtocolViolation> {
    use Endpoint::*;
    let ok = match (from, msg) {
        (Unidentified, Message::Hello(_)) => Some(Route::Handshake),
        (Session(Role::Operator), Message::ImuSample { .. }) => Some(Route::Pipeline),
        (Session(Role::Robot), Message::Telemetry(_)) => Some(Route::Observers),
        (Pipeline, Message::VelocityCmd { .. }) => Some(Route::Robots),
        (Pipeline, Message::GestureAck { .. }) => Some(Route::Operator),
        (Pipeline, Message::Mode(_)) => Some(Route::Observers),
        (Simulator, Message::Telemetry(_)) => Some(Route::Observers),
        _ => None,
    };
    ok.ok_or(ProtocolViolation { endpoint: from, kind: msg.kind() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_frame_layout() {
        let bytes = encode(&Message::VelocityCmd { timestamp_us: 0, v: 0.0, omega: 0.0 }).unwrap();
        assert_eq!(&bytes[..8], &[0x57, 0x50, 0x01, 0x02, 0x10, 0x00, 0x00, 0x00]);
        assert!(bytes[8..24].iter().all(|&b| b == 0));
        assert_eq!(bytes.len(), 28);
    }

    #[test]
    fn finish_on_pure_garbage_is_empty() {
        assert!(decode_all(&[0x01, 0x02, 0x03]).is_empty());
        assert!(decode_all(&[0x57, 0x50, 0x01]).is_empty());
        assert!(decode_all(&[]).is_empty());
    }

    #[test]
    fn bad_gesture_rejected() {
        assert_eq!(encode(&Message::GestureAck { gesture: 9 }), Err(EncodeError::BadGesture(9)));
        assert_eq!(encode(&Message::GestureAck { gesture: 0 }), Err(EncodeError::BadGesture(0)));
    }

    #[test]
    fn absent_magnetometer_round_trips() {
        let m = Message::ImuSample {
            timestamp_us: 42,
            accel: [0.0, 0.1, 9.8],
            gyro: [0.0; 3],
            mag: None,
        };
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 44 + TRAILER_LEN);
        assert_eq!(decode(&bytes).unwrap(), (m, bytes.len()));
    }

    #[test]
    fn decode_error_paths() {
        let frame = encode(&Message::Mode(OperationalMode::Teleoperated)).unwrap();
        assert_eq!(decode(&frame[..frame.len() - 1]), Err(DecodeError::Incomplete));
        assert_eq!(decode(&frame[..3]), Err(DecodeError::Incomplete));

        let mut flipped = frame.clone();
        flipped[HEADER_LEN] ^= 0x01;
        assert_eq!(decode(&flipped), Err(DecodeError::Corrupt { consumed: 2 }));

        let mut garbage = vec![1, 2, 3];
        garbage.extend_from_slice(&frame);
        assert_eq!(decode(&garbage), Err(DecodeError::Resync { skipped: 3 }));
        assert_eq!(decode(&garbage[3..]).unwrap().1, frame.len());

        // unknown kind with a valid crc
        let mut unknown = vec![0x57, 0x50, 0x01, 0x7f, 0, 0, 0, 0];
        let crc = crc32fast::hash(&unknown[3..]);
        unknown.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(
            decode(&unknown),
            Err(DecodeError::UnsupportedKind { kind: 0x7f, consumed: 12 })
        );
    }

    #[test]
    fn reader_handles_split_delivery() {
        let msgs = vec![
            Message::Hello(Role::Viewer),
            Message::Telemetry("{\"t\":0.0}".into()),
            Message::gesture_ack(GestureClass::Circle),
        ];
        let bytes: Vec<u8> = msgs.iter().flat_map(|m| encode(m).unwrap()).collect();
        let mut r = FrameReader::new();
        let mut got = Vec::new();
        for chunk in bytes.chunks(5) {
            r.extend(chunk);
            while let Some(m) = r.next_message().unwrap() {
                got.push(m);
            }
        }
        assert_eq!(got, msgs);
    }

    #[test]
    fn routing_table() {
        let imu = Message::from_sample(&crate::imu::ImuSample::new(1, [0.0, 0.0, 9.8], [0.0; 3]));
        assert_eq!(route(Endpoint::Session(Role::Operator), &imu), Ok(Route::Pipeline));
        let cmd = Message::VelocityCmd { timestamp_us: 0, v: 1.0, omega: 0.0 };
        assert!(route(Endpoint::Session(Role::Operator), &cmd).is_err());
        assert_eq!(route(Endpoint::Pipeline, &cmd), Ok(Route::Robots));
        assert_eq!(
            route(Endpoint::Pipeline, &Message::gesture_ack(GestureClass::Up)),
            Ok(Route::Operator)
        );
        assert_eq!(
            route(Endpoint::Simulator, &Message::Telemetry(String::new())),
            Ok(Route::Observers)
        );
        assert_eq!(
            route(Endpoint::Session(Role::Robot), &Message::Telemetry(String::new())),
            Ok(Route::Observers)
        );
        assert!(route(Endpoint::Session(Role::Viewer), &imu).is_err());
        assert!(route(Endpoint::Unidentified, &imu).is_err());
        assert!(route(Endpoint::Session(Role::Operator), &Message::Hello(Role::Operator)).is_err());
    }
}
