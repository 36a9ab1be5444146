//! Inertial samples, roll/pitch estimation and the sliding signal window.
//!
//! Axis convention: device `z` points out of the watch face, `x` runs along
//! the forearm and `y` is lateral. Roll is the rotation about `x`, pitch the
//! rotation about `y`. At rest with the face up the accelerometer reads
//! `(0, 0, +g)` and both angles are zero.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STANDARD_GRAVITY: f64 = 9.81;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 50.0;
pub const DEFAULT_FILTER_ALPHA: f64 = 0.98;
pub const DEFAULT_WINDOW_CAPACITY: usize = 128;
/// Channels entering gesture matching: accel xyz followed by gyro xyz.
pub const MATCH_CHANNELS: usize = 6;

pub type Vec3 = [f64; 3];

/// One timestamped inertial measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Microseconds since stream start.
    pub timestamp_us: u64,
    /// m/s².
    pub accel: Vec3,
    /// rad/s.
    pub gyro: Vec3,
    /// Normalized units; stored but unused by the estimator.
    pub mag: Option<Vec3>,
}

impl ImuSample {
    pub fn new(timestamp_us: u64, accel: Vec3, gyro: Vec3) -> Self {
        Self {
            timestamp_us,
            accel,
            gyro,
            mag: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.iter().chain(self.gyro.iter()).all(|v| v.is_finite())
    }

    /// The six matching channels, accel first.
    pub fn match_channels(&self) -> [f64; MATCH_CHANNELS] {
        let [ax, ay, az] = self.accel;
        let [gx, gy, gz] = self.gyro;
        [ax, ay, az, gx, gy, gz]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImuError {
    #[error("indeterminate orientation: zero-norm acceleration")]
    IndeterminateOrientation,
    #[error("time step must be positive, got {0}")]
    NonPositiveTimestep(f64),
    #[error("filter weight must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("stale sample: timestamp {timestamp_us} us is not after {newest_us} us")]
    StaleSample { timestamp_us: u64, newest_us: u64 },
    #[error("sample has {got} channels, window expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
}

/// Roll/pitch estimate, both clamped to `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate {
    pub roll: f64,
    pub pitch: f64,
    pub timestamp_us: u64,
}

impl OrientationEstimate {
    pub fn new(roll: f64, pitch: f64, timestamp_us: u64) -> Self {
        Self {
            roll: clamp_angle(roll),
            pitch: clamp_angle(pitch),
            timestamp_us,
        }
    }

    pub fn level(timestamp_us: u64) -> Self {
        Self::new(0.0, 0.0, timestamp_us)
    }
}

/// Clamps (does not wrap) to `[-pi/2, pi/2]`.
pub fn clamp_angle(angle: f64) -> f64 {
    angle.clamp(-FRAC_PI_2, FRAC_PI_2)
}

/// Gravity-vector decomposition of the accelerometer reading.
pub fn accel_to_roll_pitch(sample: &ImuSample) -> Result<(f64, f64), ImuError> {
    let [ax, ay, az] = sample.accel;
    let norm_sq = ax * ax + ay * ay + az * az;
    if !(norm_sq > 0.0) || !norm_sq.is_finite() {
        return Err(ImuError::IndeterminateOrientation);
    }
    let roll = ay.atan2(az);
    let pitch = (-ax).atan2((ay * ay + az * az).sqrt());
    Ok((clamp_angle(roll), clamp_angle(pitch)))
}

/// One complementary-filter step. `alpha = 1` integrates the gyro only,
/// `alpha = 0` reads the accelerometer only.
pub fn update_orientation(
    prev: &OrientationEstimate,
    sample: &ImuSample,
    dt: f64,
    alpha: f64,
) -> Result<OrientationEstimate, ImuError> {
    if !(dt > 0.0) {
        return Err(ImuError::NonPositiveTimestep(dt));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ImuError::InvalidAlpha(alpha));
    }
    let gyro_roll = prev.roll + sample.gyro[0] * dt;
    let gyro_pitch = prev.pitch + sample.gyro[1] * dt;
    let (roll, pitch) = if alpha == 1.0 {
        (gyro_roll, gyro_pitch)
    } else {
        let (acc_roll, acc_pitch) = accel_to_roll_pitch(sample)?;
        (
            alpha * gyro_roll + (1.0 - alpha) * acc_roll,
            alpha * gyro_pitch + (1.0 - alpha) * acc_pitch,
        )
    };
    Ok(OrientationEstimate::new(roll, pitch, sample.timestamp_us))
}

/// Stateful wrapper around [`update_orientation`] that derives `dt` from
/// sample timestamps and holds the previous estimate when the accelerometer
/// reading is unusable.
#[derive(Debug, Clone)]
pub struct OrientationFilter {
    alpha: f64,
    estimate: Option<OrientationEstimate>,
}

impl OrientationFilter {
    pub fn new(alpha: f64) -> Result<Self, ImuError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ImuError::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha,
            estimate: None,
        })
    }

    pub fn estimate(&self) -> Option<OrientationEstimate> {
        self.estimate
    }

    pub fn reset(&mut self) {
        self.estimate = None;
    }

    pub fn update(&mut self, sample: &ImuSample) -> Option<OrientationEstimate> {
        let next = match self.estimate {
            None => accel_to_roll_pitch(sample)
                .ok()
                .map(|(r, p)| OrientationEstimate::new(r, p, sample.timestamp_us)),
            Some(prev) if sample.timestamp_us > prev.timestamp_us => {
                let dt = (sample.timestamp_us - prev.timestamp_us) as f64 * 1e-6;
                update_orientation(&prev, sample, dt, self.alpha).ok()
            }
            Some(_) => None,
        };
        if next.is_some() {
            self.estimate = next;
        }
        self.estimate
    }
}

/// Fixed-capacity multi-channel ring of recent samples.
#[derive(Debug, Clone)]
pub struct SignalWindow {
    capacity: usize,
    sample_rate_hz: f64,
    timestamps: VecDeque<u64>,
    channels: Vec<VecDeque<f64>>,
}

impl SignalWindow {
    pub fn new(channel_count: usize, capacity: usize, sample_rate_hz: f64) -> Self {
        assert!(channel_count > 0, "window needs at least one channel");
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            capacity,
            sample_rate_hz,
            timestamps: VecDeque::with_capacity(capacity),
            channels: (0..channel_count)
                .map(|_| VecDeque::with_capacity(capacity))
                .collect(),
        }
    }

    /// Six-channel window at the default rate and capacity.
    pub fn for_matching() -> Self {
        Self::new(MATCH_CHANNELS, DEFAULT_WINDOW_CAPACITY, DEFAULT_SAMPLE_RATE_HZ)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn newest_timestamp(&self) -> Option<u64> {
        self.timestamps.back().copied()
    }

    pub fn clear(&mut self) {
        self.timestamps.clear();
        self.channels.iter_mut().for_each(VecDeque::clear);
    }

    /// Appends one row of channel values, evicting the oldest row when full.
    /// A non-increasing timestamp leaves the window untouched.
    pub fn push(&mut self, timestamp_us: u64, values: &[f64]) -> Result<(), ImuError> {
        if values.len() != self.channels.len() {
            return Err(ImuError::ChannelMismatch {
                expected: self.channels.len(),
                got: values.len(),
            });
        }
        if let Some(newest_us) = self.newest_timestamp() {
            if timestamp_us <= newest_us {
                return Err(ImuError::StaleSample {
                    timestamp_us,
                    newest_us,
                });
            }
        }
        if self.timestamps.len() == self.capacity {
            self.timestamps.pop_front();
            self.channels.iter_mut().for_each(|c| {
                c.pop_front();
            });
        }
        self.timestamps.push_back(timestamp_us);
        for (ch, &v) in self.channels.iter_mut().zip(values) {
            ch.push_back(v);
        }
        Ok(())
    }

    pub fn push_sample(&mut self, sample: &ImuSample) -> Result<(), ImuError> {
        self.push(sample.timestamp_us, &sample.match_channels())
    }

    /// Copy of the newest `len` rows, channel-major. `None` if fewer are held.
    pub fn tail(&self, len: usize) -> Option<Vec<Vec<f64>>> {
        if len > self.len() {
            return None;
        }
        let skip = self.len() - len;
        Some(
            self.channels
                .iter()
                .map(|c| c.iter().skip(skip).copied().collect())
                .collect(),
        )
    }

    /// Rows oldest-first as `(timestamp, values)`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, Vec<f64>)> + '_ {
        self.timestamps
            .iter()
            .enumerate()
            .map(move |(i, &t)| (t, self.channels.iter().map(|c| c[i]).collect()))
    }
}

// Trace files: one JSON object per line.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t_us: u64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub my: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mz: Option<f64>,
}

impl From<&ImuSample> for TraceRecord {
    fn from(s: &ImuSample) -> Self {
        Self {
            t_us: s.timestamp_us,
            ax: s.accel[0],
            ay: s.accel[1],
            az: s.accel[2],
            gx: s.gyro[0],
            gy: s.gyro[1],
            gz: s.gyro[2],
            mx: s.mag.map(|m| m[0]),
            my: s.mag.map(|m| m[1]),
            mz: s.mag.map(|m| m[2]),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl TraceRecord {
    fn into_sample(self, line: usize) -> Result<ImuSample, TraceError> {
        let mag = match (self.mx, self.my, self.mz) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            (None, None, None) => None,
            _ => {
                return Err(TraceError::Malformed {
                    line,
                    message: "magnetometer fields mx, my, mz must appear together".into(),
                })
            }
        };
        let sample = ImuSample {
            timestamp_us: self.t_us,
            accel: [self.ax, self.ay, self.az],
            gyro: [self.gx, self.gy, self.gz],
            mag,
        };
        if !sample.is_finite() {
            return Err(TraceError::Malformed {
                line,
                message: "accel/gyro values must be finite".into(),
            });
        }
        Ok(sample)
    }
}

/// Parses a trace; blank lines are skipped, timestamps must strictly increase.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<ImuSample>, TraceError> {
    let mut out: Vec<ImuSample> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(text).map_err(|e| TraceError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let sample = record.into_sample(line_no)?;
        if let Some(prev) = out.last() {
            if sample.timestamp_us <= prev.timestamp_us {
                return Err(TraceError::Malformed {
                    line: line_no,
                    message: format!(
                        "timestamp {} does not follow {}",
                        sample.timestamp_us, prev.timestamp_us
                    ),
                });
            }
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn write_trace<W: Write>(mut writer: W, samples: &[ImuSample]) -> std::io::Result<()> {
    for s in samples {
        let line = serde_json::to_string(&TraceRecord::from(s)).map_err(std::io::Error::other)?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Vec<ImuSample>, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}

pub fn save_trace(path: &Path, samples: &[ImuSample]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    write_trace(&mut w, samples)?;
    w.flush()
}
