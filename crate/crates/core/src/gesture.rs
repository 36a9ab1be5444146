//! Gesture templates and template matching.
//!
//! Templates are built offline by aligning repeated training epochs with
//! normalized cross-correlation and averaging them sample by sample. At run
//! time the newest slice of the signal window is scored against every
//! template with the correlation coefficient; multi-channel signals use the
//! unweighted mean of per-channel Pearson coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imu::{ImuSample, SignalWindow, DEFAULT_SAMPLE_RATE_HZ, MATCH_CHANNELS, STANDARD_GRAVITY};

pub const DEFAULT_THRESHOLD: f64 = 0.75;
pub const DEFAULT_REFRACTORY_S: f64 = 1.0;
pub const DEFAULT_EPOCH_DURATION_S: f64 = 1.2;
/// Repetitions per gesture used to build the reference templates.
pub const TRAINING_REPETITIONS: usize = 60;
/// Noise level at which the synthetic corpus is evaluated.
pub const CALIBRATED_NOISE_SIGMA: f64 = 0.3;
pub const TEMPLATE_FORMAT: &str = "wristdrive-templates/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureClass {
    Up = 1,
    Down = 2,
    Circle = 3,
    Left = 4,
    Right = 5,
}

impl GestureClass {
    pub const ALL: [GestureClass; 5] = [
        GestureClass::Up,
        GestureClass::Down,
        GestureClass::Circle,
        GestureClass::Left,
        GestureClass::Right,
    ];

    /// Stable wire id, 1 to 5.
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Up => "up",
            GestureClass::Down => "down",
            GestureClass::Circle => "circle",
            GestureClass::Left => "left",
            GestureClass::Right => "right",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = GestureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GestureError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum GestureError {
    #[error("degenerate signal: channel {channel} has zero variance")]
    Degenerate { channel: usize },
    #[error("epoch {index} is degenerate")]
    DegenerateEpoch { index: usize },
    #[error("signals differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("signal needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("max lag {max_lag} must be below the shortest length {min_len}")]
    LagTooLarge { max_lag: usize, min_len: usize },
    #[error("no epochs supplied")]
    NoEpochs,
    #[error("epoch {index} has {got} channels, expected {expected}")]
    ChannelCount { index: usize, expected: usize, got: usize },
    #[error("unknown gesture class {0:?}")]
    UnknownClass(String),
    #[error("template store: {0}")]
    Store(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fixed-order multi-channel signal slice (accel xyz + gyro xyz by default).
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    channels: Vec<Vec<f64>>,
    sample_rate_hz: f64,
}

impl Epoch {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self, GestureError> {
        let len = channels.first().map(Vec::len).unwrap_or(0);
        if channels.iter().any(|c| c.len() != len) {
            return Err(GestureError::ShapeMismatch(
                "channels have unequal lengths".into(),
            ));
        }
        if len < 2 {
            return Err(GestureError::TooShort(len));
        }
        Ok(Self {
            channels,
            sample_rate_hz,
        })
    }

    /// Builds a six-channel epoch from consecutive samples.
    pub fn from_samples(samples: &[ImuSample], sample_rate_hz: f64) -> Result<Self, GestureError> {
        let mut channels = vec![Vec::with_capacity(samples.len()); MATCH_CHANNELS];
        for s in samples {
            for (c, v) in channels.iter_mut().zip(s.match_channels()) {
                c.push(v);
            }
        }
        Self::new(channels, sample_rate_hz)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sub-range of samples, all channels.
    pub fn slice(&self, start: usize, end: usize) -> Epoch {
        Epoch {
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Expands a six-channel epoch back into samples spaced at the epoch rate.
    pub fn to_samples(&self, start_us: u64) -> Vec<ImuSample> {
        assert_eq!(self.channel_count(), MATCH_CHANNELS);
        let step = sample_period_us(self.sample_rate_hz);
        (0..self.len())
            .map(|i| {
                let c = |k: usize| self.channels[k][i];
                ImuSample::new(
                    start_us + i as u64 * step,
                    [c(0), c(1), c(2)],
                    [c(3), c(4), c(5)],
                )
            })
            .collect()
    }
}

pub fn sample_period_us(rate_hz: f64) -> u64 {
    (1e6 / rate_hz).round() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureTemplate {
    pub class: GestureClass,
    pub signal: Epoch,
    pub training_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub class: Option<GestureClass>,
    pub score: f64,
    pub timestamp_us: u64,
}

impl MatchDecision {
    pub fn none(timestamp_us: u64) -> Self {
        Self {
            class: None,
            score: 0.0,
            timestamp_us,
        }
    }

    pub fn recognized(class: GestureClass, score: f64, timestamp_us: u64) -> Self {
        Self {
            class: Some(class),
            score,
            timestamp_us,
        }
    }
}

/// Pearson correlation of two equal-length series; `None` when either has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let constant = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean of per-channel Pearson coefficients.
pub fn correlation_coefficient<A, B>(a: &[A], b: &[B]) -> Result<f64, GestureError>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if a.is_empty() || a.len() != b.len() {
        return Err(GestureError::ShapeMismatch(format!(
            "{} vs {} channels",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0.0;
    for (channel, (x, y)) in a.iter().zip(b).enumerate() {
        let (x, y) = (x.as_ref(), y.as_ref());
        if x.len() != y.len() {
            return Err(GestureError::ShapeMismatch(format!(
                "channel {channel}: {} vs {} samples",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(GestureError::TooShort(x.len()));
        }
        total += pearson(x, y).ok_or(GestureError::Degenerate { channel })?;
    }
    Ok(total / a.len() as f64)
}

fn is_constant(channels: &[Vec<f64>]) -> bool {
    channels
        .iter()
        .all(|c| c.iter().all(|&v| v == c[0]))
}

/// Score at one lag: the reference at index `n` is paired with the candidate
/// at `n + lag`.
fn ncc_at_lag(reference: &[Vec<f64>], candidate: &[Vec<f64>], lag: isize) -> Option<f64> {
    let ref_len = reference[0].len() as isize;
    let cand_len = candidate[0].len() as isize;
    let start = 0.max(-lag);
    let end = ref_len.min(cand_len - lag);
    if end - start < 2 {
        return None;
    }
    let mut total = 0.0;
    for (r, c) in reference.iter().zip(candidate) {
        let rs = &r[start as usize..end as usize];
        let cs = &c[(start + lag) as usize..(end + lag) as usize];
        total += pearson(rs, cs)?;
    }
    Some(total / reference.len() as f64)
}

/// Lag in `[-max_lag, max_lag]` maximizing normalized cross-correlation over
/// the overlapping parts. A positive lag means the candidate is delayed.
/// Ties go to the smallest |lag|, then to the negative lag.
pub fn ncc_best_lag<A, B>(
    reference: &[A],
    candidate: &[B],
    max_lag: usize,
) -> Result<(isize, f64), GestureError>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    let reference: Vec<Vec<f64>> = reference.iter().map(|c| c.as_ref().to_vec()).collect();
    let candidate: Vec<Vec<f64>> = candidate.iter().map(|c| c.as_ref().to_vec()).collect();
    if reference.is_empty() || reference.len() != candidate.len() {
        return Err(GestureError::ShapeMismatch("channel counts differ".into()));
    }
    let min_len = reference[0].len().min(candidate[0].len());
    if min_len < 2 {
        return Err(GestureError::TooShort(min_len));
    }
    if max_lag >= min_len {
        return Err(GestureError::LagTooLarge { max_lag, min_len });
    }
    if is_constant(&reference) {
        return Err(GestureError::DegenerateEpoch { index: 0 });
    }
    if is_constant(&candidate) {
        return Err(GestureError::DegenerateEpoch { index: 1 });
    }
    let mut best: Option<(isize, f64)> = None;
    let order = std::iter::once(0isize)
        .chain((1..=max_lag as isize).flat_map(|k| [-k, k]));
    for lag in order {
        if let Some(score) = ncc_at_lag(&reference, &candidate, lag) {
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((lag, score));
            }
        }
    }
    best.ok_or(GestureError::DegenerateEpoch { index: 1 })
}

/// Aligns every epoch to the first one and crops all of them to the common
/// overlap.
pub fn align_epochs(epochs: &[Epoch], max_lag: usize) -> Result<Vec<Epoch>, GestureError> {
    let anchor = epochs.first().ok_or(GestureError::NoEpochs)?;
    let channel_count = anchor.channel_count();
    for (index, e) in epochs.iter().enumerate() {
        if e.channel_count() != channel_count {
            return Err(GestureError::ChannelCount {
                index,
                expected: channel_count,
                got: e.channel_count(),
            });
        }
        if is_constant(e.channels()) {
            return Err(GestureError::DegenerateEpoch { index });
        }
    }
    let mut lags = vec![0isize];
    for (index, e) in epochs.iter().enumerate().skip(1) {
        let (lag, _) = ncc_best_lag(anchor.channels(), e.channels(), max_lag).map_err(|err| {
            match err {
                GestureError::DegenerateEpoch { .. } => GestureError::DegenerateEpoch { index },
                other => other,
            }
        })?;
        lags.push(lag);
    }
    // Common window in anchor coordinates.
    let mut start = 0isize;
    let mut end = anchor.len() as isize;
    for (e, &lag) in epochs.iter().zip(&lags) {
        start = start.max(-lag);
        end = end.min(e.len() as isize - lag);
    }
    if end - start < 2 {
        return Err(GestureError::TooShort((end - start).max(0) as usize));
    }
    Ok(epochs
        .iter()
        .zip(&lags)
        .map(|(e, &lag)| e.slice((start + lag) as usize, (end + lag) as usize))
        .collect())
}

/// Default alignment search range: a quarter of the shortest epoch.
pub fn default_max_lag(epochs: &[Epoch]) -> usize {
    epochs.iter().map(Epoch::len).min().unwrap_or(0) / 4
}

pub fn build_template(class: GestureClass, epochs: &[Epoch]) -> Result<GestureTemplate, GestureError> {
    build_template_with_lag(class, epochs, default_max_lag(epochs))
}

/// Aligns, then takes the per-channel per-sample arithmetic mean.
pub fn build_template_with_lag(
    class: GestureClass,
    epochs: &[Epoch],
    max_lag: usize,
) -> Result<GestureTemplate, GestureError> {
    let aligned = align_epochs(epochs, max_lag)?;
    let first = &aligned[0];
    // Running mean: identical epochs reproduce themselves bit for bit.
    let mut mean = first.channels().to_vec();
    for (k, e) in aligned.iter().enumerate().skip(1) {
        let weight = (k + 1) as f64;
        for (acc, ch) in mean.iter_mut().zip(e.channels()) {
            for (a, v) in acc.iter_mut().zip(ch) {
                *a += (v - *a) / weight;
            }
        }
    }
    Ok(GestureTemplate {
        class,
        signal: Epoch::new(mean, first.sample_rate_hz())?,
        training_count: aligned.len(),
    })
}

/// Scores the newest window slice against every template.
///
/// Templates longer than the window and degenerate slices are skipped. The
/// best score wins, earlier class ids win exact ties. A detection is only
/// reported when the score reaches `threshold` and at least `refractory_s`
/// has passed since `last_fire_us`.
pub fn match_window(
    window: &SignalWindow,
    templates: &[GestureTemplate],
    threshold: f64,
    refractory_s: f64,
    last_fire_us: Option<u64>,
) -> MatchDecision {
    let Some(now) = window.newest_timestamp() else {
        return MatchDecision::none(0);
    };
    let mut ordered: Vec<&GestureTemplate> = templates.iter().collect();
    ordered.sort_by_key(|t| t.class);
    let mut best: Option<(GestureClass, f64)> = None;
    for t in ordered {
        let Some(slice) = window.tail(t.signal.len()) else {
            continue;
        };
        if let Ok(score) = correlation_coefficient(&slice, t.signal.channels()) {
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((t.class, score));
            }
        }
    }
    let Some((class, score)) = best else {
        return MatchDecision::none(now);
    };
    let rested = last_fire_us
        .is_none_or(|last| now.saturating_sub(last) as f64 >= refractory_s * 1e6);
    if score >= threshold && rested {
        MatchDecision::recognized(class, score, now)
    } else {
        MatchDecision {
            class: None,
            score,
            timestamp_us: now,
        }
    }
}

/// Template set plus the detection state that survives between calls.
#[derive(Debug, Clone)]
pub struct Recognizer {
    templates: Vec<GestureTemplate>,
    pub threshold: f64,
    pub refractory_s: f64,
    last_fire_us: Option<u64>,
}

impl Recognizer {
    pub fn new(templates: Vec<GestureTemplate>, threshold: f64, refractory_s: f64) -> Self {
        Self {
            templates,
            threshold,
            refractory_s,
            last_fire_us: None,
        }
    }

    pub fn templates(&self) -> &[GestureTemplate] {
        &self.templates
    }

    pub fn last_fire_us(&self) -> Option<u64> {
        self.last_fire_us
    }

    pub fn reset(&mut self) {
        self.last_fire_us = None;
    }

    pub fn observe(&mut self, window: &SignalWindow) -> MatchDecision {
        let d = match_window(
            window,
            &self.templates,
            self.threshold,
            self.refractory_s,
            self.last_fire_us,
        );
        if d.class.is_some() {
            self.last_fire_us = Some(d.timestamp_us);
        }
        d
    }
}

// Synthetic gesture generator.

/// Samples per synthesized epoch at the default rate.
pub fn default_epoch_len() -> usize {
    (DEFAULT_EPOCH_DURATION_S * DEFAULT_SAMPLE_RATE_HZ).round() as usize
}

const PULSE_CENTER_S: f64 = 0.6;
const PULSE_WIDTH_S: f64 = 0.12;
const CIRCLE_PERIOD_S: f64 = 0.8;

fn bump(t: f64) -> f64 {
    let u = (t - PULSE_CENTER_S) / PULSE_WIDTH_S;
    (-0.5 * u * u).exp()
}

// accelerate-then-brake pulse
fn biphasic(t: f64) -> f64 {
    let u = (t - PULSE_CENTER_S) / PULSE_WIDTH_S;
    -u * bump(t)
}

fn hat(t: f64) -> f64 {
    let u = (t - PULSE_CENTER_S) / PULSE_WIDTH_S;
    (1.0 - u * u) * bump(t)
}

/// Noise-free dynamic part (gravity excluded) of each class at time `t`.
fn gesture_profile(class: GestureClass, t: f64) -> [f64; MATCH_CHANNELS] {
    let (g, d, m) = (bump(t), biphasic(t), hat(t));
    match class {
        GestureClass::Up | GestureClass::Down => {
            let s = if class == GestureClass::Up { 1.0 } else { -1.0 };
            // vertical accel pulse, wrist flexion on gyro y
            [1.5 * m, 1.5 * g, 6.0 * d, 1.2 * d, -3.0 * g, 1.0 * m].map(|v| s * v)
        }
        GestureClass::Left | GestureClass::Right => {
            let s = if class == GestureClass::Left { 1.0 } else { -1.0 };
            // lateral accel pulse, forearm yaw on gyro z
            [1.5 * d, 6.0 * d, 1.5 * m, 1.2 * g, 1.0 * d, 3.0 * g].map(|v| s * v)
        }
        GestureClass::Circle => {
            let span = DEFAULT_EPOCH_DURATION_S;
            let w = (std::f64::consts::PI * t / span).sin().powi(2);
            let phase = 2.0 * std::f64::consts::PI * (t - PULSE_CENTER_S) / CIRCLE_PERIOD_S;
            // clockwise: gyro x leads gyro y by a quarter period
            [
                1.5 * w * (2.0 * phase).sin(),
                -4.0 * w * phase.cos(),
                -4.0 * w * phase.sin(),
                3.0 * w * phase.sin(),
                3.0 * w * phase.cos(),
                1.0 * w * (2.0 * phase).cos(),
            ]
        }
    }
}

/// Deterministic synthetic gesture epoch with additive white noise.
///
/// With `noise_sigma == 0` the seed is irrelevant and every call returns the
/// same epoch.
pub fn synthesize_gesture(class: GestureClass, rng_seed: u64, noise_sigma: f64) -> Epoch {
    let len = default_epoch_len();
    let dt = 1.0 / DEFAULT_SAMPLE_RATE_HZ;
    let mut channels = vec![Vec::with_capacity(len); MATCH_CHANNELS];
    for i in 0..len {
        let p = gesture_profile(class, i as f64 * dt);
        for (k, ch) in channels.iter_mut().enumerate() {
            let gravity = if k == 2 { STANDARD_GRAVITY } else { 0.0 };
            ch.push(gravity + p[k]);
        }
    }
    add_noise(&mut channels, rng_seed, noise_sigma);
    Epoch::new(channels, DEFAULT_SAMPLE_RATE_HZ).expect("generator emits well-formed epochs")
}

/// Gesture shifted in time by `shift` samples (zero-filled at the edge with
/// the rest posture), for exercising alignment.
pub fn synthesize_shifted_gesture(
    class: GestureClass,
    shift: isize,
    rng_seed: u64,
    noise_sigma: f64,
) -> Epoch {
    let len = default_epoch_len();
    let dt = 1.0 / DEFAULT_SAMPLE_RATE_HZ;
    let mut channels = vec![Vec::with_capacity(len); MATCH_CHANNELS];
    for i in 0..len {
        let t = (i as isize - shift) as f64 * dt;
        let p = if (0.0..DEFAULT_EPOCH_DURATION_S).contains(&t) {
            gesture_profile(class, t)
        } else {
            [0.0; MATCH_CHANNELS]
        };
        for (k, ch) in channels.iter_mut().enumerate() {
            let gravity = if k == 2 { STANDARD_GRAVITY } else { 0.0 };
            ch.push(gravity + p[k]);
        }
    }
    add_noise(&mut channels, rng_seed, noise_sigma);
    Epoch::new(channels, DEFAULT_SAMPLE_RATE_HZ).expect("generator emits well-formed epochs")
}

/// Wrist at rest, face up, plus noise.
pub fn synthesize_rest(len: usize, rng_seed: u64, noise_sigma: f64) -> Epoch {
    let mut channels = vec![vec![0.0; len]; MATCH_CHANNELS];
    channels[2].iter_mut().for_each(|v| *v = STANDARD_GRAVITY);
    add_noise(&mut channels, rng_seed, noise_sigma);
    Epoch::new(channels, DEFAULT_SAMPLE_RATE_HZ).expect("rest epochs need len >= 2")
}

fn add_noise(channels: &mut [Vec<f64>], seed: u64, sigma: f64) {
    assert!(sigma >= 0.0, "noise sigma must be non-negative");
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for ch in channels.iter_mut() {
        for v in ch.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
}

/// One noiseless template per class, each built from the canonical epoch.
pub fn reference_templates() -> Vec<GestureTemplate> {
    GestureClass::ALL
        .into_iter()
        .map(|class| {
            let epochs = vec![synthesize_gesture(class, 0, 0.0); TRAINING_REPETITIONS];
            build_template(class, &epochs).expect("canonical epochs align")
        })
        .collect()
}

// Template store.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredTemplate {
    class_id: u8,
    training_count: usize,
    length: usize,
    /// Row-major: one row per sample, `channel_count` values per row.
    samples: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateStore {
    format: String,
    sample_rate_hz: f64,
    channel_count: usize,
    templates: Vec<StoredTemplate>,
}

pub fn templates_to_json(templates: &[GestureTemplate]) -> Result<String, GestureError> {
    let first = templates
        .first()
        .ok_or_else(|| GestureError::Store("no templates to store".into()))?;
    let channel_count = first.signal.channel_count();
    let sample_rate_hz = first.signal.sample_rate_hz();
    let mut stored = Vec::with_capacity(templates.len());
    for t in templates {
        if t.signal.channel_count() != channel_count || t.signal.sample_rate_hz() != sample_rate_hz {
            return Err(GestureError::Store(
                "templates in one store must share channel count and sample rate".into(),
            ));
        }
        let len = t.signal.len();
        let mut samples = Vec::with_capacity(len * channel_count);
        for i in 0..len {
            samples.extend(t.signal.channels().iter().map(|c| c[i]));
        }
        stored.push(StoredTemplate {
            class_id: t.class.id(),
            training_count: t.training_count,
            length: len,
            samples,
        });
    }
    let store = TemplateStore {
        format: TEMPLATE_FORMAT.into(),
        sample_rate_hz,
        channel_count,
        templates: stored,
    };
    serde_json::to_string_pretty(&store).map_err(|e| GestureError::Store(e.to_string()))
}

pub fn templates_from_json(text: &str) -> Result<Vec<GestureTemplate>, GestureError> {
    let store: TemplateStore =
        serde_json::from_str(text).map_err(|e| GestureError::Store(e.to_string()))?;
    if store.format != TEMPLATE_FORMAT {
        return Err(GestureError::Store(format!(
            "unsupported format tag {:?}",
            store.format
        )));
    }
    if store.channel_count == 0 {
        return Err(GestureError::Store("channel_count must be positive".into()));
    }
    store
        .templates
        .into_iter()
        .map(|st| {
            let class = GestureClass::from_id(st.class_id)
                .ok_or_else(|| GestureError::Store(format!("bad class id {}", st.class_id)))?;
            if st.samples.len() != st.length * store.channel_count {
                return Err(GestureError::Store(format!(
                    "{class}: expected {} values, found {}",
                    st.length * store.channel_count,
                    st.samples.len()
                )));
            }
            if st.training_count == 0 {
                return Err(GestureError::Store(format!("{class}: training_count is 0")));
            }
            let channels = (0..store.channel_count)
                .map(|c| {
                    st.samples
                        .iter()
                        .skip(c)
                        .step_by(store.channel_count)
                        .copied()
                        .collect()
                })
                .collect();
            Ok(GestureTemplate {
                class,
                signal: Epoch::new(channels, store.sample_rate_hz)?,
                training_count: st.training_count,
            })
        })
        .collect()
}

pub fn save_templates(path: &Path, templates: &[GestureTemplate]) -> Result<(), GestureError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(templates_to_json(templates)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn load_templates(path: &Path) -> Result<Vec<GestureTemplate>, GestureError> {
    templates_from_json(&std::fs::read_to_string(path)?)
}

// Training sidecar: one `{start_us, end_us, class}` object per line.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochBoundary {
    pub start_us: u64,
    pub end_us: u64,
    pub class: GestureClass,
}

pub fn read_sidecar<R: BufRead>(reader: R) -> Result<Vec<EpochBoundary>, GestureError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let b: EpochBoundary = serde_json::from_str(line.trim())
            .map_err(|e| GestureError::Store(format!("sidecar line {}: {e}", idx + 1)))?;
        if b.end_us <= b.start_us {
            return Err(GestureError::Store(format!(
                "sidecar line {}: end_us must exceed start_us",
                idx + 1
            )));
        }
        out.push(b);
    }
    Ok(out)
}

pub fn load_sidecar(path: &Path) -> Result<Vec<EpochBoundary>, GestureError> {
    read_sidecar(BufReader::new(File::open(path)?))
}

pub fn write_sidecar<W: Write>(mut w: W, bounds: &[EpochBoundary]) -> std::io::Result<()> {
    for b in bounds {
        writeln!(w, "{}", serde_json::to_string(b).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}

/// Cuts labelled epochs out of a trace. Each epoch covers
/// `start_us <= t < end_us`, trimmed to at most `max_len` samples.
pub fn extract_epochs(
    trace: &[ImuSample],
    bounds: &[EpochBoundary],
    sample_rate_hz: f64,
    max_len: usize,
) -> Result<BTreeMap<GestureClass, Vec<Epoch>>, GestureError> {
    let trace_end = trace.last().map(|s| s.timestamp_us);
    let mut out: BTreeMap<GestureClass, Vec<Epoch>> = BTreeMap::new();
    for (i, b) in bounds.iter().enumerate() {
        let inside = match (trace.first(), trace_end) {
            (Some(first), Some(last)) => {
                b.start_us >= first.timestamp_us && b.end_us <= last + sample_period_us(sample_rate_hz)
            }
            _ => false,
        };
        if !inside {
            return Err(GestureError::Store(format!(
                "epoch {i} ({} us .. {} us) lies outside the trace",
                b.start_us, b.end_us
            )));
        }
        let lo = trace.partition_point(|s| s.timestamp_us < b.start_us);
        let hi = trace.partition_point(|s| s.timestamp_us < b.end_us);
        let hi = hi.min(lo + max_len);
        let epoch = Epoch::from_samples(&trace[lo..hi], sample_rate_hz)
            .map_err(|e| GestureError::Store(format!("epoch {i}: {e}")))?;
        out.entry(b.class).or_default().push(epoch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(x: &[f64]) -> Vec<Vec<f64>> {
        vec![x.to_vec()]
    }

    // Independent reference: NCC at each lag evaluated straight from the
    // definition, no shared helpers.
    fn brute_force_lag(r: &[f64], c: &[f64], max_lag: isize) -> isize {
        let mut best = (0isize, f64::NEG_INFINITY);
        for lag in -max_lag..=max_lag {
            let pairs: Vec<(f64, f64)> = (0..r.len() as isize)
                .filter(|&n| n + lag >= 0 && n + lag < c.len() as isize)
                .map(|n| (r[n as usize], c[(n + lag) as usize]))
                .collect();
            let k = pairs.len() as f64;
            let mr = pairs.iter().map(|p| p.0).sum::<f64>() / k;
            let mc = pairs.iter().map(|p| p.1).sum::<f64>() / k;
            let num: f64 = pairs.iter().map(|p| (p.0 - mr) * (p.1 - mc)).sum();
            let dr: f64 = pairs.iter().map(|p| (p.0 - mr).powi(2)).sum();
            let dc: f64 = pairs.iter().map(|p| (p.1 - mc).powi(2)).sum();
            if dr == 0.0 || dc == 0.0 {
                continue;
            }
            let v = num / (dr * dc).sqrt();
            let better = v > best.1 + 1e-12
                || ((v - best.1).abs() <= 1e-12
                    && (lag.abs() < best.0.abs() || (lag.abs() == best.0.abs() && lag < best.0)));
            if better {
                best = (lag, v);
            }
        }
        best.0
    }

    #[test]
    fn class_ids_are_stable() {
        let ids: Vec<u8> = GestureClass::ALL.iter().map(|c| c.id()).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5]);
        assert_eq!(GestureClass::from_id(3), Some(GestureClass::Circle));
        assert_eq!(GestureClass::from_id(0), None);
        assert_eq!(GestureClass::from_id(6), None);
        assert_eq!("Circle".parse::<GestureClass>().unwrap(), GestureClass::Circle);
    }

    #[test]
    fn correlation_examples() {
        let x = [0.3, -1.2, 4.0, 2.5, 0.0];
        assert!((correlation_coefficient(&one(&x), &one(&x)).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((correlation_coefficient(&one(&x), &one(&neg)).unwrap() + 1.0).abs() < 1e-12);
        let a = [1.0, 0.0, -1.0, 0.0];
        let b = [0.0, 1.0, 0.0, -1.0];
        assert_eq!(correlation_coefficient(&one(&a), &one(&b)).unwrap(), 0.0);
    }

    #[test]
    fn correlation_degenerate_channel() {
        let a = vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]];
        let b = vec![vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 3.0]];
        assert!(matches!(
            correlation_coefficient(&a, &b),
            Err(GestureError::Degenerate { channel: 1 })
        ));
    }

    #[test]
    fn ncc_examples() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
        assert_eq!(ncc_best_lag(&one(&x), &one(&x), 8).unwrap().0, 0);
        assert!((ncc_best_lag(&one(&x), &one(&x), 8).unwrap().1 - 1.0).abs() < 1e-12);

        let mut delayed = vec![0.0; 3];
        delayed.extend_from_slice(&x[..x.len() - 3]);
        assert_eq!(brute_force_lag(&x, &delayed, 8), 3);
        assert_eq!(ncc_best_lag(&one(&x), &one(&delayed), 8).unwrap().0, 3);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (lag, peak) = ncc_best_lag(&one(&x), &one(&neg), 0).unwrap();
        assert_eq!(lag, 0);
        assert!((peak + 1.0).abs() < 1e-12);

        assert!(ncc_best_lag(&one(&[1.0; 8]), &one(&x[..8]), 2).is_err());
        assert!(matches!(
            ncc_best_lag(&one(&x), &one(&x), 40),
            Err(GestureError::LagTooLarge { .. })
        ));
    }

    #[test]
    fn align_examples() {
        let e = synthesize_gesture(GestureClass::Up, 0, 0.0);
        let out = align_epochs(&[e.clone(), e.clone(), e.clone()], 10).unwrap();
        assert!(out.iter().all(|o| *o == e));

        assert_eq!(align_epochs(std::slice::from_ref(&e), 10).unwrap(), vec![e.clone()]);

        let delayed = synthesize_shifted_gesture(GestureClass::Up, 3, 0, 0.0);
        let out = align_epochs(&[e.clone(), delayed.clone()], 10).unwrap();
        assert_eq!(out[0].len(), e.len() - 3);
        assert_eq!(out[0], e.slice(0, e.len() - 3));
        assert_eq!(out[1], delayed.slice(3, delayed.len()));

        let flat = synthesize_rest(e.len(), 0, 0.0);
        assert!(matches!(
            align_epochs(&[e.clone(), flat], 10),
            Err(GestureError::DegenerateEpoch { index: 1 })
        ));
        assert!(matches!(align_epochs(&[], 3), Err(GestureError::NoEpochs)));
    }

    #[test]
    fn template_examples() {
        let e = synthesize_gesture(GestureClass::Circle, 0, 0.0);
        let t = build_template(GestureClass::Circle, &vec![e.clone(); 60]).unwrap();
        assert_eq!(t.signal, e);
        assert_eq!(t.training_count, 60);

        let c = 0.8;
        let mut shifted = e.channels().to_vec();
        shifted[4].iter_mut().for_each(|v| *v += c);
        let second = Epoch::new(shifted, e.sample_rate_hz()).unwrap();
        let t = build_template(GestureClass::Circle, &[e.clone(), second]).unwrap();
        for (i, v) in t.signal.channels()[4].iter().enumerate() {
            assert!((v - (e.channels()[4][i] + c / 2.0)).abs() < 1e-12);
        }
        assert!(matches!(
            build_template(GestureClass::Up, &[]),
            Err(GestureError::NoEpochs)
        ));
    }

    fn window_from(epochs: &[Epoch]) -> SignalWindow {
        let mut w = SignalWindow::for_matching();
        let mut t = 0u64;
        for e in epochs {
            for s in e.to_samples(t) {
                w.push_sample(&s).unwrap();
            }
            t += e.len() as u64 * 20_000;
        }
        w
    }

    #[test]
    fn match_examples() {
        let templates = reference_templates();
        let circle = synthesize_gesture(GestureClass::Circle, 0, 0.0);
        let w = window_from(&[synthesize_rest(30, 1, 0.0), circle]);
        let d = match_window(&w, &templates, 0.9, 1.0, None);
        assert_eq!(d.class, Some(GestureClass::Circle));
        assert!((d.score - 1.0).abs() < 1e-12);

        let mut flat = SignalWindow::for_matching();
        for i in 0..100u64 {
            flat.push(i + 1, &[0.0; 6]).unwrap();
        }
        assert_eq!(match_window(&flat, &templates, 0.75, 1.0, None).class, None);

        let now = w.newest_timestamp().unwrap();
        let d = match_window(&w, &templates, 0.9, 1.0, Some(now - 200_000));
        assert_eq!(d.class, None);
        let d = match_window(&w, &templates, 0.9, 1.0, Some(now - 1_000_000));
        assert_eq!(d.class, Some(GestureClass::Circle));
    }

    #[test]
    fn short_window_reports_none() {
        let templates = reference_templates();
        let w = window_from(&[synthesize_rest(10, 3, 0.2)]);
        assert_eq!(match_window(&w, &templates, 0.5, 1.0, None).class, None);
    }

    #[test]
    fn synthesis_examples() {
        assert_eq!(
            synthesize_gesture(GestureClass::Up, 7, 0.0),
            synthesize_gesture(GestureClass::Up, 9, 0.0)
        );
        let up = synthesize_gesture(GestureClass::Up, 0, 0.0);
        let down = synthesize_gesture(GestureClass::Down, 0, 0.0);
        for (u, d) in up.channels()[2].iter().zip(&down.channels()[2]) {
            assert!(((u - STANDARD_GRAVITY) + (d - STANDARD_GRAVITY)).abs() < 1e-12);
        }
        let left = synthesize_gesture(GestureClass::Left, 0, 0.0);
        let right = synthesize_gesture(GestureClass::Right, 0, 0.0);
        for (l, r) in left.channels()[1].iter().zip(&right.channels()[1]) {
            assert_eq!(*l, -*r);
        }
        let noisy = synthesize_gesture(GestureClass::Circle, 1, 0.05);
        let clean = synthesize_gesture(GestureClass::Circle, 1, 0.0);
        let r = correlation_coefficient(noisy.channels(), clean.channels()).unwrap();
        assert!(r > 0.9, "r = {r}");
        assert_eq!(noisy, synthesize_gesture(GestureClass::Circle, 1, 0.05));
    }

    #[test]
    fn classes_are_well_separated() {
        let t = reference_templates();
        for a in &t {
            for b in &t {
                if a.class != b.class {
                    let r = correlation_coefficient(a.signal.channels(), b.signal.channels()).unwrap();
                    assert!(r < 0.5, "{} vs {}: {r}", a.class, b.class);
                }
            }
        }
    }

    #[test]
    fn store_round_trip() {
        let t = reference_templates();
        let text = templates_to_json(&t).unwrap();
        assert_eq!(templates_from_json(&text).unwrap(), t);
        let bad = text.replace(TEMPLATE_FORMAT, "other/9");
        assert!(templates_from_json(&bad).is_err());
    }

    #[test]
    fn extract_epochs_checks_bounds() {
        let samples = synthesize_gesture(GestureClass::Up, 0, 0.0).to_samples(0);
        let ok = [EpochBoundary { start_us: 0, end_us: 400_000, class: GestureClass::Up }];
        let got = extract_epochs(&samples, &ok, 50.0, 60).unwrap();
        assert_eq!(got[&GestureClass::Up][0].len(), 20);
        let beyond = [EpochBoundary { start_us: 0, end_us: 5_000_000, class: GestureClass::Up }];
        assert!(extract_epochs(&samples, &beyond, 50.0, 60).is_err());
    }

    proptest! {
        #[test]
        fn correlation_symmetric_and_affine_invariant(
            a in proptest::collection::vec(-10.0..10.0f64, 8),
            b in proptest::collection::vec(-10.0..10.0f64, 8),
            scale in 0.1..10.0f64, offset in -5.0..5.0f64,
        ) {
            let (a, b) = (one(&a), one(&b));
            if let (Ok(ab), Ok(ba)) = (correlation_coefficient(&a, &b), correlation_coefficient(&b, &a)) {
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&ab));
                let a2 = vec![a[0].iter().map(|v| scale * v + offset).collect::<Vec<_>>()];
                let r2 = correlation_coefficient(&a2, &b).unwrap();
                prop_assert!((ab - r2).abs() < 1e-9);
            }
        }

        #[test]
        fn ncc_recovers_shift(
            x in proptest::collection::vec(-1.0..1.0f64, 40..80),
            k in -10isize..=10,
        ) {
            let n = x.len();
            let shifted: Vec<f64> = (0..n as isize)
                .map(|i| if i - k >= 0 && i - k < n as isize { x[(i - k) as usize] } else { 0.0 })
                .collect();
            let (lag, peak) = ncc_best_lag(&one(&x), &one(&shifted), 10).unwrap();
            prop_assert_eq!(lag, k);
            prop_assert!((peak - 1.0).abs() < 1e-9);
        }

        #[test]
        fn template_of_copies_is_identity(n in 1usize..20, seed in 0u64..1000) {
            let e = synthesize_gesture(GestureClass::Left, seed, 0.3);
            let t = build_template(GestureClass::Left, &vec![e.clone(); n]).unwrap();
            for (tc, ec) in t.signal.channels().iter().zip(e.channels()) {
                for (a, b) in tc.iter().zip(ec) {
                    prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
