//! One-point calibration: a short fixation on a screen-center dot yields the
//! user's personal center ratios `(h_c, v_c)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::{Observation, RatioBounds};
use crate::vision::EyeLandmarks;

/// Eye aspect ratio below which an eye counts as closed.
pub const DEFAULT_EAR_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("only {usable} usable samples, need at least {quorum}")]
    TooFewSamples { usable: usize, quorum: usize },
    #[error("invalid calibration target: {0}")]
    InvalidSpec(String),
}

// ── Blink detection ─────────────────────────────────────────

/// `(|p37 - p41| + |p38 - p40|) / (2 |p36 - p39|)` for the left-eye indices
/// (analogous for the right eye).
pub fn eye_aspect_ratio(eye: &EyeLandmarks) -> f64 {
    let gap = eye.upper[0].distance(&eye.lower[0]) + eye.upper[1].distance(&eye.lower[1]);
    let width = eye.corner_outer.distance(&eye.corner_inner);
    if width == 0.0 {
        0.0
    } else {
        gap / (2.0 * width)
    }
}

/// Strictly below the threshold is a blink.
pub fn is_blink(eye: &EyeLandmarks, ear_threshold: f64) -> bool {
    eye_aspect_ratio(eye) < ear_threshold
}

// ── Target and profile ──────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetState {
    Red,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationTargetSpec {
    pub screen_x: f64,
    pub screen_y: f64,
    pub duration_ms: u64,
    /// Minimum number of usable samples in the window.
    pub quorum: usize,
}

impl Default for CalibrationTargetSpec {
    fn default() -> Self {
        Self {
            screen_x: 960.0,
            screen_y: 540.0,
            duration_ms: 2000,
            quorum: 10,
        }
    }
}

impl CalibrationTargetSpec {
    pub fn validate(&self, screen_w: u32, screen_h: u32) -> Result<(), CalibrationError> {
        if self.duration_ms == 0 {
            return Err(CalibrationError::InvalidSpec("duration must be positive".into()));
        }
        let inside = |v: f64, max: u32| v >= 0.0 && v < max as f64;
        if !inside(self.screen_x, screen_w) || !inside(self.screen_y, screen_h) {
            return Err(CalibrationError::InvalidSpec(format!(
                "target ({}, {}) outside {screen_w}x{screen_h} screen",
                self.screen_x, self.screen_y
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub h_c: f64,
    pub v_c: f64,
    pub sample_count: usize,
    pub created_at: u64,
    pub bounds: RatioBounds,
}

impl CalibrationProfile {
    /// A profile with a known center, bypassing the fixation window.
    pub fn fixed(h_c: f64, v_c: f64) -> Self {
        Self {
            h_c,
            v_c,
            sample_count: 0,
            created_at: 0,
            bounds: RatioBounds::default(),
        }
    }
}

/// Lower median: the element at index `(n - 1) / 2` after sorting.
fn lower_median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

/// Component-wise median of the usable (valid, non-blink) observations.
/// The profile is stamped with the last observation's time.
pub fn run_calibration(
    observations: &[Observation],
    spec: &CalibrationTargetSpec,
    bounds: RatioBounds,
) -> Result<CalibrationProfile, CalibrationError> {
    let created_at = observations.iter().map(|o| o.t_ms()).max().unwrap_or(0);
    calibrate(observations, spec, bounds, created_at)
}

fn calibrate(
    observations: &[Observation],
    spec: &CalibrationTargetSpec,
    bounds: RatioBounds,
    created_at: u64,
) -> Result<CalibrationProfile, CalibrationError> {
    let usable: Vec<_> = observations.iter().filter(|o| o.usable()).collect();
    let quorum = spec.quorum.max(1);
    if usable.len() < quorum {
        return Err(CalibrationError::TooFewSamples {
            usable: usable.len(),
            quorum,
        });
    }
    Ok(CalibrationProfile {
        h_c: lower_median(usable.iter().map(|o| o.sample.h).collect()),
        v_c: lower_median(usable.iter().map(|o| o.sample.v).collect()),
        sample_count: usable.len(),
        created_at,
        bounds,
    })
}

// ── Streaming session ───────────────────────────────────────

/// Collects observations for one calibration window. The window opens at
/// the first observation and closes with the first observation at or past
/// `start + duration_ms`; that closing observation is not part of the
/// window.
#[derive(Debug, Clone)]
pub struct CalibrationSession {
    spec: CalibrationTargetSpec,
    bounds: RatioBounds,
    start: Option<u64>,
    collected: Vec<Observation>,
}

impl CalibrationSession {
    pub fn new(spec: CalibrationTargetSpec, bounds: RatioBounds) -> Self {
        Self {
            spec,
            bounds,
            start: None,
            collected: Vec::new(),
        }
    }

    pub fn spec(&self) -> &CalibrationTargetSpec {
        &self.spec
    }

    pub fn started_at(&self) -> Option<u64> {
        self.start
    }

    /// Feeds one observation; returns the outcome once the window closes.
    pub fn push(&mut self, obs: Observation) -> Option<Result<CalibrationProfile, CalibrationError>> {
        let start = *self.start.get_or_insert(obs.t_ms());
        let end = start + self.spec.duration_ms;
        if obs.t_ms() >= end {
            return Some(calibrate(&self.collected, &self.spec, self.bounds, end));
        }
        self.collected.push(obs);
        None
    }
}
