//! Pupil position ratios: raw per-eye ratios within the eye outline,
//! renormalization against population bounds, and binocular averaging.

use serde::{Deserialize, Serialize};

use crate::vision::{EyeLandmarks, Point, VisionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Raw-ratio extremes observed when looking to the screen edges. Defaults
/// are the pilot-study values: 0.28 (rightmost) / 0.87 (leftmost)
/// horizontally and 0.48 (top) / 0.95 (bottom) vertically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for RatioBounds {
    fn default() -> Self {
        Self {
            h_min: 0.28,
            h_max: 0.87,
            v_min: 0.48,
            v_max: 0.95,
        }
    }
}

impl RatioBounds {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.h_min, self.h_max) {
            return Err(format!(
                "horizontal bounds {} .. {} not increasing",
                self.h_min, self.h_max
            ));
        }
        if !ok(self.v_min, self.v_max) {
            return Err(format!(
                "vertical bounds {} .. {} not increasing",
                self.v_min, self.v_max
            ));
        }
        Ok(())
    }

    pub fn range(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::Horizontal => (self.h_min, self.h_max),
            Axis::Vertical => (self.v_min, self.v_max),
        }
    }
}

// ── Per-eye ratios ──────────────────────────────────────────

/// `(x - x_min) / (x_max - x_min)` clamped to `[0, 1]`; 1 is leftmost gaze.
pub fn horizontal_ratio(pupil_x: f64, eye: &EyeLandmarks) -> Result<f64, VisionError> {
    let (lo, hi) = (eye.x_min(), eye.x_max());
    if hi == lo {
        return Err(VisionError::InvalidLandmarks(format!(
            "{:?} eye corners coincide",
            eye.side
        )));
    }
    Ok(((pupil_x - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// `(y - y_min) / (y_max - y_min)` between the eyelid midlines, clamped to
/// `[0, 1]`; 0 is the top.
pub fn vertical_ratio(pupil_y: f64, eye: &EyeLandmarks) -> Result<f64, VisionError> {
    let (lo, hi) = (eye.y_min(), eye.y_max());
    if hi == lo {
        return Err(VisionError::InvalidLandmarks(format!(
            "{:?} eyelids coincide",
            eye.side
        )));
    }
    Ok(((pupil_y - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Raw `(h, v)` for one eye.
pub fn eye_ratios(pupil: Point, eye: &EyeLandmarks) -> Result<(f64, f64), VisionError> {
    Ok((horizontal_ratio(pupil.x, eye)?, vertical_ratio(pupil.y, eye)?))
}

pub fn renormalize(raw: f64, axis: Axis, bounds: &RatioBounds) -> f64 {
    let (lo, hi) = bounds.range(axis);
    ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Inverse of [`renormalize`] on `[0, 1]`.
pub fn denormalize(ratio: f64, axis: Axis, bounds: &RatioBounds) -> f64 {
    let (lo, hi) = bounds.range(axis);
    lo + ratio * (hi - lo)
}

/// Mean of the available eyes.
pub fn combine_eyes(left: Option<f64>, right: Option<f64>) -> Option<f64> {
    match (left, right) {
        (Some(l), Some(r)) => Some((l + r) / 2.0),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

// ── Samples ─────────────────────────────────────────────────

/// One frame's gaze estimate. `h`/`v` are the renormalized binocular ratios
/// used downstream; the raw per-eye values are kept when they were computed
/// from an image (ratio traces carry only the final values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t_ms: u64,
    pub h: f64,
    pub v: f64,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_raw_left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_raw_right: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_raw_left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_raw_right: Option<f64>,
}

impl GazeSample {
    pub fn new(t_ms: u64, h: f64, v: f64) -> Self {
        Self {
            t_ms,
            h,
            v,
            valid: true,
            h_raw_left: None,
            h_raw_right: None,
            v_raw_left: None,
            v_raw_right: None,
        }
    }

    /// No usable estimate for this frame (face lost, both pupils missing).
    pub fn invalid(t_ms: u64) -> Self {
        Self {
            valid: false,
            ..Self::new(t_ms, 0.0, 0.0)
        }
    }

    /// Builds a sample from per-eye raw `(h, v)` ratios.
    pub fn from_eyes(t_ms: u64, left: Option<(f64, f64)>, right: Option<(f64, f64)>, bounds: &RatioBounds) -> Self {
        let norm = |e: Option<(f64, f64)>, axis: Axis| {
            e.map(|(h, v)| {
                let raw = if axis == Axis::Horizontal { h } else { v };
                renormalize(raw, axis, bounds)
            })
        };
        let h = combine_eyes(norm(left, Axis::Horizontal), norm(right, Axis::Horizontal));
        let v = combine_eyes(norm(left, Axis::Vertical), norm(right, Axis::Vertical));
        let mut s = match (h, v) {
            (Some(h), Some(v)) => Self::new(t_ms, h, v),
            _ => Self::invalid(t_ms),
        };
        s.h_raw_left = left.map(|e| e.0);
        s.v_raw_left = left.map(|e| e.1);
        s.h_raw_right = right.map(|e| e.0);
        s.v_raw_right = right.map(|e| e.1);
        s
    }
}

/// A gaze sample together with the blink flag from the eye aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub sample: GazeSample,
    #[serde(default)]
    pub blink: bool,
}

impl Observation {
    pub fn new(sample: GazeSample, blink: bool) -> Self {
        Self { sample, blink }
    }

    pub fn t_ms(&self) -> u64 {
        self.sample.t_ms
    }

    /// Usable for calibration and classification.
    pub fn usable(&self) -> bool {
        self.sample.valid && !self.blink
    }
}
