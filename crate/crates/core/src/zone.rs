//! Five-zone classification around the calibrated center.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationProfile;
use crate::ratio::GazeSample;

// ── Zones ───────────────────────────────────────────────────

/// One of the four selectable directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown direction {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Center,
    Up,
    Down,
    Left,
    Right,
}

impl Zone {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Zone::Center => None,
            Zone::Up => Some(Direction::Up),
            Zone::Down => Some(Direction::Down),
            Zone::Left => Some(Direction::Left),
            Zone::Right => Some(Direction::Right),
        }
    }
}

impl From<Direction> for Zone {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Up => Zone::Up,
            Direction::Down => Zone::Down,
            Direction::Left => Zone::Left,
            Direction::Right => Zone::Right,
        }
    }
}

// ── Central area ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaPreset {
    Small,
    Medium,
    Large,
    Pilot,
}

impl AreaPreset {
    pub const ALL: [AreaPreset; 4] = [
        AreaPreset::Small,
        AreaPreset::Medium,
        AreaPreset::Large,
        AreaPreset::Pilot,
    ];

    /// `(w, l)` extents in ratio units.
    pub fn extents(self) -> (f64, f64) {
        match self {
            AreaPreset::Small => (0.16, 0.09),
            AreaPreset::Medium => (0.20, 0.12),
            AreaPreset::Large => (0.24, 0.16),
            AreaPreset::Pilot => (0.40, 0.20),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AreaPreset::Small => "small",
            AreaPreset::Medium => "medium",
            AreaPreset::Large => "large",
            AreaPreset::Pilot => "pilot",
        }
    }
}

impl fmt::Display for AreaPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AreaPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AreaPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown area preset {s:?} (small, medium, large, pilot)"))
    }
}

/// The inactive central rectangle: `w` wide and `l` tall in ratio units,
/// centered on the calibration point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralArea {
    pub w: f64,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<AreaPreset>,
}

impl CentralArea {
    pub fn preset(p: AreaPreset) -> Self {
        let (w, l) = p.extents();
        Self { w, l, preset: Some(p) }
    }

    pub fn custom(w: f64, l: f64) -> Result<Self, String> {
        let a = Self { w, l, preset: None };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |x: f64| x > 0.0 && x < 1.0;
        if ok(self.w) && ok(self.l) {
            Ok(())
        } else {
            Err(format!(
                "central area {}x{} must lie strictly inside (0, 1)",
                self.w, self.l
            ))
        }
    }

    pub fn label(&self) -> String {
        match self.preset {
            Some(p) => p.to_string(),
            None => format!("{}x{}", self.w, self.l),
        }
    }
}

impl Default for CentralArea {
    fn default() -> Self {
        Self::preset(AreaPreset::Medium)
    }
}

// ── Classification ──────────────────────────────────────────

/// Slack on boundary comparisons so that a point lying on a boundary in
/// decimal terms (0.56 - 0.50 against 0.06, say) is treated as on it rather
/// than falling to whichever side binary rounding puts it.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Zone of the point `(h, v)` relative to the center `(h_c, v_c)`.
///
/// Inside the rectangle (inclusive) is Center. Outside, the axis whose
/// excess over the half-extent is larger relative to that half-extent
/// decides; exact ties go to the horizontal axis. Ratios grow towards the
/// left and the bottom.
pub fn classify_point(h: f64, v: f64, h_c: f64, v_c: f64, area: &CentralArea) -> Zone {
    let (dh, dv) = (h - h_c, v - v_c);
    let (hw, hl) = (area.w / 2.0, area.l / 2.0);
    if dh.abs() <= hw + BOUNDARY_EPS && dv.abs() <= hl + BOUNDARY_EPS {
        return Zone::Center;
    }
    let e_h = (dh.abs() - hw) / hw;
    let e_v = (dv.abs() - hl) / hl;
    if e_h >= e_v - BOUNDARY_EPS {
        if dh > 0.0 {
            Zone::Left
        } else {
            Zone::Right
        }
    } else if dv > 0.0 {
        Zone::Down
    } else {
        Zone::Up
    }
}

/// `None` for an invalid sample.
pub fn classify(sample: &GazeSample, profile: &CalibrationProfile, area: &CentralArea) -> Option<Zone> {
    sample
        .valid
        .then(|| classify_point(sample.h, sample.v, profile.h_c, profile.v_c, area))
}

// ── Screen mapping ──────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
    /// Pixels per degree of visual angle at 45 cm.
    pub px_per_degree: f64,
    pub distance_cm: u32,
}

impl Default for ScreenGeometry {
    fn default() -> Self {
        Self {
            width_px: 1920,
            height_px: 1080,
            px_per_degree: 44.0,
            distance_cm: 45,
        }
    }
}

impl ScreenGeometry {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    pub fn validate(&self) -> Result<(), String> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err("screen dimensions must be positive".into());
        }
        if !(self.px_per_degree > 0.0) {
            return Err("px_per_degree must be positive".into());
        }
        Ok(())
    }
}

/// Debug cursor position: the calibrated center lands mid-screen and a unit
/// ratio change spans the full screen, clamped to the pixel grid.
pub fn map_to_screen(sample: &GazeSample, profile: &CalibrationProfile, geom: &ScreenGeometry) -> (f64, f64) {
    let (w, h) = (geom.width_px as f64, geom.height_px as f64);
    let x = (profile.h_c - sample.h) * w + w / 2.0;
    let y = (sample.v - profile.v_c) * h + h / 2.0;
    (x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0))
}
