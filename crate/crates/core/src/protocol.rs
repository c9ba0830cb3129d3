//! Wire protocol between the gaze service and its clients.
//!
//! Every message is one JSON object per line with a `"type"` tag; pipeline
//! events additionally carry the source timestamp `t_ms`.

use serde::{Deserialize, Serialize};

use crate::calibration::TargetState;
use crate::menu::{Outcome, StageLayout};
use crate::zone::{AreaPreset, CentralArea, Direction, Zone};

/// Protocol revision announced in `hello`.
pub const PROTOCOL_VERSION: u32 = 1;

// ── Server → client ─────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Event {
    Hello {
        version: u32,
        dwell_ms: u64,
        area: CentralArea,
    },
    /// Per-frame gaze summary. `zone` and `screen` appear once calibrated
    /// and only for usable samples.
    Gaze {
        h: f64,
        v: f64,
        valid: bool,
        blink: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zone: Option<Zone>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        screen: Option<[f64; 2]>,
    },
    TrackingLost,
    /// Effective sample rate fell below the floor.
    Degraded {
        rate_hz: f64,
    },
    CalibrationStarted,
    CalibrationPoint {
        x: f64,
        y: f64,
        state: TargetState,
    },
    CalibrationDone {
        h_c: f64,
        v_c: f64,
        sample_count: usize,
    },
    CalibrationFailed {
        reason: String,
    },
    Focus {
        direction: Direction,
        elapsed_ms: u64,
        threshold_ms: u64,
    },
    Confirmed {
        direction: Direction,
    },
    FocusLost {
        direction: Direction,
    },
    ClusterSelected {
        direction: Direction,
    },
    Stage {
        layout: StageLayout,
    },
    Selected {
        item_id: String,
    },
    Back,
    TimedOut,
    Trial {
        target: String,
        outcome: Outcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        completion_ms: Option<u64>,
    },
    ExperimentStarted {
        targets: Vec<String>,
    },
    ExperimentDone {
        trials: usize,
        correct: usize,
        false_count: usize,
        missed: usize,
    },
    /// Echo of the active condition after `set_condition`.
    Condition {
        dwell_ms: u64,
        area: CentralArea,
    },
    SourceEnded,
    Error {
        message: String,
    },
}

impl Event {
    pub fn type_name(&self) -> &'static str {
        match self {
            Event::Hello { .. } => "hello",
            Event::Gaze { .. } => "gaze",
            Event::TrackingLost => "tracking_lost",
            Event::Degraded { .. } => "degraded",
            Event::CalibrationStarted => "calibration_started",
            Event::CalibrationPoint { .. } => "calibration_point",
            Event::CalibrationDone { .. } => "calibration_done",
            Event::CalibrationFailed { .. } => "calibration_failed",
            Event::Focus { .. } => "focus",
            Event::Confirmed { .. } => "confirmed",
            Event::FocusLost { .. } => "focus_lost",
            Event::ClusterSelected { .. } => "cluster_selected",
            Event::Stage { .. } => "stage",
            Event::Selected { .. } => "selected",
            Event::Back => "back",
            Event::TimedOut => "timed_out",
            Event::Trial { .. } => "trial",
            Event::ExperimentStarted { .. } => "experiment_started",
            Event::ExperimentDone { .. } => "experiment_done",
            Event::Condition { .. } => "condition",
            Event::SourceEnded => "source_ended",
            Event::Error { .. } => "error",
        }
    }
}

/// An event with its source timestamp, the unit written to logs and
/// sockets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ms: Option<u64>,
    #[serde(flatten)]
    pub event: Event,
}

impl Message {
    pub fn at(t_ms: u64, event: Event) -> Self {
        Self {
            t_ms: Some(t_ms),
            event,
        }
    }

    pub fn untimed(event: Event) -> Self {
        Self { t_ms: None, event }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

// ── Client → server ─────────────────────────────────────────

/// Central-area selector in `set_condition`: a preset name or explicit
/// extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AreaSpec {
    Preset(AreaPreset),
    Custom { w: f64, l: f64 },
}

impl AreaSpec {
    pub fn resolve(self) -> Result<CentralArea, String> {
        match self {
            AreaSpec::Preset(p) => Ok(CentralArea::preset(p)),
            AreaSpec::Custom { w, l } => CentralArea::custom(w, l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    StartCalibration {},
    SetCondition {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dwell_ms: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        area: Option<AreaSpec>,
    },
    StartExperiment {
        targets: Vec<String>,
    },
    Stop {},
}

impl Control {
    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("controls serialize")
    }
}
