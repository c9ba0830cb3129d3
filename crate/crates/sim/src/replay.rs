//! Headless replay of a ratio trace through the full pipeline.

use gave_core::calibration::CalibrationProfile;
use gave_core::menu::Catalog;
use gave_core::pipeline::{Pipeline, PipelineConfig};
use gave_core::protocol::Message;
use serde::{Deserialize, Serialize};

use crate::trace::TraceLine;

/// Everything a replay depends on besides the trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub pipeline: PipelineConfig,
    pub catalog: Catalog,
    /// Skip calibration and use this center.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<CalibrationProfile>,
}

impl ReplayConfig {
    pub fn build(&self) -> Result<Pipeline, String> {
        let p = Pipeline::new(self.pipeline.clone(), self.catalog.clone())?;
        Ok(match self.profile {
            Some(profile) => p.with_profile(profile),
            None => p,
        })
    }
}

/// The ordered event log produced by `trace`. Deterministic in
/// `(trace, config)`.
pub fn replay(trace: &[TraceLine], config: &ReplayConfig) -> Result<Vec<Message>, String> {
    let mut p = config.build()?;
    Ok(p.run(trace.iter().map(TraceLine::to_input)))
}

/// One JSON message per line.
pub fn event_log_string(messages: &[Message]) -> String {
    let mut s = String::new();
    for m in messages {
        s.push_str(&m.to_line());
        s.push('\n');
    }
    s
}
