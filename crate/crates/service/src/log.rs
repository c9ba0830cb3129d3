//! Session logs: line-delimited JSON, replayable through [`gave_sim::replay`].
//!
//! ```text
//! {"header":{"version":1,"config":{...}}}
//! {"input":{"control":{"type":"start_calibration"}}}
//! {"input":{"t_ms":0,"h":0.56,"v":0.51}}
//! {"event":{"t_ms":0,"type":"gaze",...}}
//! ```
//!
//! Inputs are the samples and accepted controls in the order the pipeline
//! consumed them; events are everything it emitted.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use gave_core::protocol::{Message, PROTOCOL_VERSION};
use gave_sim::TraceLine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SessionConfig;
use crate::ServiceError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub config: SessionConfig,
}

pub struct SessionLogWriter {
    out: BufWriter<File>,
}

impl SessionLogWriter {
    pub fn create(path: &Path, config: &SessionConfig) -> Result<Self, ServiceError> {
        let file = File::create(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        let mut w = Self {
            out: BufWriter::new(file),
        };
        let header = LogHeader {
            version: PROTOCOL_VERSION,
            config: config.clone(),
        };
        w.write_value(serde_json::json!({ "header": header }))?;
        Ok(w)
    }

    fn write_value(&mut self, v: Value) -> Result<(), ServiceError> {
        serde_json::to_writer(&mut self.out, &v).map_err(|e| ServiceError::Io(e.to_string()))?;
        self.out.write_all(b"\n").map_err(|e| ServiceError::Io(e.to_string()))
    }

    pub fn input(&mut self, line: &TraceLine) -> Result<(), ServiceError> {
        let inner: Value = serde_json::from_str(&line.to_json()).expect("trace lines are JSON");
        self.write_value(serde_json::json!({ "input": inner }))
    }

    pub fn event(&mut self, m: &Message) -> Result<(), ServiceError> {
        let inner = serde_json::to_value(m).expect("messages serialize");
        self.write_value(serde_json::json!({ "event": inner }))
    }

    pub fn flush(&mut self) -> Result<(), ServiceError> {
        self.out.flush().map_err(|e| ServiceError::Io(e.to_string()))
    }
}

/// A parsed session log.
#[derive(Debug, Clone)]
pub struct SessionLog {
    pub header: LogHeader,
    pub inputs: Vec<TraceLine>,
    pub events: Vec<Message>,
}

impl SessionLog {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, ServiceError> {
        let mut header = None;
        let mut inputs = Vec::new();
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ServiceError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| ServiceError::Log {
                line: i + 1,
                message: m,
            };
            let v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let Value::Object(map) = v else {
                return Err(bad("expected an object".into()));
            };
            let (key, inner) = map.into_iter().next().ok_or_else(|| bad("empty record".into()))?;
            match key.as_str() {
                "header" => header = Some(serde_json::from_value(inner).map_err(|e| bad(e.to_string()))?),
                "input" => inputs.push(TraceLine::parse(&inner.to_string()).map_err(bad)?),
                "event" => events.push(serde_json::from_value(inner).map_err(|e| bad(e.to_string()))?),
                other => return Err(bad(format!("unknown record {other:?}"))),
            }
        }
        let header = header.ok_or(ServiceError::Log {
            line: 0,
            message: "missing header".into(),
        })?;
        Ok(Self { header, inputs, events })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let f = File::open(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        Self::read(BufReader::new(f))
    }

    /// Feeds the logged inputs back through a fresh pipeline built from the
    /// logged configuration.
    pub fn replay(&self) -> Result<Vec<Message>, ServiceError> {
        gave_sim::replay(&self.inputs, &self.header.config.replay).map_err(ServiceError::Config)
    }
}
