//! Ratio traces: line-delimited JSON, one sample or one client control per
//! line.
//!
//! ```text
//! {"control":{"type":"start_calibration"}}
//! {"t_ms":0,"h":0.56,"v":0.51}
//! {"t_ms":33,"h":0.0,"v":0.0,"valid":false,"blink":true}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use gave_core::pipeline::Input;
use gave_core::protocol::Control;
use gave_core::ratio::{GazeSample, Observation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace line {line}: timestamp {t_ms} precedes {previous}")]
    NonMonotonic { line: usize, t_ms: u64, previous: u64 },
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Final binocular ratios of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSample {
    pub t_ms: u64,
    pub h: f64,
    pub v: f64,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub valid: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub blink: bool,
}

impl TraceSample {
    pub fn observation(&self) -> Observation {
        let sample = if self.valid {
            GazeSample::new(self.t_ms, self.h, self.v)
        } else {
            GazeSample::invalid(self.t_ms)
        };
        Observation::new(sample, self.blink)
    }
}

impl From<&Observation> for TraceSample {
    fn from(o: &Observation) -> Self {
        Self {
            t_ms: o.t_ms(),
            h: o.sample.h,
            v: o.sample.v,
            valid: o.sample.valid,
            blink: o.blink,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceLine {
    Sample(TraceSample),
    Control(Control),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlLine {
    control: Control,
}

impl TraceLine {
    pub fn to_input(&self) -> Input {
        match self {
            TraceLine::Sample(s) => Input::Observation(s.observation()),
            TraceLine::Control(c) => Input::Control(c.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            TraceLine::Sample(s) => serde_json::to_string(s),
            TraceLine::Control(c) => serde_json::to_string(&ControlLine { control: c.clone() }),
        }
        .expect("trace lines serialize")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if value.get("control").is_some() {
            serde_json::from_value::<ControlLine>(value)
                .map(|c| TraceLine::Control(c.control))
                .map_err(|e| e.to_string())
        } else {
            serde_json::from_value(value)
                .map(TraceLine::Sample)
                .map_err(|e| e.to_string())
        }
    }

    pub fn t_ms(&self) -> Option<u64> {
        match self {
            TraceLine::Sample(s) => Some(s.t_ms),
            TraceLine::Control(_) => None,
        }
    }
}

/// Parses a whole trace. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceLine>, TraceError> {
    let mut out = Vec::new();
    let mut previous: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = TraceLine::parse(&line).map_err(|message| TraceError::Parse { line: i + 1, message })?;
        if let Some(t_ms) = parsed.t_ms() {
            if let Some(p) = previous.filter(|&p| t_ms < p) {
                return Err(TraceError::NonMonotonic {
                    line: i + 1,
                    t_ms,
                    previous: p,
                });
            }
            previous = Some(t_ms);
        }
        out.push(parsed);
    }
    Ok(out)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceLine>, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}

pub fn write_trace<W: Write>(mut writer: W, lines: &[TraceLine]) -> std::io::Result<()> {
    for l in lines {
        writeln!(writer, "{}", l.to_json())?;
    }
    writer.flush()
}

pub fn trace_to_string(lines: &[TraceLine]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, lines).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}
