//! Real-time gaze event service.
//!
//! Three workers connected by bounded queues: capture (frames or recorded
//! samples), pipeline (the single owner of the estimator and the
//! calibration/dwell/menu state machines) and broadcast (fans serialized
//! events out to every connected client). Clients speak line-delimited
//! JSON over plain TCP or over a WebSocket on the same port.

pub mod config;
pub mod log;
mod net;
mod service;
pub mod source;

use thiserror::Error;

pub use config::{LandmarkSpec, SessionConfig, SourceSpec, DEFAULT_PORT};
pub use log::{SessionLog, SessionLogWriter};
pub use service::{RunningService, Service, StopHandle};

/// Environment variable holding the default listening port.
pub const PORT_ENV: &str = "GAVE_PORT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("source unavailable: {0}")]
    Source(String),
    #[error(transparent)]
    Trace(#[from] gave_sim::TraceError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("session log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}
