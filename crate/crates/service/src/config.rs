//! Resolved configuration of one service session.

use std::path::PathBuf;

use gave_core::estimator::EstimatorConfig;
use gave_sim::ReplayConfig;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const DEFAULT_PORT: u16 = 7878;

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Raw 8-bit grayscale frames of `width * height` bytes read from the
    /// standard output of `command` (run through `sh -c`), stamped with the
    /// session clock on arrival.
    Camera { command: String, width: u32, height: u32 },
    /// A frame corpus directory (PGM files plus `index.txt`).
    FrameDir { dir: PathBuf },
    /// A recorded ratio trace.
    RatioTrace { path: PathBuf },
}

/// Landmark provider for frame sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LandmarkSpec {
    /// Eye-blob locator for synthetic renders.
    Template,
    /// Recorded landmarks, one record per frame.
    Trace { path: PathBuf },
    /// External model speaking the stdio landmark protocol.
    Process { command: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub source: SourceSpec,
    pub landmarks: LandmarkSpec,
    pub replay: ReplayConfig,
    pub estimator: EstimatorConfig,
    pub bind: String,
    pub port: u16,
    pub log_path: Option<PathBuf>,
    /// Hold the source until this many clients are connected.
    pub wait_clients: usize,
    /// Shut down once the source is exhausted.
    pub exit_on_end: bool,
    /// Pace file sources by their timestamps.
    pub realtime: bool,
    /// Directory receiving per-frame segmentation snapshots.
    pub debug_dump: Option<PathBuf>,
}

impl SessionConfig {
    pub fn new(source: SourceSpec) -> Self {
        Self {
            source,
            landmarks: LandmarkSpec::Template,
            replay: ReplayConfig::default(),
            estimator: EstimatorConfig::default(),
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            log_path: None,
            wait_clients: 0,
            exit_on_end: false,
            realtime: false,
            debug_dump: None,
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let must_exist = |p: &PathBuf, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(ServiceError::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        match &self.source {
            SourceSpec::Camera { width, height, command } => {
                if *width == 0 || *height == 0 {
                    return Err(ServiceError::Config("camera frame size must be positive".into()));
                }
                if command.trim().is_empty() {
                    return Err(ServiceError::Config("camera command is empty".into()));
                }
            }
            SourceSpec::FrameDir { dir } => must_exist(dir, "frame directory")?,
            SourceSpec::RatioTrace { path } => must_exist(path, "ratio trace")?,
        }
        if let LandmarkSpec::Trace { path } = &self.landmarks {
            must_exist(path, "landmark trace")?;
        }
        if let Some(dir) = self.log_path.as_ref().and_then(|p| p.parent()) {
            if !dir.as_os_str().is_empty() {
                must_exist(&dir.to_path_buf(), "log directory")?;
            }
        }
        if let Some(dir) = &self.debug_dump {
            must_exist(dir, "debug dump directory")?;
        }
        self.replay.pipeline.validate().map_err(ServiceError::Config)?;
        self.estimator
            .segmentation
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(())
    }
}
