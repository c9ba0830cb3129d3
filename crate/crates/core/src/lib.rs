//! Core of the GaVe gaze-vending interface.
//!
//! The pipeline turns grayscale webcam frames into discrete gaze input:
//!
//! 1. [`vision`] finds the 68 facial landmarks (through a pluggable provider)
//!    and crops both eyes.
//! 2. [`segmentation`] isolates the iris and takes its centroid from image
//!    moments.
//! 3. [`ratio`] turns pupil centers into horizontal/vertical ratios,
//!    renormalized against population bounds and averaged over both eyes.
//! 4. [`calibration`] derives the user's personal center ratios from a short
//!    fixation on a single screen point.
//! 5. [`zone`] maps calibrated ratios to Center/Left/Right/Up/Down.
//! 6. [`dwell`] turns the zone stream into focus feedback and confirmations.
//! 7. [`menu`] runs the two-stage cluster/item selection.
//!
//! [`pipeline`] wires steps 4–7 together into a single deterministic state
//! machine whose output is the [`protocol`] event stream, and [`estimator`]
//! covers steps 1–3 for live frames.

pub mod calibration;
pub mod dwell;
pub mod estimator;
pub mod menu;
pub mod pipeline;
pub mod protocol;
pub mod ratio;
pub mod segmentation;
pub mod vision;
pub mod zone;

pub use calibration::{CalibrationProfile, CalibrationTargetSpec};
pub use dwell::{DwellConfig, DwellEvent, DwellSelector};
pub use menu::{Catalog, MenuAction, MenuEngine};
pub use pipeline::{Input, Pipeline, PipelineConfig};
pub use protocol::{Control, Event};
pub use ratio::{GazeSample, Observation, RatioBounds};
pub use zone::{CentralArea, Direction, Zone};
