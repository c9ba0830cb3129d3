//! Simulation harness for the gaze pipeline: deterministic trace replay, a
//! closed-loop synthetic user, and the experiment-grid runner with its
//! metrics.

pub mod grid;
pub mod metrics;
pub mod replay;
pub mod scenarios;
pub mod trace;
pub mod user;

pub use grid::{rotation_plan, run_grid, write_csv, GridRow};
pub use metrics::{compute_metrics, Condition, Metrics, MetricsError, TrialRecord};
pub use replay::{event_log_string, replay, ReplayConfig};
pub use trace::{load_trace, read_trace, write_trace, TraceError, TraceLine, TraceSample};
pub use user::{simulate_session, synth_trace, Session, SimError, SyntheticUserModel};
