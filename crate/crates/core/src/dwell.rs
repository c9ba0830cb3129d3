//! Dwell-time selection over the zone stream.
//!
//! A directional zone starts a focus episode; holding it for `threshold_ms`
//! confirms it. Episodes follow the grammar `Started Progress* (Confirmed |
//! Lost)`. After a confirmation the selector holds until the gaze leaves
//! that direction or [`DwellSelector::reset`] is called, so one fixation
//! confirms at most once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone::{Direction, Zone};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DwellError {
    #[error("timestamp {t_ms} precedes previous sample at {previous}")]
    NonMonotonic { previous: u64, t_ms: u64 },
    #[error("invalid dwell configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwellConfig {
    pub threshold_ms: u64,
    /// Longest tolerated run of no-zone samples inside an episode; 0 means
    /// any dropout ends it.
    pub grace_ms: u64,
    pub feedback_period_ms: u64,
}

impl Default for DwellConfig {
    fn default() -> Self {
        Self {
            threshold_ms: 1000,
            grace_ms: 0,
            feedback_period_ms: 100,
        }
    }
}

impl DwellConfig {
    pub fn with_threshold(threshold_ms: u64) -> Self {
        Self {
            threshold_ms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DwellError> {
        if self.threshold_ms == 0 {
            return Err(DwellError::InvalidConfig("threshold_ms must be positive".into()));
        }
        if self.feedback_period_ms == 0 {
            return Err(DwellError::InvalidConfig("feedback_period_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DwellEventKind {
    FocusStarted { direction: Direction },
    FocusProgress { direction: Direction, elapsed_ms: u64 },
    FocusConfirmed { direction: Direction },
    FocusLost { direction: Direction },
}

impl DwellEventKind {
    pub fn direction(&self) -> Direction {
        match *self {
            DwellEventKind::FocusStarted { direction }
            | DwellEventKind::FocusProgress { direction, .. }
            | DwellEventKind::FocusConfirmed { direction }
            | DwellEventKind::FocusLost { direction } => direction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub kind: DwellEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwellPhase {
    Idle,
    Focusing {
        direction: Direction,
        since_ms: u64,
        last_seen_ms: u64,
        last_progress_ms: u64,
    },
    /// Confirmed and still looking the same way.
    Holding(Direction),
}

#[derive(Debug, Clone)]
pub struct DwellSelector {
    cfg: DwellConfig,
    phase: DwellPhase,
    last_t: Option<u64>,
}

impl DwellSelector {
    pub fn new(cfg: DwellConfig) -> Self {
        Self {
            cfg,
            phase: DwellPhase::Idle,
            last_t: None,
        }
    }

    pub fn config(&self) -> &DwellConfig {
        &self.cfg
    }

    /// Takes effect from the next sample; an ongoing episode keeps its start.
    pub fn set_config(&mut self, cfg: DwellConfig) {
        self.cfg = cfg;
    }

    pub fn phase(&self) -> DwellPhase {
        self.phase
    }

    /// Advances by one sample. `None` is a frame without a zone (tracking
    /// loss, blink).
    pub fn step(&mut self, zone: Option<Zone>, t_ms: u64) -> Result<Vec<DwellEvent>, DwellError> {
        if let Some(previous) = self.last_t {
            if t_ms < previous {
                return Err(DwellError::NonMonotonic { previous, t_ms });
            }
        }
        self.last_t = Some(t_ms);
        let ev = |kind| DwellEvent { t_ms, kind };
        let dir = zone.and_then(Zone::direction);
        let mut out = Vec::new();

        match self.phase {
            DwellPhase::Holding(d) => {
                if zone.is_none() || dir == Some(d) {
                    return Ok(out);
                }
                self.phase = DwellPhase::Idle;
            }
            DwellPhase::Focusing {
                direction,
                since_ms,
                last_seen_ms,
                last_progress_ms,
            } => {
                if dir == Some(direction) {
                    let elapsed = t_ms - since_ms;
                    if elapsed >= self.cfg.threshold_ms {
                        out.push(ev(DwellEventKind::FocusConfirmed { direction }));
                        self.phase = DwellPhase::Holding(direction);
                    } else {
                        let mut last_progress_ms = last_progress_ms;
                        if t_ms - last_progress_ms >= self.cfg.feedback_period_ms {
                            out.push(ev(DwellEventKind::FocusProgress {
                                direction,
                                elapsed_ms: elapsed,
                            }));
                            last_progress_ms = t_ms;
                        }
                        self.phase = DwellPhase::Focusing {
                            direction,
                            since_ms,
                            last_seen_ms: t_ms,
                            last_progress_ms,
                        };
                    }
                    return Ok(out);
                }
                if zone.is_none() && self.cfg.grace_ms > 0 && t_ms - last_seen_ms <= self.cfg.grace_ms {
                    return Ok(out);
                }
                out.push(ev(DwellEventKind::FocusLost { direction }));
                self.phase = DwellPhase::Idle;
            }
            DwellPhase::Idle => {}
        }

        if let Some(direction) = dir {
            out.push(ev(DwellEventKind::FocusStarted { direction }));
            self.phase = DwellPhase::Focusing {
                direction,
                since_ms: t_ms,
                last_seen_ms: t_ms,
                last_progress_ms: t_ms,
            };
        }
        Ok(out)
    }

    /// Back to idle; an open episode ends with `FocusLost` at `t_ms`.
    pub fn reset(&mut self, t_ms: u64) -> Vec<DwellEvent> {
        let out = match self.phase {
            DwellPhase::Focusing { direction, .. } => vec![DwellEvent {
                t_ms,
                kind: DwellEventKind::FocusLost { direction },
            }],
            _ => Vec::new(),
        };
        self.phase = DwellPhase::Idle;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DwellEventKind::*;

    const L: Direction = Direction::Left;

    fn run(sel: &mut DwellSelector, stream: impl IntoIterator<Item = (u64, Option<Zone>)>) -> Vec<DwellEvent> {
        stream.into_iter().flat_map(|(t, z)| sel.step(z, t).unwrap()).collect()
    }

    fn ts(until: u64) -> impl Iterator<Item = u64> {
        (0..)
            .map(|k: u64| (k * 1000 + 15) / 30)
            .take_while(move |&t| t <= until)
    }

    #[test]
    fn steady_focus_confirms_at_threshold() {
        let mut s = DwellSelector::new(DwellConfig::default());
        let ev = run(&mut s, ts(1050).map(|t| (t, Some(Zone::Left))));
        assert_eq!(
            ev[0],
            DwellEvent {
                t_ms: 0,
                kind: FocusStarted { direction: L }
            }
        );
        let confirmed: Vec<_> = ev.iter().filter(|e| matches!(e.kind, FocusConfirmed { .. })).collect();
        assert_eq!(confirmed.len(), 1);
        assert_eq!(confirmed[0].t_ms, 1000);
        assert!(ev.iter().any(|e| matches!(e.kind, FocusProgress { .. })));
        assert_eq!(s.phase(), DwellPhase::Holding(L));
    }

    #[test]
    fn interruption_loses_focus() {
        let mut s = DwellSelector::new(DwellConfig::default());
        let stream = ts(1200).map(|t| (t, Some(if t < 600 { Zone::Left } else { Zone::Center })));
        let ev: Vec<_> = run(&mut s, stream)
            .into_iter()
            .filter(|e| !matches!(e.kind, FocusProgress { .. }))
            .collect();
        assert_eq!(
            ev,
            vec![
                DwellEvent {
                    t_ms: 0,
                    kind: FocusStarted { direction: L }
                },
                DwellEvent {
                    t_ms: 600,
                    kind: FocusLost { direction: L }
                },
            ]
        );
    }

    #[test]
    fn dropout_within_grace_is_tolerated() {
        let cfg = DwellConfig {
            grace_ms: 50,
            ..Default::default()
        };
        let mut s = DwellSelector::new(cfg);
        let stream = ts(1100).map(|t| (t, if t == 433 { None } else { Some(Zone::Left) }));
        let ev = run(&mut s, stream);
        assert!(!ev.iter().any(|e| matches!(e.kind, FocusLost { .. })));
        let c = ev.iter().find(|e| matches!(e.kind, FocusConfirmed { .. })).unwrap();
        assert_eq!(c.t_ms, 1000);
    }

    #[test]
    fn dropout_without_grace_breaks_focus() {
        let mut s = DwellSelector::new(DwellConfig::default());
        let stream = ts(1100).map(|t| (t, if t == 433 { None } else { Some(Zone::Left) }));
        let ev = run(&mut s, stream);
        assert!(ev.contains(&DwellEvent {
            t_ms: 433,
            kind: FocusLost { direction: L }
        }));
        assert!(ev.contains(&DwellEvent {
            t_ms: 467,
            kind: FocusStarted { direction: L }
        }));
    }

    #[test]
    fn center_never_emits() {
        let mut s = DwellSelector::new(DwellConfig::default());
        assert!(run(&mut s, ts(5000).map(|t| (t, Some(Zone::Center)))).is_empty());
    }

    #[test]
    fn direction_switch_restarts() {
        let mut s = DwellSelector::new(DwellConfig::default());
        s.step(Some(Zone::Left), 0).unwrap();
        let ev = s.step(Some(Zone::Up), 33).unwrap();
        assert_eq!(
            ev.iter().map(|e| e.kind).collect::<Vec<_>>(),
            vec![
                FocusLost { direction: L },
                FocusStarted {
                    direction: Direction::Up
                }
            ]
        );
    }

    #[test]
    fn holding_requires_leaving() {
        let mut s = DwellSelector::new(DwellConfig::with_threshold(100));
        run(&mut s, (0..=4).map(|k| (k * 33, Some(Zone::Left))));
        assert_eq!(s.phase(), DwellPhase::Holding(L));
        assert!(run(&mut s, (5..40).map(|k| (k * 33, Some(Zone::Left)))).is_empty());
        assert!(run(&mut s, [(1400, Some(Zone::Center))]).is_empty());
        assert_eq!(s.phase(), DwellPhase::Idle);
    }

    #[test]
    fn reset_semantics() {
        let mut s = DwellSelector::new(DwellConfig::default());
        assert!(s.reset(0).is_empty());
        s.step(Some(Zone::Left), 0).unwrap();
        assert_eq!(
            s.reset(10),
            vec![DwellEvent {
                t_ms: 10,
                kind: FocusLost { direction: L }
            }]
        );
        assert!(s.reset(20).is_empty());
        assert_eq!(s.phase(), DwellPhase::Idle);
    }

    #[test]
    fn rejects_time_going_backwards() {
        let mut s = DwellSelector::new(DwellConfig::default());
        s.step(Some(Zone::Center), 100).unwrap();
        assert_eq!(
            s.step(Some(Zone::Center), 99),
            Err(DwellError::NonMonotonic {
                previous: 100,
                t_ms: 99
            })
        );
    }
}
