//! Calibration, classification, dwell and menu wired into one deterministic
//! state machine over timestamped observations and client controls.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationProfile, CalibrationSession, CalibrationTargetSpec, TargetState};
use crate::dwell::{DwellConfig, DwellEvent, DwellEventKind, DwellSelector};
use crate::menu::{Catalog, MenuAction, MenuEngine, Outcome};
use crate::protocol::{Control, Event, Message};
use crate::ratio::{Observation, RatioBounds};
use crate::zone::{classify, map_to_screen, CentralArea, ScreenGeometry};

/// Sample-rate floor below which `degraded` is raised.
pub const DEFAULT_MIN_RATE_HZ: f64 = 15.0;
/// Number of most recent timestamps the rate is measured over.
const RATE_WINDOW: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dwell: DwellConfig,
    pub area: CentralArea,
    pub screen: ScreenGeometry,
    pub calibration: CalibrationTargetSpec,
    pub bounds: RatioBounds,
    /// Emit a `gaze` message per observation.
    pub emit_gaze: bool,
    pub min_rate_hz: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dwell: DwellConfig::default(),
            area: CentralArea::default(),
            screen: ScreenGeometry::default(),
            calibration: CalibrationTargetSpec::default(),
            bounds: RatioBounds::default(),
            emit_gaze: true,
            min_rate_hz: DEFAULT_MIN_RATE_HZ,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.dwell.validate().map_err(|e| e.to_string())?;
        self.area.validate()?;
        self.screen.validate()?;
        self.bounds.validate()?;
        self.calibration
            .validate(self.screen.width_px, self.screen.height_px)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Observation(Observation),
    Control(Control),
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    correct: usize,
    false_count: usize,
    missed: usize,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    catalog: Catalog,
    profile: Option<CalibrationProfile>,
    calibrating: Option<CalibrationSession>,
    dwell: DwellSelector,
    menu: Option<MenuEngine>,
    pending_targets: Option<Vec<String>>,
    tally: Tally,
    last_t: Option<u64>,
    tracking: bool,
    degraded: bool,
    recent: VecDeque<u64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, catalog: Catalog) -> Result<Self, String> {
        cfg.validate()?;
        Ok(Self {
            dwell: DwellSelector::new(cfg.dwell),
            cfg,
            catalog,
            profile: None,
            calibrating: None,
            menu: None,
            pending_targets: None,
            tally: Tally::default(),
            last_t: None,
            tracking: true,
            degraded: false,
            recent: VecDeque::with_capacity(RATE_WINDOW),
        })
    }

    /// Skips calibration: the menu opens at the next observation.
    pub fn with_profile(mut self, profile: CalibrationProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn profile(&self) -> Option<&CalibrationProfile> {
        self.profile.as_ref()
    }

    pub fn menu(&self) -> Option<&MenuEngine> {
        self.menu.as_ref()
    }

    pub fn is_calibrating(&self) -> bool {
        self.calibrating.is_some()
    }

    pub fn feed(&mut self, input: Input) -> Vec<Message> {
        match input {
            Input::Observation(o) => self.observe(o),
            Input::Control(c) => self
                .control(c)
                .unwrap_or_else(|e| vec![self.stamp(Event::Error { message: e })]),
        }
    }

    pub fn run(&mut self, inputs: impl IntoIterator<Item = Input>) -> Vec<Message> {
        inputs.into_iter().flat_map(|i| self.feed(i)).collect()
    }

    fn stamp(&self, event: Event) -> Message {
        Message {
            t_ms: self.last_t,
            event,
        }
    }

    // ── Controls ────────────────────────────────────────────

    /// Applies a control. On error the pipeline is left untouched.
    pub fn control(&mut self, c: Control) -> Result<Vec<Message>, String> {
        match c {
            Control::StartCalibration {} => {
                let mut out = Vec::new();
                if let Some(t) = self.last_t {
                    out.extend(self.dwell.reset(t).into_iter().map(dwell_message));
                }
                self.profile = None;
                self.menu = None;
                self.calibrating = Some(CalibrationSession::new(self.cfg.calibration, self.cfg.bounds));
                let spec = self.cfg.calibration;
                out.push(self.stamp(Event::CalibrationStarted));
                out.push(self.stamp(Event::CalibrationPoint {
                    x: spec.screen_x,
                    y: spec.screen_y,
                    state: TargetState::Red,
                }));
                Ok(out)
            }
            Control::SetCondition { dwell_ms, area } => {
                let area = match area {
                    Some(spec) => spec.resolve()?,
                    None => self.cfg.area,
                };
                let dwell = match dwell_ms {
                    Some(ms) => {
                        let d = DwellConfig {
                            threshold_ms: ms,
                            ..self.cfg.dwell
                        };
                        d.validate().map_err(|e| e.to_string())?;
                        d
                    }
                    None => self.cfg.dwell,
                };
                let mut out = Vec::new();
                if let Some(t) = self.last_t {
                    out.extend(self.dwell.reset(t).into_iter().map(dwell_message));
                }
                self.cfg.area = area;
                self.cfg.dwell = dwell;
                self.dwell.set_config(dwell);
                out.push(self.stamp(Event::Condition {
                    dwell_ms: dwell.threshold_ms,
                    area,
                }));
                Ok(out)
            }
            Control::StartExperiment { targets } => {
                if targets.is_empty() {
                    return Err("start_experiment needs at least one target".into());
                }
                if let Some(bad) = targets.iter().find(|t| self.catalog.locate(t).is_none()) {
                    return Err(format!("unknown target item {bad:?}"));
                }
                match (&self.menu, self.last_t) {
                    (Some(_), Some(t)) => Ok(self.begin_experiment(targets, t)),
                    _ => {
                        self.pending_targets = Some(targets);
                        Ok(Vec::new())
                    }
                }
            }
            Control::Stop {} => Ok(Vec::new()),
        }
    }

    fn begin_experiment(&mut self, targets: Vec<String>, t: u64) -> Vec<Message> {
        let mut out: Vec<_> = self.dwell.reset(t).into_iter().map(dwell_message).collect();
        let menu = self.menu.as_mut().expect("menu running");
        menu.start_experiment(targets.clone(), t).expect("targets validated");
        self.tally = Tally::default();
        out.push(Message::at(t, Event::ExperimentStarted { targets }));
        out.push(Message::at(t, Event::Stage { layout: menu.layout() }));
        out
    }

    // ── Observations ────────────────────────────────────────

    pub fn observe(&mut self, obs: Observation) -> Vec<Message> {
        let t = obs.t_ms();
        if let Some(prev) = self.last_t {
            if t < prev {
                return vec![Message::at(
                    prev,
                    Event::Error {
                        message: format!("dropped observation at {t} ms: precedes {prev} ms"),
                    },
                )];
            }
        }
        self.last_t = Some(t);
        let mut head = Vec::new();
        let mut out = Vec::new();

        // sample rate
        if self.recent.len() == RATE_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(t);
        if self.recent.len() == RATE_WINDOW {
            let span = t - self.recent[0];
            let rate = if span == 0 {
                f64::INFINITY
            } else {
                (RATE_WINDOW - 1) as f64 * 1000.0 / span as f64
            };
            if rate < self.cfg.min_rate_hz {
                if !self.degraded {
                    head.push(Message::at(t, Event::Degraded { rate_hz: rate }));
                }
                self.degraded = true;
            } else {
                self.degraded = false;
            }
        }

        if obs.sample.valid {
            self.tracking = true;
        } else if self.tracking {
            self.tracking = false;
            head.push(Message::at(t, Event::TrackingLost));
        }

        if let Some(session) = self.calibrating.as_mut() {
            if let Some(result) = session.push(obs) {
                self.calibrating = None;
                let spec = self.cfg.calibration;
                match result {
                    Ok(p) => {
                        out.push(Message::at(
                            t,
                            Event::CalibrationPoint {
                                x: spec.screen_x,
                                y: spec.screen_y,
                                state: TargetState::Green,
                            },
                        ));
                        out.push(Message::at(
                            t,
                            Event::CalibrationDone {
                                h_c: p.h_c,
                                v_c: p.v_c,
                                sample_count: p.sample_count,
                            },
                        ));
                        self.profile = Some(p);
                    }
                    Err(e) => out.push(Message::at(t, Event::CalibrationFailed { reason: e.to_string() })),
                }
            }
        }

        let mut zone = None;
        let mut screen = None;
        if let Some(profile) = self.profile {
            if self.menu.is_none() {
                let menu = MenuEngine::new(self.catalog.clone(), t);
                out.push(Message::at(t, Event::Stage { layout: menu.layout() }));
                self.menu = Some(menu);
                if let Some(targets) = self.pending_targets.take() {
                    out.extend(self.begin_experiment(targets, t));
                }
            }
            if obs.usable() {
                zone = classify(&obs.sample, &profile, &self.cfg.area);
                let (x, y) = map_to_screen(&obs.sample, &profile, &self.cfg.screen);
                screen = Some([x, y]);
            }
            self.drive_menu(zone, t, &mut out);
        }

        let mut msgs = Vec::with_capacity(head.len() + out.len() + 1);
        if self.cfg.emit_gaze {
            msgs.push(Message::at(
                t,
                Event::Gaze {
                    h: obs.sample.h,
                    v: obs.sample.v,
                    valid: obs.sample.valid,
                    blink: obs.blink,
                    zone,
                    screen,
                },
            ));
        }
        msgs.extend(head);
        msgs.extend(out);
        msgs
    }

    fn drive_menu(&mut self, zone: Option<crate::zone::Zone>, t: u64, out: &mut Vec<Message>) {
        let timed_out = self.menu.as_mut().expect("menu running").tick(t);
        if !timed_out.is_empty() {
            out.extend(self.dwell.reset(t).into_iter().map(dwell_message));
            self.menu_messages(timed_out, t, out);
        }
        let events = self.dwell.step(zone, t).expect("timestamps checked above");
        for e in events {
            let confirmed = match e.kind {
                DwellEventKind::FocusConfirmed { direction } => Some(direction),
                _ => None,
            };
            out.push(dwell_message_with(e, self.cfg.dwell.threshold_ms));
            if let Some(d) = confirmed {
                let actions = self.menu.as_mut().expect("menu running").advance(d, t);
                self.dwell.reset(t);
                self.menu_messages(actions, t, out);
            }
        }
    }

    fn menu_messages(&mut self, actions: Vec<MenuAction>, t: u64, out: &mut Vec<Message>) {
        if actions.is_empty() {
            return;
        }
        for a in actions {
            let event = match a {
                MenuAction::ClusterSelected { direction } => Event::ClusterSelected { direction },
                MenuAction::ItemSelected { item_id } => Event::Selected { item_id },
                MenuAction::Back => Event::Back,
                MenuAction::TimedOut => Event::TimedOut,
                MenuAction::TrialEnded {
                    target,
                    outcome,
                    completion_ms,
                } => {
                    match outcome {
                        Outcome::Correct => self.tally.correct += 1,
                        Outcome::False => self.tally.false_count += 1,
                        Outcome::Missed => self.tally.missed += 1,
                    }
                    Event::Trial {
                        target,
                        outcome,
                        completion_ms,
                    }
                }
                MenuAction::ExperimentFinished => {
                    let t = self.tally;
                    Event::ExperimentDone {
                        trials: t.correct + t.false_count + t.missed,
                        correct: t.correct,
                        false_count: t.false_count,
                        missed: t.missed,
                    }
                }
            };
            out.push(Message::at(t, event));
        }
        let layout = self.menu.as_ref().expect("menu running").layout();
        out.push(Message::at(t, Event::Stage { layout }));
    }
}

fn dwell_message(e: DwellEvent) -> Message {
    dwell_message_with(e, 0)
}

fn dwell_message_with(e: DwellEvent, threshold_ms: u64) -> Message {
    let event = match e.kind {
        DwellEventKind::FocusStarted { direction } => Event::Focus {
            direction,
            elapsed_ms: 0,
            threshold_ms,
        },
        DwellEventKind::FocusProgress { direction, elapsed_ms } => Event::Focus {
            direction,
            elapsed_ms,
            threshold_ms,
        },
        DwellEventKind::FocusConfirmed { direction } => Event::Confirmed { direction },
        DwellEventKind::FocusLost { direction } => Event::FocusLost { direction },
    };
    Message::at(e.t_ms, event)
}

/// Menu actions implied by a message sequence, in order.
pub fn actions_in(messages: &[Message]) -> Vec<MenuAction> {
    messages
        .iter()
        .filter_map(|m| match &m.event {
            Event::ClusterSelected { direction } => Some(MenuAction::ClusterSelected { direction: *direction }),
            Event::Selected { item_id } => Some(MenuAction::ItemSelected {
                item_id: item_id.clone(),
            }),
            Event::Back => Some(MenuAction::Back),
            Event::TimedOut => Some(MenuAction::TimedOut),
            Event::Trial {
                target,
                outcome,
                completion_ms,
            } => Some(MenuAction::TrialEnded {
                target: target.clone(),
                outcome: *outcome,
                completion_ms: *completion_ms,
            }),
            Event::ExperimentDone { .. } => Some(MenuAction::ExperimentFinished),
            _ => None,
        })
        .collect()
}
