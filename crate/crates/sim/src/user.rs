//! A closed-loop synthetic user.
//!
//! The simulated participant watches the menu the pipeline shows, and after
//! each stage change waits `reaction_ms` looking at the middle of the
//! screen before turning to the direction the current target needs. With
//! probability `overshoot_prob` it first glances at a wrong direction for a
//! uniformly drawn duration. Gaze lands on the middle of the needed zone's
//! outer region, blurred by isotropic Gaussian noise; blinks arrive as a
//! Poisson process and blank the samples they cover.
//!
//! Randomness comes from two independent ChaCha8 generators seeded by
//! `seed`. Behaviour (overshoot decisions) is pre-drawn per trial from
//! stream 0, so runs sharing a seed make the same decisions on the same
//! trial regardless of noise or timing. Sample noise and blinks come from
//! stream `1 + noise_stream`.

use gave_core::menu::{Catalog, Stage};
use gave_core::pipeline::PipelineConfig;
use gave_core::protocol::{AreaSpec, Control, Event, Message};
use gave_core::zone::{CentralArea, Direction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Condition, TrialRecord};
use crate::replay::ReplayConfig;
use crate::trace::{TraceLine, TraceSample};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid user model: {0}")]
    InvalidModel(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("pipeline rejected the configuration: {0}")]
    Pipeline(String),
    #[error("session still running at {t_ms} ms after {trials} of {planned} trials")]
    Stalled { t_ms: u64, trials: usize, planned: usize },
}

/// Stage entries per trial with a pre-drawn overshoot decision; later
/// entries never overshoot.
const DECISIONS_PER_TRIAL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticUserModel {
    pub reaction_ms: u64,
    pub noise_sigma: f64,
    pub blink_rate_hz: f64,
    pub blink_duration_ms: u64,
    pub sample_rate_hz: f64,
    pub overshoot_prob: f64,
    pub overshoot_min_ms: u64,
    pub overshoot_max_ms: u64,
    /// Where the user's eyes rest when looking at the screen center.
    pub gaze_center: (f64, f64),
    /// Let the grid runner set `noise_sigma` from each condition's viewing
    /// distance.
    pub distance_noise: bool,
    pub seed: u64,
    pub noise_stream: u64,
}

impl Default for SyntheticUserModel {
    fn default() -> Self {
        Self {
            reaction_ms: 500,
            noise_sigma: 0.08,
            blink_rate_hz: 17.0 / 60.0,
            blink_duration_ms: 150,
            sample_rate_hz: 30.0,
            overshoot_prob: 0.2,
            overshoot_min_ms: 200,
            overshoot_max_ms: 1400,
            gaze_center: (0.56, 0.51),
            distance_noise: true,
            seed: 0,
            noise_stream: 0,
        }
    }
}

impl SyntheticUserModel {
    /// No noise, blinks or overshoots.
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            blink_rate_hz: 0.0,
            overshoot_prob: 0.0,
            distance_noise: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidModel(m.into()));
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be finite and nonnegative");
        }
        if !(self.blink_rate_hz.is_finite() && self.blink_rate_hz >= 0.0) {
            return bad("blink_rate_hz must be finite and nonnegative");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        if !(0.0..=1.0).contains(&self.overshoot_prob) {
            return bad("overshoot_prob must lie in [0, 1]");
        }
        if self.overshoot_min_ms > self.overshoot_max_ms {
            return bad("overshoot_min_ms exceeds overshoot_max_ms");
        }
        let (h, v) = self.gaze_center;
        if !((0.0..=1.0).contains(&h) && (0.0..=1.0).contains(&v)) {
            return bad("gaze_center must lie in the unit square");
        }
        Ok(())
    }

    /// Timestamp of sample `k`.
    pub fn sample_time(&self, k: u64) -> u64 {
        (k as f64 * 1000.0 / self.sample_rate_hz).round() as u64
    }
}

/// Where the user looks to select `d`: the middle of that zone's outer
/// region, seen from `center`.
pub fn aim_point(d: Direction, center: (f64, f64), area: &CentralArea) -> (f64, f64) {
    let (h_c, v_c) = center;
    let (hw, hl) = (area.w / 2.0, area.l / 2.0);
    match d {
        Direction::Left => ((h_c + hw + 1.0) / 2.0, v_c),
        Direction::Right => ((h_c - hw) / 2.0, v_c),
        Direction::Down => (h_c, (v_c + hl + 1.0) / 2.0),
        Direction::Up => (h_c, (v_c - hl) / 2.0),
    }
}

// ── Behaviour ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
struct Decision {
    overshoot: bool,
    wrong_pick: usize,
    glance_ms: u64,
}

fn draw_decisions(model: &SyntheticUserModel, trials: usize) -> Vec<[Decision; DECISIONS_PER_TRIAL]> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(0);
    (0..trials)
        .map(|_| {
            std::array::from_fn(|_| Decision {
                overshoot: rng.gen_bool(model.overshoot_prob),
                wrong_pick: rng.gen_range(0..3),
                glance_ms: rng.gen_range(model.overshoot_min_ms..=model.overshoot_max_ms),
            })
        })
        .collect()
}

/// The direction the user must confirm next to reach `target`.
fn needed_direction(stage: Stage, path: [Direction; 2]) -> Direction {
    match stage {
        Stage::Cluster => path[0],
        Stage::Item(c) if c == path[0] => path[1],
        Stage::Item(_) => Direction::Up,
    }
}

struct Blinks {
    dist: Option<Exp<f64>>,
    duration_ms: f64,
    last_start: f64,
    next_start: f64,
}

impl Blinks {
    fn new(model: &SyntheticUserModel, rng: &mut ChaCha8Rng) -> Self {
        let dist = (model.blink_rate_hz > 0.0).then(|| Exp::new(model.blink_rate_hz / 1000.0).expect("positive rate"));
        let next_start = dist.map_or(f64::INFINITY, |d| d.sample(rng));
        Self {
            dist,
            duration_ms: model.blink_duration_ms as f64,
            last_start: f64::NEG_INFINITY,
            next_start,
        }
    }

    fn covers(&mut self, t: u64, rng: &mut ChaCha8Rng) -> bool {
        let t = t as f64;
        if let Some(d) = self.dist {
            while self.next_start <= t {
                self.last_start = self.next_start;
                self.next_start += d.sample(rng);
            }
        }
        t < self.last_start + self.duration_ms
    }
}

// ── Session ─────────────────────────────────────────────────

/// A finished simulated session.
#[derive(Debug, Clone)]
pub struct Session {
    /// Everything the pipeline received, replayable with
    /// [`session_replay_config`].
    pub trace: Vec<TraceLine>,
    pub events: Vec<Message>,
    pub trials: Vec<TrialRecord>,
}

/// The configuration sessions run under; the condition itself travels in
/// the trace as a `set_condition` control.
pub fn session_replay_config(catalog: &Catalog) -> ReplayConfig {
    ReplayConfig {
        pipeline: PipelineConfig {
            emit_gaze: false,
            ..PipelineConfig::default()
        },
        catalog: catalog.clone(),
        profile: None,
    }
}

/// Runs one calibrated experiment session: the user calibrates, then works
/// through `plan` in order.
pub fn simulate_session(
    model: &SyntheticUserModel,
    plan: &[String],
    catalog: &Catalog,
    condition: Condition,
) -> Result<Session, SimError> {
    model.validate()?;
    if plan.is_empty() {
        return Err(SimError::InvalidPlan("empty target plan".into()));
    }
    let paths: Vec<[Direction; 2]> = plan
        .iter()
        .map(|id| {
            catalog
                .path_to(id)
                .ok_or_else(|| SimError::InvalidPlan(format!("unknown item {id:?}")))
        })
        .collect::<Result<_, _>>()?;

    let area = CentralArea::preset(condition.area);
    let mut pipeline = session_replay_config(catalog).build().map_err(SimError::Pipeline)?;
    let decisions = draw_decisions(model, plan.len());
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(1 + model.noise_stream);
    let noise = Normal::new(0.0, model.noise_sigma).expect("validated sigma");
    let mut blinks = Blinks::new(model, &mut rng);

    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut trials = Vec::new();
    let mut feed = |line: TraceLine, trace: &mut Vec<TraceLine>, events: &mut Vec<Message>| {
        let msgs = pipeline.feed(line.to_input());
        trace.push(line);
        events.extend(msgs.iter().cloned());
        msgs
    };

    for c in [
        Control::SetCondition {
            dwell_ms: Some(condition.dwell_ms),
            area: Some(AreaSpec::Preset(condition.area)),
        },
        Control::StartExperiment { targets: plan.to_vec() },
        Control::StartCalibration {},
    ] {
        feed(TraceLine::Control(c), &mut trace, &mut events);
    }

    // what the user currently believes about the screen
    let mut running = false;
    let mut trial = 0usize;
    let mut entry = 0usize;
    let mut stage = Stage::Cluster;
    let mut stage_entered = 0u64;
    let mut decision: Option<Decision> = None;

    let limit_ms = 10_000 + plan.len() as u64 * 120_000;
    let mut k = 0u64;
    loop {
        let t = model.sample_time(k);
        k += 1;
        if t > limit_ms {
            return Err(SimError::Stalled {
                t_ms: t,
                trials: trials.len(),
                planned: plan.len(),
            });
        }

        let sample = if blinks.covers(t, &mut rng) {
            TraceSample {
                t_ms: t,
                h: 0.0,
                v: 0.0,
                valid: false,
                blink: true,
            }
        } else {
            let looking = if running && t > stage_entered {
                let elapsed = t - stage_entered;
                let needed = needed_direction(stage, paths[trial]);
                match decision {
                    _ if elapsed < model.reaction_ms => None,
                    Some(d) if d.overshoot && elapsed < model.reaction_ms + d.glance_ms => {
                        let others: Vec<Direction> = Direction::ALL.into_iter().filter(|&x| x != needed).collect();
                        Some(others[d.wrong_pick])
                    }
                    _ => Some(needed),
                }
            } else {
                None
            };
            let (h, v) = match looking {
                Some(d) => aim_point(d, model.gaze_center, &area),
                None => model.gaze_center,
            };
            TraceSample {
                t_ms: t,
                h: (h + noise.sample(&mut rng)).clamp(0.0, 1.0),
                v: (v + noise.sample(&mut rng)).clamp(0.0, 1.0),
                valid: true,
                blink: false,
            }
        };

        let msgs = feed(TraceLine::Sample(sample), &mut trace, &mut events);
        let mut finished = false;
        let mut recalibrate = false;
        for m in &msgs {
            match &m.event {
                Event::ExperimentStarted { .. } => {
                    running = true;
                    trial = 0;
                    entry = 0;
                }
                Event::Stage { layout } if running => {
                    stage = layout.stage;
                    stage_entered = m.t_ms.unwrap_or(t);
                    decision = decisions.get(trial).and_then(|d| d.get(entry)).copied();
                    entry += 1;
                }
                Event::Trial {
                    target,
                    outcome,
                    completion_ms,
                } => {
                    trials.push(TrialRecord {
                        target: target.clone(),
                        outcome: *outcome,
                        completion_ms: *completion_ms,
                        condition,
                    });
                    trial += 1;
                    entry = 0;
                }
                Event::ExperimentDone { .. } => {
                    running = false;
                    finished = true;
                }
                Event::CalibrationFailed { .. } => recalibrate = true,
                _ => {}
            }
        }
        if finished {
            break;
        }
        if recalibrate {
            feed(
                TraceLine::Control(Control::StartCalibration {}),
                &mut trace,
                &mut events,
            );
        }
    }

    Ok(Session { trace, events, trials })
}

/// The trace of [`simulate_session`].
pub fn synth_trace(
    model: &SyntheticUserModel,
    plan: &[String],
    catalog: &Catalog,
    condition: Condition,
) -> Result<Vec<TraceLine>, SimError> {
    simulate_session(model, plan, catalog, condition).map(|s| s.trace)
}
