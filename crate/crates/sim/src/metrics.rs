//! Per-condition trial metrics.

use gave_core::menu::Outcome;
use gave_core::zone::AreaPreset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no trials to summarise")]
    Empty,
}

/// One cell of the experiment grid. Viewing distance stands in for
/// estimation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub distance_cm: u32,
    pub dwell_ms: u64,
    pub area: AreaPreset,
}

impl Condition {
    pub const DISTANCES_CM: [u32; 3] = [45, 55, 65];
    pub const DWELLS_MS: [u64; 4] = [500, 800, 1000, 1200];
    pub const AREAS: [AreaPreset; 3] = [AreaPreset::Small, AreaPreset::Medium, AreaPreset::Large];

    /// The 36 conditions, distance outermost, then dwell, then area.
    pub fn full_grid() -> Vec<Condition> {
        let mut v = Vec::with_capacity(36);
        for distance_cm in Self::DISTANCES_CM {
            for dwell_ms in Self::DWELLS_MS {
                for area in Self::AREAS {
                    v.push(Condition {
                        distance_cm,
                        dwell_ms,
                        area,
                    });
                }
            }
        }
        v
    }

    /// Ratio noise standard deviation modelling this viewing distance:
    /// 45 cm → 0.05, 55 cm → 0.08, 65 cm → 0.12, linear in between and
    /// clamped outside.
    pub fn noise_sigma(&self) -> f64 {
        noise_for_distance(self.distance_cm)
    }
}

pub fn noise_for_distance(distance_cm: u32) -> f64 {
    const TABLE: [(f64, f64); 3] = [(45.0, 0.05), (55.0, 0.08), (65.0, 0.12)];
    let d = distance_cm as f64;
    if d <= TABLE[0].0 {
        return TABLE[0].1;
    }
    for w in TABLE.windows(2) {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        if d <= d1 {
            return s0 + (s1 - s0) * (d - d0) / (d1 - d0);
        }
    }
    TABLE[2].1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub target: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_ms: Option<u64>,
    pub condition: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Over trials that ended in a selection; `None` when there were none.
    pub mean_time_ms: Option<f64>,
    /// Sample standard deviation; `None` below two selections.
    pub sd_time_ms: Option<f64>,
    pub error_rate: f64,
    pub false_rate: f64,
    pub missed_rate: f64,
    pub n_trials: usize,
    pub correct: usize,
    pub false_count: usize,
    pub missed: usize,
}

pub fn compute_metrics(records: &[TrialRecord]) -> Result<Metrics, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len();
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let (correct, false_count, missed) = (count(Outcome::Correct), count(Outcome::False), count(Outcome::Missed));
    let times: Vec<f64> = records
        .iter()
        .filter_map(|r| r.completion_ms)
        .map(|t| t as f64)
        .collect();
    let mean = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
    let sd = match (mean, times.len()) {
        (Some(m), k) if k >= 2 => Some((times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()),
        _ => None,
    };
    Ok(Metrics {
        mean_time_ms: mean,
        sd_time_ms: sd,
        error_rate: (false_count + missed) as f64 / n as f64,
        false_rate: false_count as f64 / n as f64,
        missed_rate: missed as f64 / n as f64,
        n_trials: n,
        correct,
        false_count,
        missed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(outcome: Outcome, t: Option<u64>) -> TrialRecord {
        TrialRecord {
            target: "pizza".into(),
            outcome,
            completion_ms: t,
            condition: Condition {
                distance_cm: 45,
                dwell_ms: 1000,
                area: AreaPreset::Medium,
            },
        }
    }

    #[test]
    fn four_trial_example() {
        let m = compute_metrics(&[
            rec(Outcome::Correct, Some(3000)),
            rec(Outcome::Correct, Some(5000)),
            rec(Outcome::False, None),
            rec(Outcome::Missed, None),
        ])
        .unwrap();
        assert_eq!((m.error_rate, m.false_rate, m.missed_rate), (0.5, 0.25, 0.25));
        assert_eq!(m.mean_time_ms, Some(4000.0));
        // deviations of ±1000 over n - 1 = 1
        assert_eq!(m.sd_time_ms, Some(2_000_000f64.sqrt()));
    }

    #[test]
    fn all_correct_has_no_errors() {
        let m = compute_metrics(&[rec(Outcome::Correct, Some(1)), rec(Outcome::Correct, Some(2))]).unwrap();
        assert_eq!(m.error_rate, 0.0);
        assert_eq!(compute_metrics(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn grid_shape_and_noise_presets() {
        let g = Condition::full_grid();
        assert_eq!(g.len(), 36);
        assert_eq!(
            g[0],
            Condition {
                distance_cm: 45,
                dwell_ms: 500,
                area: AreaPreset::Small
            }
        );
        assert_eq!(noise_for_distance(45), 0.05);
        assert_eq!(noise_for_distance(55), 0.08);
        assert_eq!(noise_for_distance(65), 0.12);
        assert_eq!(noise_for_distance(80), 0.12);
    }
}
