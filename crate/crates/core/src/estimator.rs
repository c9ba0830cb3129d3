//! Frame-level gaze estimation: landmarks, eye crops, pupil segmentation,
//! ratios and the blink flag for one frame.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::calibration::{is_blink, DEFAULT_EAR_THRESHOLD};
use crate::ratio::{eye_ratios, GazeSample, Observation, RatioBounds};
use crate::segmentation::{segment, SegmentationParams};
use crate::vision::{
    detect_landmarks, extract_eye_regions, EyeLandmarks, EyeRegion, Frame, LandmarkProvider, ProviderError,
    DEFAULT_EYE_MARGIN,
};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub segmentation: SegmentationParams,
    pub eye_margin: u32,
    /// Exchange the 36–41 and 42–47 landmark sets.
    pub swap_eyes: bool,
    /// Flip frames horizontally before landmark detection.
    pub mirror: bool,
    pub ear_threshold: f64,
    pub bounds: RatioBounds,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            eye_margin: DEFAULT_EYE_MARGIN,
            swap_eyes: false,
            mirror: false,
            ear_threshold: DEFAULT_EAR_THRESHOLD,
            bounds: RatioBounds::default(),
        }
    }
}

/// Turns frames into [`Observation`]s.
///
/// Binarization thresholds are chosen adaptively per frame while learning
/// and fixed with [`GazeEstimator::freeze`], normally at the end of the
/// calibration window.
pub struct GazeEstimator<P> {
    cfg: EstimatorConfig,
    provider: P,
    learned: [Vec<u8>; 2],
    frozen: Option<[u8; 2]>,
    dump_dir: Option<PathBuf>,
}

impl<P: LandmarkProvider> GazeEstimator<P> {
    pub fn new(cfg: EstimatorConfig, provider: P) -> Self {
        Self {
            cfg,
            provider,
            learned: [Vec::new(), Vec::new()],
            frozen: None,
            dump_dir: None,
        }
    }

    /// Writes the filtered crop and pupil mask of every segmented eye to
    /// `dir` as `t<ms>_<side>_{filtered,mask}.pgm`.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dump_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn thresholds(&self) -> Option<[u8; 2]> {
        self.frozen
    }

    /// Fixes each eye's threshold at the lower median of those seen since
    /// the last [`GazeEstimator::relearn`]. Eyes with no history stay
    /// adaptive, so nothing is frozen until both have one.
    pub fn freeze(&mut self) -> Option<[u8; 2]> {
        let pick = |v: &Vec<u8>| {
            let mut v = v.clone();
            v.sort_unstable();
            v.get(v.len().wrapping_sub(1) / 2).copied()
        };
        if let (Some(l), Some(r)) = (pick(&self.learned[0]), pick(&self.learned[1])) {
            self.frozen = Some([l, r]);
        }
        self.frozen
    }

    pub fn relearn(&mut self) {
        self.learned = [Vec::new(), Vec::new()];
        self.frozen = None;
    }

    pub fn estimate(&mut self, frame: &Frame) -> Result<Observation, EstimatorError> {
        let t = frame.t_ms();
        let mirrored;
        let frame = if self.cfg.mirror {
            mirrored = frame.mirrored();
            &mirrored
        } else {
            frame
        };
        let Some(landmarks) = detect_landmarks(frame, &mut self.provider)? else {
            return Ok(Observation::new(GazeSample::invalid(t), false));
        };
        let regions = match extract_eye_regions(frame, &landmarks, self.cfg.eye_margin, self.cfg.swap_eyes) {
            Ok(r) => r,
            Err(e) => {
                debug!(t_ms = t, error = %e, "eye crop failed");
                return Ok(Observation::new(GazeSample::invalid(t), false));
            }
        };
        let (left_lm, right_lm) = landmarks.eyes(self.cfg.swap_eyes);
        let blink = is_blink(&left_lm, self.cfg.ear_threshold) || is_blink(&right_lm, self.cfg.ear_threshold);
        let left = self.eye(0, &regions.0, &left_lm, t);
        let right = self.eye(1, &regions.1, &right_lm, t);
        Ok(Observation::new(
            GazeSample::from_eyes(t, left, right, &self.cfg.bounds),
            blink,
        ))
    }

    fn eye(&mut self, idx: usize, region: &EyeRegion, lm: &EyeLandmarks, t: u64) -> Option<(f64, f64)> {
        let params = match self.frozen {
            Some(th) => self.cfg.segmentation.with_fixed_threshold(th[idx]),
            None => self.cfg.segmentation,
        };
        let seg = match segment(&region.image, &params) {
            Ok(s) => s,
            Err(e) => {
                debug!(t_ms = t, side = ?region.side, error = %e, "segmentation failed");
                return None;
            }
        };
        if let Some(dir) = &self.dump_dir {
            let side = if idx == 0 { "left" } else { "right" };
            if let Err(e) = seg.dump(dir, &format!("t{t}_{side}")) {
                warn!(dir = %dir.display(), error = %e, "debug dump failed");
            }
        }
        if self.frozen.is_none() && seg.center.is_some() {
            self.learned[idx].push(seg.threshold);
        }
        let pupil = seg.center?.in_frame(region);
        eye_ratios(pupil, lm).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::synthetic::SyntheticFace;
    use crate::vision::{LandmarkRecord, TracePlayback};

    fn playback(face: &SyntheticFace, ts: &[u64]) -> TracePlayback {
        TracePlayback::new(
            ts.iter()
                .map(|&t| LandmarkRecord::from_landmarks(&face.landmarks(t)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn straight_gaze_is_near_eye_center() {
        let face = SyntheticFace::centered(320, 240);
        let mut est = GazeEstimator::new(EstimatorConfig::default(), playback(&face, &[0]));
        let o = est.estimate(&face.render(0)).unwrap();
        assert!(o.sample.valid && !o.blink);
        let h = o.sample.h_raw_left.unwrap();
        let v = o.sample.v_raw_left.unwrap();
        assert!((h - 0.5).abs() < 0.05, "h raw {h}");
        assert!((v - 0.5).abs() < 0.1, "v raw {v}");
    }

    #[test]
    fn gaze_shift_moves_ratio_and_freeze_keeps_it() {
        let face = SyntheticFace::centered(320, 240);
        let shifted = face.clone().with_gaze(8.0, 0.0);
        let mut est = GazeEstimator::new(EstimatorConfig::default(), {
            let mut lm: Vec<_> = (0..3)
                .map(|t| LandmarkRecord::from_landmarks(&face.landmarks(t)))
                .collect();
            lm.push(LandmarkRecord::from_landmarks(&shifted.landmarks(3)));
            TracePlayback::new(lm).unwrap()
        });
        let a = est.estimate(&face.render(0)).unwrap();
        est.estimate(&face.render(1)).unwrap();
        est.freeze().unwrap();
        let b = est.estimate(&face.render(2)).unwrap();
        assert_eq!(a.sample.h, b.sample.h);
        let c = est.estimate(&shifted.render(3)).unwrap();
        assert!(c.sample.h_raw_left.unwrap() > a.sample.h_raw_left.unwrap() + 0.1);
    }

    #[test]
    fn missing_face_is_invalid() {
        let face = SyntheticFace::centered(320, 240);
        let mut est = GazeEstimator::new(EstimatorConfig::default(), playback(&face, &[]));
        let o = est.estimate(&face.render(5)).unwrap();
        assert!(!o.sample.valid);
        assert_eq!(o.t_ms(), 5);
    }
}
