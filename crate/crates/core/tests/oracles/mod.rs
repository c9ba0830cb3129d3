//! Independent reference implementations used by the property and
//! acceptance tests. They are written for clarity, not speed, and share no
//! code with the library beyond its public data types.
#![allow(dead_code)]

use gave_core::dwell::{DwellConfig, DwellEvent, DwellEventKind};
use gave_core::segmentation::BinaryMask;
use gave_core::zone::{Direction, Zone};
use image::GrayImage;

// ── Moments ─────────────────────────────────────────────────

/// Arithmetic mean of the coordinates of set pixels.
pub fn coordinate_mean(mask: &BinaryMask) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.get(x, y))
        .map(|(x, y)| (x as f64, y as f64))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    Some((
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

// ── Min filters ─────────────────────────────────────────────

/// One pass of a `(2r+1)²` minimum filter; outside pixels are `false`.
pub fn naive_mask_min(mask: &BinaryMask, r: i64) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        for dy in -r..=r {
            for dx in -r..=r {
                let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                if xx < 0 || yy < 0 || xx >= w || yy >= h || !mask.get(xx as u32, yy as u32) {
                    return false;
                }
            }
        }
        true
    })
}

/// One pass of a `(2r+1)²` minimum filter over in-bounds pixels only.
pub fn naive_gray_min(img: &GrayImage, r: i64) -> GrayImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let mut m = 255u8;
        for dy in -r..=r {
            for dx in -r..=r {
                let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                if xx >= 0 && yy >= 0 && xx < w && yy < h {
                    m = m.min(img.get_pixel(xx as u32, yy as u32)[0]);
                }
            }
        }
        image::Luma([m])
    })
}

// ── Zone partition ──────────────────────────────────────────

/// The five-zone rule evaluated exactly in integer arithmetic. All inputs
/// are in units of 1e-4 ratio.
pub fn exact_zone(h: i64, v: i64, hc: i64, vc: i64, w: i64, l: i64) -> Zone {
    let (dh, dv) = (h - hc, v - vc);
    // half-extents doubled to stay integral: compare 2|d| with w
    let (ah, av) = (2 * dh.abs(), 2 * dv.abs());
    if ah <= w && av <= l {
        return Zone::Center;
    }
    // (ah - w) / w >= (av - l) / l  <=>  (ah - w) * l >= (av - l) * w
    if (ah - w) * l >= (av - l) * w {
        if dh > 0 {
            Zone::Left
        } else {
            Zone::Right
        }
    } else if dv > 0 {
        Zone::Down
    } else {
        Zone::Up
    }
}

// ── Dwell reference ─────────────────────────────────────────

/// A second, independently structured dwell stepper. State is a plain
/// tuple; the same rules are re-derived from the documented contract:
///
/// * a directional zone opens an episode (`Started`);
/// * the same direction extends it, emitting `Progress` every
///   `feedback_period_ms` and `Confirmed` at the first sample with elapsed
///   time >= threshold, after which the direction is latched;
/// * a missing zone is tolerated while within `grace_ms` (> 0) of the last
///   same-direction sample; anything else ends the episode (`Lost`) and a
///   new directional zone immediately opens the next one;
/// * the latch clears on any present zone other than the latched direction.
pub struct ReferenceDwell {
    cfg: DwellConfig,
    // (direction, started, last seen, last progress)
    episode: Option<(Direction, u64, u64, u64)>,
    latched: Option<Direction>,
}

impl ReferenceDwell {
    pub fn new(cfg: DwellConfig) -> Self {
        Self {
            cfg,
            episode: None,
            latched: None,
        }
    }

    pub fn step(&mut self, zone: Option<Zone>, t: u64) -> Vec<DwellEvent> {
        let mut out = Vec::new();
        let dir = match zone {
            Some(Zone::Up) => Some(Direction::Up),
            Some(Zone::Down) => Some(Direction::Down),
            Some(Zone::Left) => Some(Direction::Left),
            Some(Zone::Right) => Some(Direction::Right),
            _ => None,
        };

        if let Some(l) = self.latched {
            match zone {
                None => return out,
                Some(_) if dir == Some(l) => return out,
                Some(_) => self.latched = None,
            }
        }

        if let Some((d, start, seen, prog)) = self.episode {
            if dir == Some(d) {
                if t - start >= self.cfg.threshold_ms {
                    out.push(DwellEvent {
                        t_ms: t,
                        kind: DwellEventKind::FocusConfirmed { direction: d },
                    });
                    self.episode = None;
                    self.latched = Some(d);
                } else if t - prog >= self.cfg.feedback_period_ms {
                    out.push(DwellEvent {
                        t_ms: t,
                        kind: DwellEventKind::FocusProgress {
                            direction: d,
                            elapsed_ms: t - start,
                        },
                    });
                    self.episode = Some((d, start, t, t));
                } else {
                    self.episode = Some((d, start, t, prog));
                }
                return out;
            }
            let within_grace = self.cfg.grace_ms > 0 && t - seen <= self.cfg.grace_ms;
            if zone.is_none() && within_grace {
                return out;
            }
            out.push(DwellEvent {
                t_ms: t,
                kind: DwellEventKind::FocusLost { direction: d },
            });
            self.episode = None;
        }

        if let Some(d) = dir {
            out.push(DwellEvent {
                t_ms: t,
                kind: DwellEventKind::FocusStarted { direction: d },
            });
            self.episode = Some((d, t, t, t));
        }
        out
    }
}

/// Checks the per-episode grammar `Started Progress* (Confirmed | Lost)`
/// and that no event concerns two directions at once. Returns a
/// description of the first violation.
pub fn check_grammar(events: &[DwellEvent]) -> Result<(), String> {
    let mut open: Option<Direction> = None;
    for (i, e) in events.iter().enumerate() {
        let d = e.kind.direction();
        match (open, e.kind) {
            (None, DwellEventKind::FocusStarted { .. }) => open = Some(d),
            (Some(o), DwellEventKind::FocusProgress { .. }) if o == d => {}
            (Some(o), DwellEventKind::FocusConfirmed { .. } | DwellEventKind::FocusLost { .. }) if o == d => {
                open = None
            }
            _ => return Err(format!("event {i} {:?} with open episode {open:?}", e.kind)),
        }
    }
    Ok(())
}
