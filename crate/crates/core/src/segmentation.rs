//! Iris segmentation: bilateral smoothing, grayscale erosion, inverse
//! thresholding and a moment centroid.

use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::{write_pgm, EyeRegion, Point};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
    #[error("eye region is empty")]
    EmptyImage,
    #[error("no contrast: every candidate threshold marks none or all of the region")]
    NoContrast,
}

// ── Binary mask ─────────────────────────────────────────────

/// Row-major boolean mask; `true` marks an iris pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width as usize * height as usize).then_some(Self { width, height, bits })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    /// Number of set pixels.
    pub fn mass(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }

    /// Set fraction of the mask area.
    pub fn fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.mass() as f64 / self.bits.len() as f64
        }
    }

    /// `true` where `self` is set implies `other` is set.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// White-on-black rendering for debugging.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }
}

/// Pupil center in eye-region pixel-index coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilCenter {
    pub x: f64,
    pub y: f64,
    pub mass: u64,
}

impl PupilCenter {
    /// Frame-space position of the center, taking pixel `(i, j)` to mean the
    /// point at its middle `(i + 0.5, j + 0.5)`.
    pub fn in_frame(&self, region: &EyeRegion) -> Point {
        region.to_frame(Point::new(self.x + 0.5, self.y + 0.5))
    }
}

// ── Parameters ──────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Fixed intensity; pixels at or below it are iris.
    Fixed(u8),
    /// Scan the candidate thresholds and keep the one whose iris fraction is
    /// closest to `target_fraction`.
    Adaptive { target_fraction: f64 },
}

/// Candidate thresholds scanned by [`calibrate_threshold`].
pub const THRESHOLD_CANDIDATES: [u8; 20] = [
    5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];

pub const DEFAULT_IRIS_FRACTION: f64 = 0.48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Bilateral spatial sigma, pixels.
    pub spatial_sigma: f64,
    /// Bilateral range sigma, intensity levels.
    pub range_sigma: f64,
    /// Bilateral neighborhood radius; 0 disables the filter.
    pub kernel_radius: u32,
    /// Erosion structuring-element radius (a `(2r+1)²` square).
    pub erosion_radius: u32,
    pub erosion_iterations: u32,
    pub threshold: Threshold,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            spatial_sigma: 3.0,
            range_sigma: 15.0,
            kernel_radius: 5,
            erosion_radius: 1,
            erosion_iterations: 3,
            threshold: Threshold::Adaptive {
                target_fraction: DEFAULT_IRIS_FRACTION,
            },
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        let bad = |m: &str| Err(SegmentationError::InvalidParams(m.to_string()));
        if !(self.spatial_sigma > 0.0 && self.spatial_sigma.is_finite()) {
            return bad("spatial_sigma must be positive");
        }
        if !(self.range_sigma > 0.0 && self.range_sigma.is_finite()) {
            return bad("range_sigma must be positive");
        }
        if let Threshold::Adaptive { target_fraction } = self.threshold {
            if !(0.0..=1.0).contains(&target_fraction) {
                return bad("target_fraction must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// The same parameters with the threshold frozen at `t`.
    pub fn with_fixed_threshold(self, t: u8) -> Self {
        Self {
            threshold: Threshold::Fixed(t),
            ..self
        }
    }
}

// ── Filters ─────────────────────────────────────────────────

/// Bilateral filter with clamped (replicated) edges. Output is rounded to the
/// nearest intensity level.
pub fn bilateral_filter(img: &GrayImage, params: &SegmentationParams) -> GrayImage {
    let r = params.kernel_radius as i64;
    if r == 0 {
        return img.clone();
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let side = (2 * r + 1) as usize;
    let ss2 = 2.0 * params.spatial_sigma * params.spatial_sigma;
    let sr2 = 2.0 * params.range_sigma * params.range_sigma;
    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            spatial.push((-((dx * dx + dy * dy) as f64) / ss2).exp());
        }
    }
    let range: Vec<f64> = (0..256).map(|d| (-((d * d) as f64) / sr2).exp()).collect();
    let src = img.as_raw();
    let mut out = GrayImage::new(img.width(), img.height());
    for y in 0..h {
        for x in 0..w {
            let center = src[(y * w + x) as usize];
            let (mut num, mut den) = (0.0, 0.0);
            let mut k = 0;
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, h - 1);
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, w - 1);
                    let q = src[(yy * w + xx) as usize];
                    let wt = spatial[k] * range[center.abs_diff(q) as usize];
                    num += wt * q as f64;
                    den += wt;
                    k += 1;
                }
            }
            let v = (num / den).round().clamp(0.0, 255.0) as u8;
            out.put_pixel(x as u32, y as u32, Luma([v]));
        }
    }
    out
}

/// Iterated square minimum filter.
///
/// For masks, pixels outside the region count as background, so erosion
/// clears a border of width `radius` each iteration. For grayscale images
/// out-of-bounds pixels are ignored instead: padding with black would drag
/// the crop border below the iris threshold.
pub trait Erode: Sized {
    fn erode(&self, radius: u32, iterations: u32) -> Self;
}

impl Erode for BinaryMask {
    fn erode(&self, radius: u32, iterations: u32) -> Self {
        let mut cur = self.clone();
        if radius == 0 {
            return cur;
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        for _ in 0..iterations {
            // separable: rows, then columns
            let mut rows = vec![false; w * h];
            for y in 0..h {
                for x in 0..w {
                    rows[y * w + x] = x >= r && x + r < w && (x - r..=x + r).all(|xx| cur.bits[y * w + xx]);
                }
            }
            for y in 0..h {
                for x in 0..w {
                    cur.bits[y * w + x] = y >= r && y + r < h && (y - r..=y + r).all(|yy| rows[yy * w + x]);
                }
            }
        }
        cur
    }
}

impl Erode for GrayImage {
    fn erode(&self, radius: u32, iterations: u32) -> Self {
        let mut cur = self.clone();
        if radius == 0 {
            return cur;
        }
        let (w, h) = (self.width() as usize, self.height() as usize);
        let r = radius as usize;
        let mut rows = vec![0u8; w * h];
        for _ in 0..iterations {
            let src = cur.as_raw();
            for y in 0..h {
                for x in 0..w {
                    let lo = x.saturating_sub(r);
                    let hi = (x + r).min(w - 1);
                    rows[y * w + x] = src[y * w + lo..=y * w + hi].iter().copied().min().unwrap();
                }
            }
            let dst: &mut [u8] = &mut cur;
            for y in 0..h {
                let lo = y.saturating_sub(r);
                let hi = (y + r).min(h - 1);
                for x in 0..w {
                    dst[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).min().unwrap();
                }
            }
        }
        cur
    }
}

/// Marks pixels with intensity `<= threshold` (dark is iris).
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: img.width(),
        height: img.height(),
        bits: img.as_raw().iter().map(|&p| p <= threshold).collect(),
    }
}

/// Centroid `(m10/m00, m01/m00)` of the set pixels, or `None` when the mask
/// is empty.
pub fn centroid_from_moments(mask: &BinaryMask) -> Option<PupilCenter> {
    let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                m00 += 1;
                m10 += x as u64;
                m01 += y as u64;
            }
        }
    }
    (m00 > 0).then(|| PupilCenter {
        x: m10 as f64 / m00 as f64,
        y: m01 as f64 / m00 as f64,
        mass: m00,
    })
}

// ── Threshold calibration and pupil location ────────────────

/// Filtered and eroded region, the input to thresholding.
pub fn preprocess(img: &GrayImage, params: &SegmentationParams) -> GrayImage {
    bilateral_filter(img, params).erode(params.erosion_radius, params.erosion_iterations)
}

/// Iris fraction for every candidate threshold on an already preprocessed
/// image.
fn candidate_fractions(pre: &GrayImage) -> [(u8, f64); THRESHOLD_CANDIDATES.len()] {
    let mut hist = [0u64; 256];
    for &p in pre.as_raw() {
        hist[p as usize] += 1;
    }
    let total = pre.as_raw().len() as f64;
    let mut out = [(0u8, 0.0); THRESHOLD_CANDIDATES.len()];
    for (slot, &t) in out.iter_mut().zip(THRESHOLD_CANDIDATES.iter()) {
        let dark: u64 = hist[..=t as usize].iter().sum();
        *slot = (t, dark as f64 / total);
    }
    out
}

fn pick_threshold(pre: &GrayImage, target: f64) -> Result<u8, SegmentationError> {
    let fractions = candidate_fractions(pre);
    if fractions.iter().all(|&(_, f)| f == 0.0 || f == 1.0) {
        return Err(SegmentationError::NoContrast);
    }
    let mut best = fractions[0];
    for &(t, f) in &fractions[1..] {
        if (f - target).abs() < (best.1 - target).abs() {
            best = (t, f);
        }
    }
    Ok(best.0)
}

/// Chooses the candidate threshold whose iris fraction on the preprocessed
/// region is closest to the target (lowest threshold on ties). A fixed
/// threshold in `params` is returned unchanged.
pub fn calibrate_threshold(eye: &GrayImage, params: &SegmentationParams) -> Result<u8, SegmentationError> {
    params.validate()?;
    if eye.as_raw().is_empty() {
        return Err(SegmentationError::EmptyImage);
    }
    match params.threshold {
        Threshold::Fixed(t) => Ok(t),
        Threshold::Adaptive { target_fraction } => pick_threshold(&preprocess(eye, params), target_fraction),
    }
}

/// Intermediate products of one segmentation, kept for debugging.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub filtered: GrayImage,
    pub threshold: u8,
    pub mask: BinaryMask,
    pub center: Option<PupilCenter>,
}

impl Segmentation {
    /// Writes `<stem>_filtered.pgm` and `<stem>_mask.pgm` into `dir`.
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<(), image::ImageError> {
        write_pgm(&self.filtered, &dir.join(format!("{stem}_filtered.pgm")))?;
        write_pgm(&self.mask.to_image(), &dir.join(format!("{stem}_mask.pgm")))
    }
}

pub fn segment(eye: &GrayImage, params: &SegmentationParams) -> Result<Segmentation, SegmentationError> {
    params.validate()?;
    if eye.as_raw().is_empty() {
        return Err(SegmentationError::EmptyImage);
    }
    let filtered = preprocess(eye, params);
    let threshold = match params.threshold {
        Threshold::Fixed(t) => t,
        Threshold::Adaptive { target_fraction } => match pick_threshold(&filtered, target_fraction) {
            Ok(t) => t,
            // nothing dark at any candidate: simply no pupil
            Err(SegmentationError::NoContrast) if filtered.as_raw().iter().all(|&p| p > 100) => {
                let mask = BinaryMask::filled(filtered.width(), filtered.height(), false);
                return Ok(Segmentation {
                    filtered,
                    threshold: 100,
                    mask,
                    center: None,
                });
            }
            Err(e) => return Err(e),
        },
    };
    let mask = binarize(&filtered, threshold);
    let center = centroid_from_moments(&mask);
    Ok(Segmentation {
        filtered,
        threshold,
        mask,
        center,
    })
}

/// Pupil center of an eye crop in region coordinates, `None` when no iris
/// pixel survives thresholding.
pub fn locate_pupil(eye: &EyeRegion, params: &SegmentationParams) -> Result<Option<PupilCenter>, SegmentationError> {
    Ok(segment(&eye.image, params)?.center)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| Luma([f(x, y)]))
    }

    fn raw_params() -> SegmentationParams {
        SegmentationParams {
            kernel_radius: 0,
            erosion_iterations: 0,
            ..Default::default()
        }
    }

    #[test]
    fn bilateral_constant_and_identity() {
        let flat = gray(7, 5, |_, _| 128);
        assert_eq!(bilateral_filter(&flat, &SegmentationParams::default()), flat);
        let noisy = gray(6, 6, |x, y| ((x * 37 + y * 91) % 256) as u8);
        assert_eq!(bilateral_filter(&noisy, &raw_params()), noisy);
    }

    #[test]
    fn bilateral_matches_direct_summation() {
        let params = |ss, sr| SegmentationParams {
            kernel_radius: 1,
            spatial_sigma: ss,
            range_sigma: sr,
            ..Default::default()
        };
        // Reference values from an independent double loop over the clamped
        // neighborhood.
        let spike = gray(3, 3, |x, y| if (x, y) == (1, 1) { 255 } else { 0 });
        let out = bilateral_filter(&spike, &params(1.0, 30.0));
        assert_eq!(out.get_pixel(1, 1)[0], 255);
        assert_eq!(out.get_pixel(0, 0)[0], 0);

        let src = [[10, 40, 70, 100], [20, 90, 60, 30], [200, 180, 120, 50]];
        let expected = [[19, 43, 68, 86], [22, 77, 65, 49], [194, 177, 112, 50]];
        let img = gray(4, 3, |x, y| src[y as usize][x as usize]);
        let out = bilateral_filter(&img, &params(1.5, 40.0));
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(out.get_pixel(x, y)[0], expected[y as usize][x as usize], "({x},{y})");
            }
        }
    }

    #[test]
    fn mask_erosion_examples() {
        let full = BinaryMask::filled(5, 5, true);
        let e = full.erode(1, 1);
        let inner = BinaryMask::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
        assert_eq!(e, inner);

        let mut single = BinaryMask::filled(5, 5, false);
        single.set(2, 2, true);
        assert_eq!(single.erode(1, 1).mass(), 0);
    }

    #[test]
    fn gray_erosion_ignores_outside() {
        let img = gray(4, 4, |x, y| if (x, y) == (3, 3) { 10 } else { 200 });
        let e = img.erode(1, 1);
        assert_eq!(e.get_pixel(0, 0)[0], 200);
        assert_eq!(e.get_pixel(2, 2)[0], 10);
        assert_eq!(e.get_pixel(3, 2)[0], 10);
        assert_eq!(e.get_pixel(1, 1)[0], 200);
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(&gray(4, 4, |_, _| 255), 100).mass(), 0);
        assert_eq!(binarize(&gray(4, 4, |_, _| 0), 0).mass(), 16);
        assert_eq!(binarize(&gray(4, 4, |_, _| 77), 77).mass(), 16);
    }

    #[test]
    fn centroid_examples() {
        let mut m = BinaryMask::filled(8, 8, false);
        m.set(3, 5, true);
        assert_eq!(
            centroid_from_moments(&m),
            Some(PupilCenter {
                x: 3.0,
                y: 5.0,
                mass: 1
            })
        );

        let rect = BinaryMask::from_fn(10, 6, |x, y| (2..=6).contains(&x) && (1..=3).contains(&y));
        let c = centroid_from_moments(&rect).unwrap();
        assert_eq!((c.x, c.y, c.mass), (4.0, 2.0, 15));

        assert_eq!(centroid_from_moments(&BinaryMask::filled(3, 3, false)), None);
    }

    /// 25×25 region with a dark disc covering exactly 300 of 625 pixels (48%).
    fn disc_region() -> GrayImage {
        let mut pts: Vec<(u32, u32)> = (0..25).flat_map(|y| (0..25).map(move |x| (x, y))).collect();
        pts.sort_by(|a, b| {
            let d = |p: &(u32, u32)| (p.0 as f64 - 12.0).powi(2) + (p.1 as f64 - 12.0).powi(2);
            d(a).total_cmp(&d(b)).then(a.cmp(b))
        });
        let dark: std::collections::HashSet<_> = pts[..300].iter().copied().collect();
        gray(25, 25, |x, y| if dark.contains(&(x, y)) { 20 } else { 200 })
    }

    #[test]
    fn threshold_calibration_hits_target_fraction() {
        let img = disc_region();
        let t = calibrate_threshold(&img, &raw_params()).unwrap();
        assert!((20..195).contains(&t));
        let f = binarize(&img, t).fraction();
        assert!((f - 0.48).abs() <= 1.0 / 625.0);
    }

    #[test]
    fn threshold_calibration_rejects_flat_region() {
        assert_eq!(
            calibrate_threshold(&gray(10, 10, |_, _| 200), &raw_params()),
            Err(SegmentationError::NoContrast)
        );
    }

    #[test]
    fn threshold_calibration_two_level() {
        // 30 of 100 pixels dark; every threshold that separates gives 0.30,
        // which beats 0.0 (too bright) for a 0.48 target.
        let img = gray(10, 10, |x, y| if y * 10 + x < 30 { 40 } else { 180 });
        let t = calibrate_threshold(&img, &raw_params()).unwrap();
        assert_eq!(t, 40);
        assert!((binarize(&img, t).fraction() - 0.30).abs() < 1e-12);
    }

    fn disc(w: u32, h: u32, cx: f64, cy: f64, r: f64) -> GrayImage {
        gray(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                20
            } else {
                200
            }
        })
    }

    fn region(img: GrayImage) -> EyeRegion {
        EyeRegion {
            side: crate::vision::EyeSide::Left,
            image: img,
            origin: (0, 0),
        }
    }

    #[test]
    fn locate_pupil_on_disc() {
        let eye = region(disc(26, 17, 12.0, 8.0, 4.0));
        let c = locate_pupil(&eye, &SegmentationParams::default()).unwrap().unwrap();
        assert!((c.x - 12.0).abs() <= 0.5 && (c.y - 8.0).abs() <= 0.5, "{c:?}");
    }

    #[test]
    fn bright_region_has_no_pupil() {
        let eye = region(gray(20, 12, |_, _| 220));
        assert_eq!(locate_pupil(&eye, &SegmentationParams::default()), Ok(None));
    }

    #[test]
    fn edge_disc_matches_final_mask_mean() {
        let eye = region(disc(24, 16, 1.0, 7.0, 5.0));
        let seg = segment(&eye.image, &SegmentationParams::default()).unwrap();
        let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for y in 0..seg.mask.height() {
            for x in 0..seg.mask.width() {
                if seg.mask.get(x, y) {
                    n += 1.0;
                    sx += x as f64;
                    sy += y as f64;
                }
            }
        }
        let c = seg.center.unwrap();
        assert_eq!((c.x, c.y), (sx / n, sy / n));
    }

    #[test]
    fn debug_dump_writes_pgms() {
        let dir = tempfile::tempdir().unwrap();
        let seg = segment(&disc(20, 12, 10.0, 6.0, 3.0), &SegmentationParams::default()).unwrap();
        seg.dump(dir.path(), "f0_left").unwrap();
        assert!(dir.path().join("f0_left_mask.pgm").exists());
        assert!(dir.path().join("f0_left_filtered.pgm").exists());
    }

    #[test]
    fn params_validation() {
        let p = SegmentationParams {
            spatial_sigma: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(SegmentationParams::default().validate().is_ok());
    }
}
