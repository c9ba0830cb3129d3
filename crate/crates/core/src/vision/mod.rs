//! Frame ingest, facial landmarks and per-eye cropping.

mod corpus;
mod landmarks;
mod provider;
pub mod synthetic;

pub use corpus::{CorpusError, FrameCorpus};
pub use landmarks::{EyeLandmarks, FaceLandmarks, LANDMARK_COUNT};
pub use provider::{
    detect_landmarks, read_landmark_trace, write_landmark_trace, LandmarkProvider, LandmarkRecord, ProcessLandmarker,
    ProviderError, TemplateLandmarker, TracePlayback,
};

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default crop margin around the six eye landmarks, in pixels.
pub const DEFAULT_EYE_MARGIN: u32 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),
}

/// A point in pixel space. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; the
/// coordinate system is the one the landmark provider reports in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyeSide {
    Left,
    Right,
}

/// One grayscale webcam frame stamped by its source.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    image: GrayImage,
    t_ms: u64,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, t_ms: u64) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidFrame(format!("zero-sized frame {width}x{height}")));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(VisionError::InvalidFrame(format!(
                "expected {expected} pixels for {width}x{height}, got {}",
                pixels.len()
            )));
        }
        let image = GrayImage::from_raw(width, height, pixels)
            .ok_or_else(|| VisionError::InvalidFrame("pixel buffer rejected".into()))?;
        Ok(Self { image, t_ms })
    }

    pub fn from_image(image: GrayImage, t_ms: u64) -> Result<Self, VisionError> {
        let (w, h) = image.dimensions();
        Self::new(w, h, image.into_raw(), t_ms)
    }

    /// Converts packed RGB8 to luma with the ITU-R BT.601 weights.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8], t_ms: u64) -> Result<Self, VisionError> {
        if rgb.len() != width as usize * height as usize * 3 {
            return Err(VisionError::InvalidFrame(format!(
                "expected {} RGB bytes for {width}x{height}, got {}",
                width as usize * height as usize * 3,
                rgb.len()
            )));
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Self::new(width, height, pixels, t_ms)
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn t_ms(&self) -> u64 {
        self.t_ms
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn pixels(&self) -> &[u8] {
        self.image.as_raw()
    }

    /// Horizontally flipped copy (selfie view).
    pub fn mirrored(&self) -> Frame {
        Frame {
            image: image::imageops::flip_horizontal(&self.image),
            t_ms: self.t_ms,
        }
    }
}

/// Writes a binary (P5) PGM.
pub fn write_pgm(img: &GrayImage, path: &std::path::Path) -> Result<(), image::ImageError> {
    use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
    use image::ImageEncoder;
    let file = std::io::BufWriter::new(std::fs::File::create(path).map_err(image::ImageError::IoError)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::L8)
}

/// A cropped eye image and where it sits in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeRegion {
    pub side: EyeSide,
    pub image: GrayImage,
    /// Top-left corner of the crop in frame pixels.
    pub origin: (u32, u32),
}

impl EyeRegion {
    pub fn to_frame(&self, p: Point) -> Point {
        Point::new(p.x + self.origin.0 as f64, p.y + self.origin.1 as f64)
    }

    pub fn to_local(&self, p: Point) -> Point {
        Point::new(p.x - self.origin.0 as f64, p.y - self.origin.1 as f64)
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// Crops both eyes: the bounding box of each eye's six landmarks grown by
/// `margin` and clamped to the frame. Returned as `(left, right)` in the
/// landmark labelling (indices 36–41 are "left"), or swapped when
/// `swap_eyes` is set.
pub fn extract_eye_regions(
    frame: &Frame,
    landmarks: &FaceLandmarks,
    margin: u32,
    swap_eyes: bool,
) -> Result<(EyeRegion, EyeRegion), VisionError> {
    landmarks.check_within(frame.width(), frame.height())?;
    let (left, right) = landmarks.eyes(swap_eyes);
    Ok((crop_eye(frame, &left, margin)?, crop_eye(frame, &right, margin)?))
}

fn crop_eye(frame: &Frame, eye: &EyeLandmarks, margin: u32) -> Result<EyeRegion, VisionError> {
    let pts = eye.points();
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    if max_x <= min_x || max_y <= min_y {
        return Err(VisionError::InvalidLandmarks(format!(
            "{:?} eye bounding box has zero area",
            eye.side
        )));
    }
    let m = margin as i64;
    let x0 = (min_x.floor() as i64 - m).max(0);
    let y0 = (min_y.floor() as i64 - m).max(0);
    let x1 = (max_x.ceil() as i64 + m).min(frame.width() as i64);
    let y1 = (max_y.ceil() as i64 + m).min(frame.height() as i64);
    if x1 <= x0 || y1 <= y0 {
        return Err(VisionError::InvalidLandmarks(format!(
            "{:?} eye crop is empty after clamping",
            eye.side
        )));
    }
    let (x0, y0, w, h) = (x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32);
    let src = frame.image();
    let image = GrayImage::from_fn(w, h, |x, y| Luma([src.get_pixel(x0 + x, y0 + y)[0]]));
    Ok(EyeRegion {
        side: eye.side,
        image,
        origin: (x0, y0),
    })
}
