//! Synthetic face rasters with known landmark and pupil ground truth.

use std::f64::consts::PI;

use image::{GrayImage, Luma};

use super::provider::ellipse_eye_points;
use super::{FaceLandmarks, Frame, Point, LANDMARK_COUNT};

/// Intensities used when rendering.
#[derive(Debug, Clone, Copy)]
pub struct Palette {
    pub background: u8,
    pub skin: u8,
    pub sclera: u8,
    pub iris: u8,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: 100,
            skin: 160,
            sclera: 235,
            iris: 30,
        }
    }
}

/// An axis-aligned elliptical eye with a circular iris.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticEye {
    pub center: Point,
    pub half_width: f64,
    pub half_height: f64,
    pub iris_radius: f64,
    /// Iris center relative to the eye center, in pixels.
    pub iris_offset: (f64, f64),
}

impl SyntheticEye {
    pub fn iris_center(&self) -> Point {
        Point::new(self.center.x + self.iris_offset.0, self.center.y + self.iris_offset.1)
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        let u = (x - self.center.x) / self.half_width;
        let v = (y - self.center.y) / self.half_height;
        u * u + v * v <= 1.0
    }

    fn in_iris(&self, x: f64, y: f64) -> bool {
        let c = self.iris_center();
        let (dx, dy) = (x - c.x, y - c.y);
        dx * dx + dy * dy <= self.iris_radius * self.iris_radius
    }

    /// Ground-truth landmarks on this eye's outline, in index order.
    pub fn landmarks(&self) -> [Point; 6] {
        ellipse_eye_points(self.center, self.half_width, self.half_height)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFace {
    pub width: u32,
    pub height: u32,
    pub left: SyntheticEye,
    pub right: SyntheticEye,
    pub palette: Palette,
}

impl SyntheticFace {
    /// A frontal face centred in a `width x height` frame, eyes looking
    /// straight ahead.
    pub fn centered(width: u32, height: u32) -> Self {
        let (w, h) = (width as f64, height as f64);
        let iod = w * 0.25;
        let eye = |cx: f64| SyntheticEye {
            center: Point::new(cx, h * 0.42),
            half_width: iod * 0.28,
            half_height: iod * 0.12,
            iris_radius: iod * 0.1,
            iris_offset: (0.0, 0.0),
        };
        Self {
            width,
            height,
            left: eye(w / 2.0 - iod / 2.0),
            right: eye(w / 2.0 + iod / 2.0),
            palette: Palette::default(),
        }
    }

    /// Moves both irises by the same offset.
    pub fn with_gaze(mut self, dx: f64, dy: f64) -> Self {
        self.left.iris_offset = (dx, dy);
        self.right.iris_offset = (dx, dy);
        self
    }

    /// Renders the frame; pixel `(x, y)` is sampled at its center.
    pub fn render(&self, t_ms: u64) -> Frame {
        let mid = self.left.center.midpoint(&self.right.center);
        let iod = self.left.center.distance(&self.right.center);
        let (frx, fry) = (iod * 1.05, iod * 1.45);
        let fcy = mid.y + iod * 0.45;
        let p = self.palette;
        let img = GrayImage::from_fn(self.width, self.height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            for eye in [&self.left, &self.right] {
                if eye.inside(px, py) {
                    return Luma([if eye.in_iris(px, py) { p.iris } else { p.sclera }]);
                }
            }
            let (u, v) = ((px - mid.x) / frx, (py - fcy) / fry);
            Luma([if u * u + v * v <= 1.0 { p.skin } else { p.background }])
        });
        Frame::from_image(img, t_ms).expect("non-empty synthetic frame")
    }

    pub fn landmarks(&self, t_ms: u64) -> FaceLandmarks {
        let mut pts = template_points(self.left.center, self.right.center, self.width, self.height);
        pts[36..42].copy_from_slice(&self.left.landmarks());
        pts[42..48].copy_from_slice(&self.right.landmarks());
        FaceLandmarks::new(pts, t_ms).expect("68 finite points")
    }
}

/// The 68-point mean shape placed on two eye centers. Eye points are included
/// but callers usually overwrite 36–47 with measured ones. Points are clamped
/// into the frame.
pub fn template_points(left_eye: Point, right_eye: Point, width: u32, height: u32) -> Vec<Point> {
    let mid = left_eye.midpoint(&right_eye);
    let d = left_eye.distance(&right_eye).max(1.0);
    let ex = ((right_eye.x - left_eye.x) / d, (right_eye.y - left_eye.y) / d);
    let ey = (-ex.1, ex.0);
    let place = |u: f64, v: f64| {
        Point::new(
            (mid.x + d * (u * ex.0 + v * ey.0)).clamp(0.0, width as f64 - 1.0),
            (mid.y + d * (u * ex.1 + v * ey.1)).clamp(0.0, height as f64 - 1.0),
        )
    };

    let mut shape = Vec::with_capacity(LANDMARK_COUNT);
    // jaw
    for i in 0..17 {
        let t = PI * i as f64 / 16.0;
        shape.push(place(-0.95 * t.cos(), 0.05 + 1.4 * t.sin()));
    }
    // brows
    for start in [-0.85, 0.15] {
        for k in 0..5 {
            let u = start + 0.175 * k as f64;
            shape.push(place(u, -0.35 - 0.08 * (PI * k as f64 / 4.0).sin()));
        }
    }
    // nose bridge and base
    for k in 0..4 {
        shape.push(place(0.0, 0.15 * k as f64));
    }
    for k in 0..5 {
        let u = -0.2 + 0.1 * k as f64;
        shape.push(place(u, 0.55 + 0.03 * (1.0 - (u / 0.2).abs())));
    }
    // eyes
    for c in [-0.5, 0.5] {
        for (u, v) in [
            (-0.28, 0.0),
            (-0.09, -0.11),
            (0.09, -0.11),
            (0.28, 0.0),
            (0.09, 0.11),
            (-0.09, 0.11),
        ] {
            shape.push(place(c + u, v));
        }
    }
    // outer and inner lips
    for (n, rx, ry) in [(12usize, 0.4, 0.15), (8, 0.28, 0.07)] {
        for k in 0..n {
            let th = PI - 2.0 * PI * k as f64 / n as f64;
            shape.push(place(rx * th.cos(), 0.95 - ry * th.sin()));
        }
    }
    debug_assert_eq!(shape.len(), LANDMARK_COUNT);
    shape
}
