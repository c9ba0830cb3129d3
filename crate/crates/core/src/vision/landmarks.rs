use super::{EyeSide, Point, VisionError};

/// Number of points in the facial landmark layout (iBUG 300-W / dlib).
pub const LANDMARK_COUNT: usize = 68;

const LEFT_EYE_START: usize = 36;
const RIGHT_EYE_START: usize = 42;

/// The 68 facial landmarks of one detected face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceLandmarks {
    points: Vec<Point>,
    t_ms: u64,
}

impl FaceLandmarks {
    pub fn new(points: Vec<Point>, t_ms: u64) -> Result<Self, VisionError> {
        if points.len() != LANDMARK_COUNT {
            return Err(VisionError::InvalidLandmarks(format!(
                "expected {LANDMARK_COUNT} points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(VisionError::InvalidLandmarks(format!("point {i} is not finite")));
        }
        Ok(Self { points, t_ms })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn t_ms(&self) -> u64 {
        self.t_ms
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<(), VisionError> {
        let (w, h) = (width as f64, height as f64);
        match self
            .points
            .iter()
            .position(|p| p.x < 0.0 || p.y < 0.0 || p.x >= w || p.y >= h)
        {
            Some(i) => Err(VisionError::InvalidLandmarks(format!(
                "point {i} ({:.1}, {:.1}) outside {width}x{height} frame",
                self.points[i].x, self.points[i].y
            ))),
            None => Ok(()),
        }
    }

    /// Eye landmarks for `side` using the fixed labelling: 36–41 is the
    /// left eye, 42–47 the right eye.
    pub fn eye(&self, side: EyeSide) -> EyeLandmarks {
        let s = match side {
            EyeSide::Left => LEFT_EYE_START,
            EyeSide::Right => RIGHT_EYE_START,
        };
        let p = &self.points[s..s + 6];
        EyeLandmarks {
            side,
            corner_outer: p[0],
            corner_inner: p[3],
            upper: [p[1], p[2]],
            lower: [p[5], p[4]],
        }
    }

    /// `(left, right)`, optionally with the index sets exchanged.
    pub fn eyes(&self, swap: bool) -> (EyeLandmarks, EyeLandmarks) {
        let (mut l, mut r) = (self.eye(EyeSide::Left), self.eye(EyeSide::Right));
        if swap {
            std::mem::swap(&mut l, &mut r);
            l.side = EyeSide::Left;
            r.side = EyeSide::Right;
        }
        (l, r)
    }
}

/// The six landmarks of one eye.
///
/// `corner_outer` is the first point of the eye's index block (36 or 42) and
/// supplies `x_min`; `corner_inner` is the fourth (39 or 45) and supplies
/// `x_max`. `upper` holds 37/38 (43/44) and `lower` holds 41/40 (47/46), so
/// `upper[i]` and `lower[i]` face each other across the eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeLandmarks {
    pub side: EyeSide,
    pub corner_outer: Point,
    pub corner_inner: Point,
    pub upper: [Point; 2],
    pub lower: [Point; 2],
}

impl EyeLandmarks {
    pub fn x_min(&self) -> f64 {
        self.corner_outer.x
    }

    pub fn x_max(&self) -> f64 {
        self.corner_inner.x
    }

    pub fn y_min(&self) -> f64 {
        (self.upper[0].y + self.upper[1].y) / 2.0
    }

    pub fn y_max(&self) -> f64 {
        (self.lower[0].y + self.lower[1].y) / 2.0
    }

    /// Points in landmark index order.
    pub fn points(&self) -> [Point; 6] {
        [
            self.corner_outer,
            self.upper[0],
            self.upper[1],
            self.corner_inner,
            self.lower[1],
            self.lower[0],
        ]
    }

    pub fn center(&self) -> Point {
        self.corner_outer.midpoint(&self.corner_inner)
    }
}
