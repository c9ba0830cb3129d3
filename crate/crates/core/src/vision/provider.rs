//! Landmark providers.
//!
//! The 68-point model is not part of this crate. Anything that can turn a
//! frame into landmarks plugs in through [`LandmarkProvider`]:
//!
//! * [`TracePlayback`] replays landmarks recorded to a JSON-lines file.
//! * [`ProcessLandmarker`] talks to an external model runtime over stdio.
//! * [`TemplateLandmarker`] locates the eyes of synthetic face rasters and
//!   fills in the rest of the face from a mean-shape template.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::synthetic::template_points;
use super::{FaceLandmarks, Frame, Point, VisionError, LANDMARK_COUNT};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("landmark provider I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("provider returned invalid landmarks: {0}")]
    Invalid(#[from] VisionError),
    #[error("landmark provider failed: {0}")]
    Failed(String),
}

pub trait LandmarkProvider {
    /// Landmarks of the frontal face in `frame`, or `None` when there is none.
    fn detect(&mut self, frame: &Frame) -> Result<Option<FaceLandmarks>, ProviderError>;
}

impl<P: LandmarkProvider + ?Sized> LandmarkProvider for Box<P> {
    fn detect(&mut self, frame: &Frame) -> Result<Option<FaceLandmarks>, ProviderError> {
        (**self).detect(frame)
    }
}

/// Runs `provider` and checks that whatever it reports lies inside the frame.
pub fn detect_landmarks<P: LandmarkProvider + ?Sized>(
    frame: &Frame,
    provider: &mut P,
) -> Result<Option<FaceLandmarks>, ProviderError> {
    match provider.detect(frame)? {
        Some(lm) => {
            lm.check_within(frame.width(), frame.height())?;
            Ok(Some(lm))
        }
        None => Ok(None),
    }
}

// ── Trace playback ──────────────────────────────────────────

/// One line of a landmark trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub t_ms: u64,
    pub points: Vec<[f64; 2]>,
}

impl LandmarkRecord {
    pub fn from_landmarks(lm: &FaceLandmarks) -> Self {
        Self {
            t_ms: lm.t_ms(),
            points: lm.points().iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    pub fn to_landmarks(&self) -> Result<FaceLandmarks, VisionError> {
        FaceLandmarks::new(self.points.iter().map(|&[x, y]| Point::new(x, y)).collect(), self.t_ms)
    }
}

pub fn read_landmark_trace<R: BufRead>(reader: R) -> Result<Vec<LandmarkRecord>, ProviderError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LandmarkRecord = serde_json::from_str(&line).map_err(|e| ProviderError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.points.len() != LANDMARK_COUNT {
            return Err(ProviderError::Parse {
                line: i + 1,
                message: format!("expected {LANDMARK_COUNT} points, got {}", rec.points.len()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_landmark_trace<W: Write>(mut writer: W, records: &[LandmarkRecord]) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Replays recorded landmarks keyed by frame timestamp. Frames without a
/// record have no face.
#[derive(Debug, Clone, Default)]
pub struct TracePlayback {
    records: BTreeMap<u64, FaceLandmarks>,
}

impl TracePlayback {
    pub fn new(records: Vec<LandmarkRecord>) -> Result<Self, ProviderError> {
        let mut map = BTreeMap::new();
        for rec in records {
            map.insert(rec.t_ms, rec.to_landmarks()?);
        }
        Ok(Self { records: map })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let file = std::fs::File::open(path)?;
        Self::new(read_landmark_trace(BufReader::new(file))?)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl LandmarkProvider for TracePlayback {
    fn detect(&mut self, frame: &Frame) -> Result<Option<FaceLandmarks>, ProviderError> {
        Ok(self.records.get(&frame.t_ms()).cloned())
    }
}

// ── External process ────────────────────────────────────────

#[derive(Serialize)]
struct FrameHeader {
    width: u32,
    height: u32,
    t_ms: u64,
}

#[derive(Deserialize)]
struct ProcessReply {
    points: Option<Vec<[f64; 2]>>,
}

/// Adapter for an out-of-process landmark model.
///
/// For every frame the child receives one JSON header line
/// `{"width":W,"height":H,"t_ms":T}` followed by `W*H` raw grayscale bytes,
/// and must answer with one line `{"points":[[x,y],...]}` (68 pairs) or
/// `{"points":null}` when no face is visible.
pub struct ProcessLandmarker {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ProcessLandmarker {
    pub fn spawn<I, S>(program: &str, args: I) -> Result<Self, ProviderError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<std::ffi::OsStr>,
    {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| ProviderError::Failed("no stdin".into()))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| ProviderError::Failed("no stdout".into()))?;
        Ok(Self {
            child,
            stdin: BufWriter::new(stdin),
            stdout: BufReader::new(stdout),
        })
    }
}

impl LandmarkProvider for ProcessLandmarker {
    fn detect(&mut self, frame: &Frame) -> Result<Option<FaceLandmarks>, ProviderError> {
        let header = FrameHeader {
            width: frame.width(),
            height: frame.height(),
            t_ms: frame.t_ms(),
        };
        serde_json::to_writer(&mut self.stdin, &header).map_err(|e| ProviderError::Failed(e.to_string()))?;
        self.stdin.write_all(b"\n")?;
        self.stdin.write_all(frame.pixels())?;
        self.stdin.flush()?;

        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(ProviderError::Failed("landmark process closed its output".into()));
        }
        let reply: ProcessReply = serde_json::from_str(line.trim()).map_err(|e| ProviderError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        match reply.points {
            None => Ok(None),
            Some(pts) => Ok(Some(FaceLandmarks::new(
                pts.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
                frame.t_ms(),
            )?)),
        }
    }
}

impl Drop for ProcessLandmarker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

// ── Template landmarker ─────────────────────────────────────

/// Finds the two eyes of a synthetic face as the largest connected blobs of
/// sclera-bright or iris-dark pixels, places the six eye landmarks on each
/// blob's bounding ellipse, and lays the remaining points out from the
/// mean-shape template anchored on the two eye centers.
#[derive(Debug, Clone)]
pub struct TemplateLandmarker {
    /// Pixels at or above this count as sclera.
    pub bright_min: u8,
    /// Pixels at or below this count as iris.
    pub dark_max: u8,
    /// Smallest blob accepted as an eye, in pixels.
    pub min_area: usize,
}

impl Default for TemplateLandmarker {
    fn default() -> Self {
        Self {
            bright_min: 200,
            dark_max: 60,
            min_area: 40,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    area: usize,
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl TemplateLandmarker {
    fn blobs(&self, frame: &Frame) -> Vec<Blob> {
        let (w, h) = (frame.width() as usize, frame.height() as usize);
        let px = frame.pixels();
        let is_eye = |i: usize| px[i] >= self.bright_min || px[i] <= self.dark_max;
        let mut seen = vec![false; w * h];
        let mut blobs = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if seen[start] || !is_eye(start) {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut b = Blob {
                area: 0,
                x0: u32::MAX,
                y0: u32::MAX,
                x1: 0,
                y1: 0,
            };
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                b.area += 1;
                b.x0 = b.x0.min(x as u32);
                b.x1 = b.x1.max(x as u32);
                b.y0 = b.y0.min(y as u32);
                b.y1 = b.y1.max(y as u32);
                let mut visit = |j: usize| {
                    if !seen[j] && is_eye(j) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            if b.area >= self.min_area {
                blobs.push(b);
            }
        }
        blobs
    }
}

impl LandmarkProvider for TemplateLandmarker {
    fn detect(&mut self, frame: &Frame) -> Result<Option<FaceLandmarks>, ProviderError> {
        let mut blobs = self.blobs(frame);
        if blobs.len() < 2 {
            return Ok(None);
        }
        blobs.sort_by_key(|b| std::cmp::Reverse(b.area));
        let mut eyes = [blobs[0], blobs[1]];
        eyes.sort_by_key(|b| b.x0);

        let eye_points = |b: &Blob| {
            // pixel centers
            let (x0, x1) = (b.x0 as f64 + 0.5, b.x1 as f64 + 0.5);
            let (y0, y1) = (b.y0 as f64 + 0.5, b.y1 as f64 + 0.5);
            ellipse_eye_points(
                Point::new((x0 + x1) / 2.0, (y0 + y1) / 2.0),
                (x1 - x0) / 2.0,
                (y1 - y0) / 2.0,
            )
        };
        let left = eye_points(&eyes[0]);
        let right = eye_points(&eyes[1]);
        let mut pts = template_points(
            left[0].midpoint(&left[3]),
            right[0].midpoint(&right[3]),
            frame.width(),
            frame.height(),
        );
        pts[36..42].copy_from_slice(&left);
        pts[42..48].copy_from_slice(&right);
        Ok(Some(FaceLandmarks::new(pts, frame.t_ms())?))
    }
}

/// Six landmarks on an axis-aligned eye ellipse, in landmark index order:
/// corners on the major axis, lid points at one third of the half-width.
pub(crate) fn ellipse_eye_points(center: Point, half_w: f64, half_h: f64) -> [Point; 6] {
    let k = (8.0f64 / 9.0).sqrt() * half_h;
    let dx = half_w / 3.0;
    [
        Point::new(center.x - half_w, center.y),
        Point::new(center.x - dx, center.y - k),
        Point::new(center.x + dx, center.y - k),
        Point::new(center.x + half_w, center.y),
        Point::new(center.x + dx, center.y + k),
        Point::new(center.x - dx, center.y + k),
    ]
}
