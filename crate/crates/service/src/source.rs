//! Capture worker: turns the configured source into a stream of
//! [`CaptureItem`]s on a bounded queue.
//!
//! File sources block on a full queue, so nothing recorded is lost. The
//! camera source never blocks: when the pipeline falls behind, frames are
//! dropped here and counted.

use std::io::Read;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, SendTimeoutError, Sender, TrySendError};
use gave_core::vision::{Frame, FrameCorpus};
use gave_sim::{load_trace, TraceLine};
use tracing::{info, warn};

use crate::config::SourceSpec;
use crate::ServiceError;

pub const CAPTURE_QUEUE: usize = 64;

#[derive(Debug)]
pub enum CaptureItem {
    Frame(Frame),
    Line(TraceLine),
    End,
    Failed(String),
}

/// Source state checked before the worker starts, so a missing file or a
/// camera command that cannot be spawned is a startup error.
pub enum Prepared {
    Trace(Vec<TraceLine>),
    Frames(FrameCorpus),
    Camera { child: Child, width: u32, height: u32 },
}

pub fn prepare(spec: &SourceSpec) -> Result<Prepared, ServiceError> {
    match spec {
        SourceSpec::RatioTrace { path } => Ok(Prepared::Trace(load_trace(path)?)),
        SourceSpec::FrameDir { dir } => FrameCorpus::open(dir)
            .map(Prepared::Frames)
            .map_err(|e| ServiceError::Source(format!("{}: {e}", dir.display()))),
        SourceSpec::Camera { command, width, height } => {
            let child = Command::new("sh")
                .arg("-c")
                .arg(command)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| ServiceError::Source(format!("camera command: {e}")))?;
            Ok(Prepared::Camera {
                child,
                width: *width,
                height: *height,
            })
        }
    }
}

/// Handle on the capture thread. Dropping the child process handle on stop
/// unblocks a camera read.
pub struct CaptureHandle {
    pub thread: JoinHandle<()>,
    camera: Option<Arc<Mutex<Child>>>,
}

impl CaptureHandle {
    pub fn kill(&self) {
        if let Some(child) = &self.camera {
            if let Ok(mut c) = child.lock() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
}

/// Starts capturing once `gate` fires (or is dropped).
pub fn spawn(
    prepared: Prepared,
    tx: Sender<CaptureItem>,
    gate: Receiver<()>,
    stop: Arc<AtomicBool>,
    realtime: bool,
) -> CaptureHandle {
    let mut camera = None;
    let body: Box<dyn FnOnce() + Send> = match prepared {
        Prepared::Trace(lines) => Box::new(move || {
            let pace = Pacer::new(realtime);
            for line in lines {
                if let Some(t) = line.t_ms() {
                    pace.wait_for(t, &stop);
                }
                if !send_blocking(&tx, CaptureItem::Line(line), &stop) {
                    return;
                }
            }
            send_blocking(&tx, CaptureItem::End, &stop);
        }),
        Prepared::Frames(corpus) => Box::new(move || {
            let pace = Pacer::new(realtime);
            for frame in corpus.frames() {
                let item = match frame {
                    Ok(f) => {
                        pace.wait_for(f.t_ms(), &stop);
                        CaptureItem::Frame(f)
                    }
                    Err(e) => CaptureItem::Failed(e.to_string()),
                };
                let failed = matches!(item, CaptureItem::Failed(_));
                if !send_blocking(&tx, item, &stop) || failed {
                    return;
                }
            }
            send_blocking(&tx, CaptureItem::End, &stop);
        }),
        Prepared::Camera {
            mut child,
            width,
            height,
        } => {
            let stdout = child.stdout.take();
            let shared = Arc::new(Mutex::new(child));
            camera = Some(shared);
            Box::new(move || {
                let Some(mut stdout) = stdout else {
                    let _ = tx.send(CaptureItem::Failed("camera has no output".into()));
                    return;
                };
                let start = Instant::now();
                let mut buf = vec![0u8; width as usize * height as usize];
                let mut dropped = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    if let Err(e) = stdout.read_exact(&mut buf) {
                        if !stop.load(Ordering::Relaxed) {
                            info!(error = %e, "camera stream ended");
                        }
                        break;
                    }
                    let t = start.elapsed().as_millis() as u64;
                    let frame = match Frame::new(width, height, buf.clone(), t) {
                        Ok(f) => f,
                        Err(e) => {
                            let _ = tx.send(CaptureItem::Failed(e.to_string()));
                            return;
                        }
                    };
                    match tx.try_send(CaptureItem::Frame(frame)) {
                        Ok(()) => {}
                        Err(TrySendError::Full(_)) => {
                            dropped += 1;
                            if dropped.is_power_of_two() {
                                warn!(dropped, "pipeline behind, dropping camera frames");
                            }
                        }
                        Err(TrySendError::Disconnected(_)) => return,
                    }
                }
                send_blocking(&tx, CaptureItem::End, &stop);
            })
        }
    };
    let thread = thread::Builder::new()
        .name("gave-capture".into())
        .spawn(move || {
            let _ = gate.recv();
            body()
        })
        .expect("spawn capture thread");
    CaptureHandle { thread, camera }
}

fn send_blocking(tx: &Sender<CaptureItem>, mut item: CaptureItem, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        match tx.send_timeout(item, Duration::from_millis(50)) {
            Ok(()) => return true,
            Err(SendTimeoutError::Timeout(back)) => item = back,
            Err(SendTimeoutError::Disconnected(_)) => return false,
        }
    }
}

/// Replays recorded timestamps against the wall clock, anchored at the
/// first one seen.
struct Pacer {
    enabled: bool,
    anchor: std::cell::Cell<Option<(Instant, u64)>>,
}

impl Pacer {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            anchor: std::cell::Cell::new(None),
        }
    }

    fn wait_for(&self, t_ms: u64, stop: &AtomicBool) {
        if !self.enabled {
            return;
        }
        let (start, t0) = match self.anchor.get() {
            Some(a) => a,
            None => {
                let a = (Instant::now(), t_ms);
                self.anchor.set(Some(a));
                a
            }
        };
        let due = start + Duration::from_millis(t_ms.saturating_sub(t0));
        while !stop.load(Ordering::Relaxed) {
            let now = Instant::now();
            if now >= due {
                return;
            }
            thread::sleep((due - now).min(Duration::from_millis(50)));
        }
    }
}
