//! Session startup, the pipeline worker and shutdown.

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{never, select, Receiver, Sender};
use gave_core::estimator::GazeEstimator;
use gave_core::pipeline::{Input, Pipeline};
use gave_core::protocol::{Control, Event, Message, PROTOCOL_VERSION};
use gave_core::vision::{LandmarkProvider, ProcessLandmarker, TemplateLandmarker, TracePlayback};
use gave_sim::{TraceLine, TraceSample};
use tracing::{error, info, warn};

use crate::config::{LandmarkSpec, SessionConfig, SourceSpec};
use crate::log::SessionLogWriter;
use crate::net::{self, Command, Outgoing};
use crate::source::{self, CaptureHandle, CaptureItem, CAPTURE_QUEUE};
use crate::ServiceError;

const OUTGOING_QUEUE: usize = 1024;
const COMMAND_QUEUE: usize = 256;

type Estimator = GazeEstimator<Box<dyn LandmarkProvider + Send>>;

pub struct Service;

impl Service {
    /// Validates `cfg`, opens the source and the log, binds the listener
    /// and starts all workers. Every failure here is a startup error.
    pub fn start(cfg: SessionConfig) -> Result<RunningService, ServiceError> {
        cfg.validate()?;
        let pipeline = cfg.replay.build().map_err(ServiceError::Config)?;
        let estimator = match cfg.source {
            SourceSpec::RatioTrace { .. } => None,
            _ => Some(build_estimator(&cfg)?),
        };
        let addr = format!("{}:{}", cfg.bind, cfg.port);
        let listener = TcpListener::bind(&addr).map_err(|source| ServiceError::Bind { addr, source })?;
        let local_addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
        let log = match &cfg.log_path {
            Some(p) => Some(SessionLogWriter::create(p, &cfg)?),
            None => None,
        };
        let prepared = source::prepare(&cfg.source)?;

        let stop = Arc::new(AtomicBool::new(false));
        let (capture_tx, capture_rx) = crossbeam_channel::bounded(CAPTURE_QUEUE);
        let (gate_tx, gate_rx) = crossbeam_channel::bounded::<()>(0);
        let (cmd_tx, cmd_rx) = crossbeam_channel::bounded(COMMAND_QUEUE);
        let (out_tx, out_rx) = crossbeam_channel::bounded(OUTGOING_QUEUE);

        let capture = source::spawn(prepared, capture_tx, gate_rx, stop.clone(), cfg.realtime);
        let broadcast = net::spawn_broadcast(out_rx);
        let acceptor = net::spawn_acceptor(listener, cmd_tx.clone(), stop.clone());
        let worker = Worker {
            pipeline,
            estimator,
            log,
            log_error: None,
            out: out_tx,
            clients: 0,
            wait_clients: cfg.wait_clients,
            gate: Some(gate_tx),
            exit_on_end: cfg.exit_on_end,
        };
        let worker = thread::Builder::new()
            .name("gave-pipeline".into())
            .spawn(move || worker.run(capture_rx, cmd_rx))
            .expect("spawn pipeline thread");
        info!(%local_addr, "gaze service listening");
        Ok(RunningService {
            local_addr,
            stop,
            cmd: cmd_tx,
            worker: Some(worker),
            broadcast: Some(broadcast),
            acceptor: Some(acceptor),
            capture: Some(capture),
        })
    }
}

fn build_estimator(cfg: &SessionConfig) -> Result<Estimator, ServiceError> {
    let provider: Box<dyn LandmarkProvider + Send> = match &cfg.landmarks {
        LandmarkSpec::Template => Box::new(TemplateLandmarker::default()),
        LandmarkSpec::Trace { path } => {
            Box::new(TracePlayback::from_path(path).map_err(|e| ServiceError::Source(e.to_string()))?)
        }
        LandmarkSpec::Process { command } => Box::new(
            ProcessLandmarker::spawn("sh", ["-c", command.as_str()])
                .map_err(|e| ServiceError::Source(e.to_string()))?,
        ),
    };
    let est = GazeEstimator::new(cfg.estimator, provider);
    Ok(match &cfg.debug_dump {
        Some(dir) => est.with_dump_dir(dir),
        None => est,
    })
}

/// Cloneable handle that asks a running service to shut down.
#[derive(Clone)]
pub struct StopHandle(Sender<Command>);

impl StopHandle {
    pub fn stop(&self) {
        let _ = self.0.send(Command::Stop);
    }
}

pub struct RunningService {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    cmd: Sender<Command>,
    worker: Option<JoinHandle<Result<(), ServiceError>>>,
    broadcast: Option<JoinHandle<()>>,
    acceptor: Option<JoinHandle<()>>,
    capture: Option<CaptureHandle>,
}

impl RunningService {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stop_handle(&self) -> StopHandle {
        StopHandle(self.cmd.clone())
    }

    /// Requests a graceful shutdown; pair with [`RunningService::wait`].
    pub fn stop(&self) {
        let _ = self.cmd.send(Command::Stop);
    }

    /// Blocks until the session has ended (a `stop` control, a stop
    /// request, or the end of the source with `exit_on_end`) and every
    /// worker has exited. Returns the first log write error, if any.
    pub fn wait(mut self) -> Result<(), ServiceError> {
        self.join()
    }

    fn join(&mut self) -> Result<(), ServiceError> {
        let result = match self.worker.take() {
            Some(h) => h
                .join()
                .unwrap_or_else(|_| Err(ServiceError::Io("pipeline worker panicked".into()))),
            None => Ok(()),
        };
        self.stop.store(true, Ordering::Relaxed);
        if let Some(c) = self.capture.take() {
            c.kill();
            let _ = c.thread.join();
        }
        if let Some(h) = self.broadcast.take() {
            let _ = h.join();
        }
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        result
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        if self.worker.is_some() {
            self.stop();
            let _ = self.join();
        }
    }
}

// ── Pipeline worker ─────────────────────────────────────────

struct Worker {
    pipeline: Pipeline,
    estimator: Option<Estimator>,
    log: Option<SessionLogWriter>,
    log_error: Option<ServiceError>,
    out: Sender<Outgoing>,
    clients: usize,
    wait_clients: usize,
    /// Dropped to let the capture thread start.
    gate: Option<Sender<()>>,
    exit_on_end: bool,
}

impl Worker {
    fn run(mut self, capture: Receiver<CaptureItem>, commands: Receiver<Command>) -> Result<(), ServiceError> {
        if self.wait_clients == 0 {
            self.gate = None;
        }
        let mut capture = Some(capture);
        loop {
            let cap = capture.clone().unwrap_or_else(never);
            select! {
                recv(cap) -> item => {
                    let ended = match item {
                        Ok(CaptureItem::Line(line)) => { self.trace_line(line); false }
                        Ok(CaptureItem::Frame(frame)) => self.frame(&frame),
                        Ok(CaptureItem::Failed(reason)) => {
                            error!(%reason, "source failed");
                            self.broadcast(Message::untimed(Event::Error { message: format!("source failed: {reason}") }));
                            true
                        }
                        Ok(CaptureItem::End) | Err(_) => true,
                    };
                    if ended {
                        capture = None;
                        info!("source ended");
                        self.broadcast(Message::untimed(Event::SourceEnded));
                        if self.exit_on_end {
                            break;
                        }
                    }
                }
                recv(commands) -> cmd => match cmd {
                    Ok(Command::Register { id, tx }) => self.register(id, tx),
                    Ok(Command::Unregister(id)) => { let _ = self.out.send(Outgoing::Unregister(id)); }
                    Ok(Command::Control { id, line }) => {
                        if self.client_control(id, &line) {
                            break;
                        }
                    }
                    Ok(Command::Stop) | Err(_) => break,
                },
            }
        }
        self.shutdown()
    }

    fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.flush() {
                self.log_error.get_or_insert(e);
            }
        }
        let _ = self.out.send(Outgoing::Shutdown);
        info!("session closed");
        self.log_error.map_or(Ok(()), Err)
    }

    fn register(&mut self, id: u64, tx: Sender<std::sync::Arc<str>>) {
        let cfg = self.pipeline.config();
        let hello = Message::untimed(Event::Hello {
            version: PROTOCOL_VERSION,
            dwell_ms: cfg.dwell.threshold_ms,
            area: cfg.area,
        });
        let _ = self.out.send(Outgoing::Register {
            id,
            tx,
            hello: hello.to_line().into(),
        });
        self.clients += 1;
        if self.clients >= self.wait_clients {
            self.gate = None;
        }
    }

    /// Applies a client control. Malformed or rejected controls are answered
    /// to the sender only and leave the session untouched. Returns true on
    /// `stop`.
    fn client_control(&mut self, id: u64, line: &str) -> bool {
        let control = match Control::from_line(line) {
            Ok(c) => c,
            Err(e) => {
                self.reply_error(id, format!("invalid control: {e}"));
                return false;
            }
        };
        if control == (Control::Stop {}) {
            self.log_input(&TraceLine::Control(control));
            info!(id, "stop requested by client");
            return true;
        }
        match self.pipeline.control(control.clone()) {
            Ok(messages) => {
                self.log_input(&TraceLine::Control(control.clone()));
                self.after_control(&control);
                self.emit(messages);
            }
            Err(e) => self.reply_error(id, e),
        }
        false
    }

    fn reply_error(&mut self, id: u64, message: String) {
        warn!(id, %message, "rejected control");
        let m = Message::untimed(Event::Error { message });
        let _ = self.out.send(Outgoing::To(id, m.to_line().into()));
    }

    /// Recorded lines go through exactly the path a headless replay takes.
    fn trace_line(&mut self, line: TraceLine) {
        self.log_input(&line);
        if let TraceLine::Control(c) = &line {
            self.after_control(c);
        }
        let messages = self.pipeline.feed(line.to_input());
        self.emit(messages);
    }

    /// Returns true when the frame source has to be abandoned.
    fn frame(&mut self, frame: &gave_core::vision::Frame) -> bool {
        let Some(est) = self.estimator.as_mut() else {
            return false;
        };
        match est.estimate(frame) {
            Ok(obs) => {
                self.log_input(&TraceLine::Sample(TraceSample::from(&obs)));
                let messages = self.pipeline.feed(Input::Observation(obs));
                self.emit(messages);
                false
            }
            Err(e) => {
                error!(error = %e, "landmark provider failed");
                self.broadcast(Message::untimed(Event::Error {
                    message: format!("landmark provider failed: {e}"),
                }));
                true
            }
        }
    }

    fn after_control(&mut self, c: &Control) {
        if matches!(c, Control::StartCalibration {}) {
            if let Some(est) = self.estimator.as_mut() {
                est.relearn();
            }
        }
    }

    fn emit(&mut self, messages: Vec<Message>) {
        for m in messages {
            if let Event::CalibrationDone { .. } = m.event {
                if let Some(th) = self.estimator.as_mut().and_then(|e| e.freeze()) {
                    info!(left = th[0], right = th[1], "pupil thresholds frozen");
                }
            }
            self.log_event(&m);
            self.broadcast(m);
        }
    }

    fn broadcast(&mut self, m: Message) {
        let _ = self.out.send(Outgoing::All(m.to_line().into()));
    }

    fn log_input(&mut self, line: &TraceLine) {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.input(line) {
                self.log_failed(e);
            }
        }
    }

    fn log_event(&mut self, m: &Message) {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.event(m) {
                self.log_failed(e);
            }
        }
    }

    fn log_failed(&mut self, e: ServiceError) {
        error!(error = %e, "session log write failed; logging disabled");
        self.log = None;
        self.log_error.get_or_insert(e);
    }
}
