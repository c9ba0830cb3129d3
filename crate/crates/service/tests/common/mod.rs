#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::time::Duration;

use gave_core::protocol::{Event, Message};
use gave_service::{RunningService, Service, SessionConfig, SourceSpec};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn trace_fixture(i: usize) -> PathBuf {
    fixtures().join(format!("traces/trace_{i:02}.jsonl"))
}

/// A service on an ephemeral port streaming `trace` once `wait_clients`
/// clients are connected, exiting at the end of the trace.
pub fn trace_service(trace: &Path, wait_clients: usize, log: Option<&Path>) -> RunningService {
    let mut cfg = SessionConfig::new(SourceSpec::RatioTrace { path: trace.into() });
    cfg.port = 0;
    cfg.wait_clients = wait_clients;
    cfg.exit_on_end = true;
    cfg.log_path = log.map(Path::to_path_buf);
    Service::start(cfg).expect("service starts")
}

/// A plain line-protocol client.
pub struct LineClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl LineClient {
    pub fn connect(addr: SocketAddr) -> Self {
        let s = TcpStream::connect(addr).expect("connect");
        s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
        Self {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    pub fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
        self.writer.flush().unwrap();
    }

    pub fn next(&mut self) -> Option<Message> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(Message::from_line(line.trim_end()).expect("server sends valid messages")),
        }
    }

    /// Reads until `pred` matches, returning everything read including the
    /// match.
    pub fn until(&mut self, pred: impl Fn(&Message) -> bool) -> Vec<Message> {
        let mut out = Vec::new();
        while let Some(m) = self.next() {
            let hit = pred(&m);
            out.push(m);
            if hit {
                return out;
            }
        }
        panic!("connection closed before the expected message; got {out:?}");
    }

    /// Everything until the server closes the connection.
    pub fn drain(&mut self) -> Vec<Message> {
        std::iter::from_fn(|| self.next()).collect()
    }
}

/// The pipeline's own events: the stream minus the connection greeting and
/// the end-of-source marker.
pub fn pipeline_events(stream: &[Message]) -> Vec<Message> {
    stream
        .iter()
        .filter(|m| !matches!(m.event, Event::Hello { .. } | Event::SourceEnded))
        .cloned()
        .collect()
}

pub fn lines(messages: &[Message]) -> String {
    gave_sim::event_log_string(messages)
}

/// Serves `trace` to one scripted client and returns the stream it saw.
pub fn serve_to_one_client(trace: &Path) -> Vec<Message> {
    let svc = trace_service(trace, 1, None);
    let mut c = LineClient::connect(svc.local_addr());
    let got = c.drain();
    svc.wait().unwrap();
    got
}
