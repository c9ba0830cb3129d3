//! Listener, per-client connection threads and the broadcast worker.
//!
//! A connection whose first bytes are `GET ` is upgraded to a WebSocket and
//! exchanges one JSON message per text frame; anything else is plain TCP
//! with one JSON message per line. Both directions carry the same messages.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender, TryRecvError};
use tracing::{debug, info, warn};

/// Requests from connections to the pipeline worker.
#[derive(Debug)]
pub enum Command {
    Register { id: u64, tx: Sender<Arc<str>> },
    Unregister(u64),
    Control { id: u64, line: String },
    Stop,
}

/// Pipeline worker to broadcast worker. One ordered queue, so a client
/// registered between two events sees exactly the later one.
#[derive(Debug)]
pub enum Outgoing {
    Register {
        id: u64,
        tx: Sender<Arc<str>>,
        hello: Arc<str>,
    },
    Unregister(u64),
    All(Arc<str>),
    To(u64, Arc<str>),
    Shutdown,
}

// ── Broadcast ───────────────────────────────────────────────

pub fn spawn_broadcast(rx: Receiver<Outgoing>) -> JoinHandle<()> {
    thread::Builder::new()
        .name("gave-broadcast".into())
        .spawn(move || {
            let mut clients: BTreeMap<u64, Sender<Arc<str>>> = BTreeMap::new();
            for msg in rx {
                match msg {
                    Outgoing::Register { id, tx, hello } => {
                        if tx.send(hello).is_ok() {
                            clients.insert(id, tx);
                        }
                    }
                    Outgoing::Unregister(id) => {
                        clients.remove(&id);
                    }
                    Outgoing::All(line) => {
                        clients.retain(|_, tx| tx.send(line.clone()).is_ok());
                    }
                    Outgoing::To(id, line) => {
                        if let Some(tx) = clients.get(&id) {
                            if tx.send(line).is_err() {
                                clients.remove(&id);
                            }
                        }
                    }
                    Outgoing::Shutdown => break,
                }
            }
            // dropping the senders ends every connection's writer
        })
        .expect("spawn broadcast thread")
}

// ── Listener ────────────────────────────────────────────────

pub fn spawn_acceptor(listener: TcpListener, cmd: Sender<Command>, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    thread::Builder::new()
        .name("gave-accept".into())
        .spawn(move || {
            if let Err(e) = listener.set_nonblocking(true) {
                warn!(error = %e, "listener cannot be polled; no clients will be accepted");
                return;
            }
            let mut next_id = 0u64;
            let mut conns: Vec<JoinHandle<()>> = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        next_id += 1;
                        let id = next_id;
                        info!(id, %peer, "client connected");
                        let cmd = cmd.clone();
                        conns.push(
                            thread::Builder::new()
                                .name(format!("gave-client-{id}"))
                                .spawn(move || serve_client(stream, id, cmd))
                                .expect("spawn client thread"),
                        );
                        conns.retain(|h| !h.is_finished());
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                    Err(e) => {
                        warn!(error = %e, "accept failed");
                        thread::sleep(Duration::from_millis(50));
                    }
                }
            }
            for h in conns {
                let _ = h.join();
            }
        })
        .expect("spawn acceptor thread")
}

fn serve_client(stream: TcpStream, id: u64, cmd: Sender<Command>) {
    let _ = stream.set_nonblocking(false);
    let result = if looks_like_http(&stream) {
        serve_websocket(stream, id, &cmd).map_err(|e| e.to_string())
    } else {
        serve_lines(stream, id, &cmd).map_err(|e| e.to_string())
    };
    if let Err(e) = result {
        debug!(id, error = %e, "connection closed with error");
    }
    let _ = cmd.send(Command::Unregister(id));
    info!(id, "client disconnected");
}

/// Waits briefly for the client to speak first; silent clients are treated
/// as plain TCP.
fn looks_like_http(stream: &TcpStream) -> bool {
    let deadline = Instant::now() + Duration::from_millis(200);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(20)));
    let mut buf = [0u8; 4];
    let verdict = loop {
        match stream.peek(&mut buf) {
            Ok(0) => break false,
            Ok(n) if n >= 4 => break &buf == b"GET ",
            Ok(n) if !b"GET ".starts_with(&buf[..n]) => break false,
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break false,
        }
        if Instant::now() >= deadline {
            break false;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let _ = stream.set_read_timeout(None);
    verdict
}

fn serve_lines(stream: TcpStream, id: u64, cmd: &Sender<Command>) -> std::io::Result<()> {
    let reader_stream = stream.try_clone()?;
    let (tx, rx) = crossbeam_channel::unbounded::<Arc<str>>();
    if cmd.send(Command::Register { id, tx }).is_err() {
        return Ok(());
    }
    let reader_cmd = cmd.clone();
    let reader = thread::spawn(move || {
        for line in BufReader::new(reader_stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            if reader_cmd.send(Command::Control { id, line }).is_err() {
                break;
            }
        }
        let _ = reader_cmd.send(Command::Unregister(id));
    });
    let mut out = std::io::BufWriter::new(&stream);
    let mut result = Ok(());
    while let Ok(line) = rx.recv() {
        let r = out
            .write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .and_then(|_| if rx.is_empty() { out.flush() } else { Ok(()) });
        if let Err(e) = r {
            result = Err(e);
            break;
        }
    }
    let _ = out.flush();
    drop(out);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    let _ = reader.join();
    result
}

fn serve_websocket(stream: TcpStream, id: u64, cmd: &Sender<Command>) -> Result<(), Box<tungstenite::Error>> {
    use tungstenite::Message as Ws;

    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut()
        .set_read_timeout(Some(Duration::from_millis(20)))
        .map_err(tungstenite::Error::Io)?;
    let (tx, rx) = crossbeam_channel::unbounded::<Arc<str>>();
    if cmd.send(Command::Register { id, tx }).is_err() {
        return Ok(());
    }
    loop {
        loop {
            match rx.try_recv() {
                Ok(line) => ws.write(Ws::Text(line.to_string()))?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    ws.flush()?;
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return Ok(());
                }
            }
        }
        ws.flush()?;
        match ws.read() {
            Ok(Ws::Text(text)) => {
                if cmd
                    .send(Command::Control {
                        id,
                        line: text.to_string(),
                    })
                    .is_err()
                {
                    return Ok(());
                }
            }
            Ok(Ws::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed) => return Ok(()),
            Err(e) => return Err(Box::new(e)),
        }
    }
}
