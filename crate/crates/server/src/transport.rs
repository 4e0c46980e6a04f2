//! Socket front end. Each connection owns one session. Clients speak
//! newline-delimited JSON over plain TCP, or the same JSON payloads as
//! WebSocket text frames when the connection opens with an HTTP upgrade.

use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};
use tungstenite::{Message, WebSocket};

use crate::error::Result;
use crate::session::{Session, SessionConfig};
use crate::transcript::Transcript;

const SNIFF_WAIT: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Stop accepting after this many connections (all are still served).
    pub max_connections: Option<usize>,
    /// Write each connection's transcript here as `session-<n>.jsonl`.
    pub transcript_dir: Option<PathBuf>,
}

trait Link {
    /// A complete line, `None` on timeout; `UnexpectedEof` once closed.
    fn poll(&mut self, timeout: Duration) -> io::Result<Option<String>>;
    fn send(&mut self, line: &str) -> io::Result<()>;
}

struct LineLink {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pending: Vec<u8>,
}

fn would_block(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

impl Link for LineLink {
    fn poll(&mut self, timeout: Duration) -> io::Result<Option<String>> {
        self.reader
            .get_ref()
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        match self.reader.read_until(b'\n', &mut self.pending) {
            Ok(0) => Err(ErrorKind::UnexpectedEof.into()),
            Ok(_) if self.pending.ends_with(b"\n") => {
                let line = String::from_utf8_lossy(&self.pending).trim_end().to_string();
                self.pending.clear();
                Ok(Some(line))
            }
            Ok(_) => Ok(None),
            Err(e) if would_block(&e) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn send(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")
    }
}

struct WsLink {
    ws: WebSocket<TcpStream>,
}

impl Link for WsLink {
    fn poll(&mut self, timeout: Duration) -> io::Result<Option<String>> {
        self.ws
            .get_ref()
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        match self.ws.read() {
            Ok(Message::Text(t)) => Ok(Some(t.as_str().trim_end().to_string())),
            Ok(Message::Close(_)) => Err(ErrorKind::UnexpectedEof.into()),
            Ok(_) => Ok(None),
            Err(tungstenite::Error::Io(e)) if would_block(&e) => Ok(None),
            Err(tungstenite::Error::Io(e)) => Err(e),
            Err(e) => Err(io::Error::new(ErrorKind::UnexpectedEof, e.to_string())),
        }
    }

    fn send(&mut self, line: &str) -> io::Result<()> {
        self.ws.send(Message::text(line)).map_err(|e| match e {
            tungstenite::Error::Io(e) => e,
            other => io::Error::new(ErrorKind::BrokenPipe, other.to_string()),
        })
    }
}

fn open_link(stream: TcpStream) -> io::Result<Box<dyn Link>> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(SNIFF_WAIT))?;
    let mut head = [0u8; 4];
    let is_http = match stream.peek(&mut head) {
        Ok(n) => n == 4 && &head == b"GET ",
        Err(e) if would_block(&e) => false,
        Err(e) => return Err(e),
    };
    if is_http {
        stream.set_read_timeout(None)?;
        let ws = tungstenite::accept(stream).map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))?;
        Ok(Box::new(WsLink { ws }))
    } else {
        Ok(Box::new(LineLink {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            pending: Vec::new(),
        }))
    }
}

/// Runs one session over an open link until the peer disconnects. Messages
/// received between two ticks are applied, in order, before the later tick.
fn run_link(link: &mut dyn Link, mut session: Session, transcript: &mut Transcript) -> Result<()> {
    let period = Duration::from_secs_f64(1.0 / session.config().tick_rate);
    let mut deadline = Instant::now() + period;
    loop {
        let now = Instant::now();
        if now >= deadline {
            let state = session.tick()?;
            transcript.record_tick();
            link.send(&state.to_line())?;
            deadline += period;
            if deadline + 4 * period < now {
                deadline = now + period;
            }
            continue;
        }
        match link.poll(deadline - now) {
            Ok(Some(line)) if line.trim().is_empty() => {}
            Ok(Some(line)) => {
                transcript.record(&line);
                for reply in session.handle_line(&line) {
                    link.send(&reply.to_line())?;
                }
            }
            Ok(None) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

fn serve_connection(stream: TcpStream, config: SessionConfig, transcript_path: Option<PathBuf>) -> Result<()> {
    let peer = stream.peer_addr().ok();
    let session = Session::new(config.clone())?;
    let mut link = open_link(stream)?;
    info!("session opened for {peer:?}");
    let mut transcript = Transcript::new(&config);
    let outcome = run_link(link.as_mut(), session, &mut transcript);
    if let Some(path) = transcript_path {
        std::fs::write(&path, transcript.to_text())?;
    }
    info!("session closed for {peer:?}");
    match outcome {
        Err(crate::ServerError::Io(e)) if matches!(e.kind(), ErrorKind::BrokenPipe | ErrorKind::ConnectionReset) => {
            Ok(())
        }
        other => other,
    }
}

/// Accepts connections and serves each on its own thread.
pub fn serve(listener: TcpListener, config: SessionConfig, options: ServeOptions) -> Result<()> {
    config.validate()?;
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let config = config.clone();
        let path = options
            .transcript_dir
            .as_ref()
            .map(|d| d.join(format!("session-{}.jsonl", n + 1)));
        handles.push(thread::spawn(move || {
            if let Err(e) = serve_connection(stream, config, path) {
                warn!("session ended with error: {e}");
            }
        }));
        if options.max_connections.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
