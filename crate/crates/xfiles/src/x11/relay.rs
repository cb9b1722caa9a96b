//! Transparent interposing relay.
//!
//! The relay accepts an application's connection, opens its own connection
//! to the real display server, and runs two independent copy loops — one
//! per direction — that forward every byte verbatim and in order. Each
//! completed read is appended to the capture (timestamp, direction,
//! length, bytes) and flushed, so a session that dies leaves every
//! complete record on disk. The copy loops share nothing but the
//! append-serialized capture sink.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::capture::{CaptureWriter, Direction};
use super::fixture::EchoServer;
use super::X11Error;

/// Bytes and records observed across one relayed session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionStats {
    pub capture_path: PathBuf,
    pub client_to_server_bytes: u64,
    pub server_to_client_bytes: u64,
    pub records: u64,
}

/// A bound listener that relays each accepted client to one upstream
/// endpoint.
pub struct Interposer {
    listener: TcpListener,
    upstream: String,
}

impl Interposer {
    /// Binds the listen endpoint. The upstream address is resolved per
    /// session, but nonsense input fails here.
    pub fn bind(listen: &str, upstream: &str) -> Result<Interposer, X11Error> {
        upstream.to_socket_addrs().map_err(|source| X11Error::UpstreamConnect {
            upstream: upstream.to_string(),
            source,
        })?;
        let listener = TcpListener::bind(listen)?;
        Ok(Interposer { listener, upstream: upstream.to_string() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts one client and relays the session to completion, capturing
    /// to `capture_path`. If the upstream connection fails, the client is
    /// closed, the capture is left valid but empty, and the error is
    /// returned.
    pub fn serve_next(&self, capture_path: &Path) -> Result<SessionStats, X11Error> {
        let (client, _) = self.listener.accept()?;
        relay_session(client, &self.upstream, capture_path)
    }

    /// Serves `sessions` consecutive clients, each relayed on its own
    /// thread with its own capture file: the first gets `capture_base`
    /// verbatim, later ones `.1`, `.2`, … appended. Returns per-session
    /// outcomes in accept order once all sessions end.
    pub fn run(
        &self,
        capture_base: &Path,
        sessions: u64,
    ) -> Result<Vec<Result<SessionStats, X11Error>>, X11Error> {
        let mut handles = Vec::new();
        for index in 0..sessions {
            let (client, _) = self.listener.accept()?;
            let path = session_capture_path(capture_base, index);
            let upstream = self.upstream.clone();
            handles.push(thread::spawn(move || relay_session(client, &upstream, &path)));
        }
        Ok(handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(X11Error::Invalid("relay session thread panicked".into()))
                })
            })
            .collect())
    }
}

/// Capture path for the `index`-th session under one base name.
pub fn session_capture_path(base: &Path, index: u64) -> PathBuf {
    if index == 0 {
        base.to_path_buf()
    } else {
        let mut name = base.as_os_str().to_owned();
        name.push(format!(".{index}"));
        PathBuf::from(name)
    }
}

struct SinkState {
    /// `None` once a capture write has failed; both copy loops stop.
    writer: Option<CaptureWriter<BufWriter<File>>>,
    records: u64,
}

fn relay_session(
    client: TcpStream,
    upstream: &str,
    capture_path: &Path,
) -> Result<SessionStats, X11Error> {
    let mut writer = CaptureWriter::new(BufWriter::new(File::create(capture_path)?))?;
    // Magic on disk immediately: even a session that dies before its first
    // byte leaves a readable, zero-record capture.
    writer.flush()?;

    let upstream_stream = match TcpStream::connect(upstream) {
        Ok(s) => s,
        Err(source) => {
            drop(client);
            return Err(X11Error::UpstreamConnect { upstream: upstream.to_string(), source });
        }
    };
    client.set_nodelay(true).ok();
    upstream_stream.set_nodelay(true).ok();

    let start = Instant::now();
    let sink = Arc::new(Mutex::new(SinkState { writer: Some(writer), records: 0 }));
    let c2s = spawn_copy(
        client.try_clone()?,
        upstream_stream.try_clone()?,
        Direction::ClientToServer,
        start,
        Arc::clone(&sink),
    );
    let s2c = spawn_copy(upstream_stream, client, Direction::ServerToClient, start, Arc::clone(&sink));

    let (c2s_bytes, c2s_err) =
        c2s.join().map_err(|_| X11Error::Invalid("relay copy thread panicked".into()))?;
    let (s2c_bytes, s2c_err) =
        s2c.join().map_err(|_| X11Error::Invalid("relay copy thread panicked".into()))?;

    let (records, close_err) = {
        let mut state = sink.lock().expect("capture sink mutex");
        let close_err = match state.writer.as_mut() {
            Some(w) => w.flush().err(),
            None => None,
        };
        state.writer = None;
        (state.records, close_err)
    };

    if let Some(e) = c2s_err.or(s2c_err).or(close_err) {
        return Err(X11Error::Io(e));
    }
    Ok(SessionStats {
        capture_path: capture_path.to_path_buf(),
        client_to_server_bytes: c2s_bytes,
        server_to_client_bytes: s2c_bytes,
        records,
    })
}

/// One directional copy loop: read, stamp, forward, append. Returns bytes
/// forwarded and the capture error that stopped it, if one did.
fn spawn_copy(
    mut src: TcpStream,
    mut dst: TcpStream,
    direction: Direction,
    start: Instant,
    sink: Arc<Mutex<SinkState>>,
) -> JoinHandle<(u64, Option<io::Error>)> {
    thread::Builder::new()
        .name(format!("relay-{direction}"))
        .spawn(move || {
            let mut buf = vec![0u8; 64 * 1024];
            let mut bytes = 0u64;
            let mut capture_error = None;
            loop {
                let n = match src.read(&mut buf) {
                    Ok(0) => break,
                    Ok(n) => n,
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                    // A reset peer ends the stream; the relay itself is fine.
                    Err(_) => break,
                };
                let timestamp_us = start.elapsed().as_micros() as u64;
                // Forward before capturing: the peer should not wait on disk.
                if dst.write_all(&buf[..n]).is_err() {
                    break;
                }
                bytes += n as u64;
                let mut state = sink.lock().expect("capture sink mutex");
                let appended = state
                    .writer
                    .as_mut()
                    .map(|w| w.append(timestamp_us, direction, &buf[..n]).and_then(|_| w.flush()));
                match appended {
                    Some(Ok(())) => state.records += 1,
                    Some(Err(e)) => {
                        // Capture failure terminates the session; records
                        // already flushed stay intact on disk.
                        state.writer = None;
                        drop(state);
                        capture_error = Some(e);
                        src.shutdown(Shutdown::Both).ok();
                        dst.shutdown(Shutdown::Both).ok();
                        break;
                    }
                    None => {
                        // The other direction already hit a capture failure.
                        drop(state);
                        src.shutdown(Shutdown::Both).ok();
                        dst.shutdown(Shutdown::Both).ok();
                        break;
                    }
                }
            }
            // Propagate the half-close so the peer sees the same stream end
            // it would on a direct connection.
            dst.shutdown(Shutdown::Write).ok();
            (bytes, capture_error)
        })
        .expect("spawn relay copy thread")
}

/// Outcome of [`overhead_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub payload_bytes: usize,
    pub repetitions: usize,
    pub direct_median_us: f64,
    pub interposed_median_us: f64,
    /// interposed / direct. Below 1 means the interposed run happened to
    /// measure faster (noise); reported as measured, never clamped.
    pub ratio: f64,
    /// `(ratio - 1) * 100`.
    pub overhead_percent: f64,
}

/// Service time injected by the probe's echo peer. It stands in for a
/// busy display server, so the comparison measures the relay's added
/// per-message cost against a realistic round trip rather than against a
/// bare pair of loopback syscalls.
const ECHO_SERVICE_DELAY: Duration = Duration::from_millis(2);

/// Measures the relay's latency cost on loopback: `repetitions` framed
/// round trips against an echo service, first connected directly, then
/// through the relay (capturing to a scratch file), reporting the medians
/// and their ratio. One warm-up round trip per connection is discarded.
pub fn overhead_probe(payload_bytes: usize, repetitions: usize) -> Result<OverheadReport, X11Error> {
    if payload_bytes == 0 || repetitions == 0 {
        return Err(X11Error::Invalid(
            "overhead probe needs a positive payload size and repetition count".into(),
        ));
    }
    let echo = EchoServer::spawn(payload_bytes, ECHO_SERVICE_DELAY)?;

    let direct = time_round_trips(echo.addr(), payload_bytes, repetitions);

    let interposer = Interposer::bind("127.0.0.1:0", &echo.addr().to_string())?;
    let listen = interposer.local_addr()?;
    let capture_path = scratch_capture_path();
    let session_path = capture_path.clone();
    let session = thread::spawn(move || interposer.serve_next(&session_path));
    let interposed = time_round_trips(listen, payload_bytes, repetitions);

    let session_result = session
        .join()
        .unwrap_or_else(|_| Err(X11Error::Invalid("relay session thread panicked".into())));
    let _ = std::fs::remove_file(&capture_path);
    echo.stop();

    let direct = direct?;
    let interposed = interposed?;
    session_result?;

    let direct_median_us = median_us(direct);
    let interposed_median_us = median_us(interposed);
    let ratio = interposed_median_us / direct_median_us;
    Ok(OverheadReport {
        payload_bytes,
        repetitions,
        direct_median_us,
        interposed_median_us,
        ratio,
        overhead_percent: (ratio - 1.0) * 100.0,
    })
}

fn time_round_trips(
    addr: SocketAddr,
    payload_bytes: usize,
    repetitions: usize,
) -> Result<Vec<u64>, X11Error> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let frame = vec![0xA5u8; payload_bytes];
    let mut back = vec![0u8; payload_bytes];
    let mut samples = Vec::with_capacity(repetitions);
    for i in 0..=repetitions {
        let t = Instant::now();
        stream.write_all(&frame)?;
        stream.read_exact(&mut back)?;
        if i > 0 {
            samples.push(t.elapsed().as_micros() as u64);
        }
    }
    stream.shutdown(Shutdown::Write).ok();
    Ok(samples)
}

fn median_us(mut samples: Vec<u64>) -> f64 {
    samples.sort_unstable();
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2] as f64
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) as f64 / 2.0
    }
}

fn scratch_capture_path() -> PathBuf {
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let n = SEQ.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("xfiles-overhead-{}-{n}.xft", std::process::id()))
}
