//! Scripted protocol fixtures: wire-message builders, a fake display
//! server with per-opcode reply delays, a lock-step fake client, and a
//! framed echo server for timing probes. These stand in for a real X
//! client and server when exercising the relay and decoder.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::decode::{pad4, ByteOrder};

/// Builds a connection setup request: 12-byte header, padded
/// authorization name, padded authorization data.
pub fn build_setup_request(order: ByteOrder, auth_name: &[u8], auth_data: &[u8]) -> Vec<u8> {
    let name_len = u16::try_from(auth_name.len()).expect("auth name too long");
    let data_len = u16::try_from(auth_data.len()).expect("auth data too long");
    let total = 12 + pad4(auth_name.len()) + pad4(auth_data.len());
    let mut b = Vec::with_capacity(total);
    b.push(order.setup_byte());
    b.push(0);
    b.extend_from_slice(&order.write_u16(11)); // protocol major version
    b.extend_from_slice(&order.write_u16(0)); // protocol minor version
    b.extend_from_slice(&order.write_u16(name_len));
    b.extend_from_slice(&order.write_u16(data_len));
    b.extend_from_slice(&[0, 0]);
    b.extend_from_slice(auth_name);
    b.resize(12 + pad4(auth_name.len()), 0);
    b.extend_from_slice(auth_data);
    b.resize(total, 0);
    b
}

/// Builds a successful setup reply: 8-byte prefix plus `extra_words`
/// 4-byte words of (zeroed) body.
pub fn build_setup_reply(order: ByteOrder, extra_words: u16) -> Vec<u8> {
    let total = 8 + 4 * extra_words as usize;
    let mut b = Vec::with_capacity(total);
    b.push(1); // success
    b.push(0);
    b.extend_from_slice(&order.write_u16(11));
    b.extend_from_slice(&order.write_u16(0));
    b.extend_from_slice(&order.write_u16(extra_words));
    b.resize(total, 0);
    b
}

/// Builds a request: opcode, detail byte, body padded to a 4-byte
/// multiple, length field in 4-byte units covering the whole frame.
pub fn build_request(order: ByteOrder, opcode: u8, detail: u8, body: &[u8]) -> Vec<u8> {
    let padded = pad4(body.len());
    let units = u16::try_from(1 + padded / 4).expect("request body too long");
    let mut b = Vec::with_capacity(4 + padded);
    b.push(opcode);
    b.push(detail);
    b.extend_from_slice(&order.write_u16(units));
    b.extend_from_slice(body);
    b.resize(4 + padded, 0);
    b
}

/// Builds a reply: 32 fixed bytes plus `extra_words` 4-byte words.
pub fn build_reply(order: ByteOrder, detail: u8, sequence: u16, extra_words: u32) -> Vec<u8> {
    let total = 32 + 4 * extra_words as usize;
    let mut b = Vec::with_capacity(total);
    b.push(1);
    b.push(detail);
    b.extend_from_slice(&order.write_u16(sequence));
    b.extend_from_slice(&order.write_u32(extra_words));
    b.resize(total, 0);
    b
}

/// Builds a 32-byte event.
pub fn build_event(order: ByteOrder, code: u8, sequence: u16) -> Vec<u8> {
    let mut b = vec![code, 0];
    b.extend_from_slice(&order.write_u16(sequence));
    b.resize(32, 0);
    b
}

/// Builds a 32-byte error.
pub fn build_error(order: ByteOrder, error_code: u8, sequence: u16) -> Vec<u8> {
    let mut b = vec![0, error_code];
    b.extend_from_slice(&order.write_u16(sequence));
    b.resize(32, 0);
    b
}

/// How the fake server answers one request opcode.
#[derive(Debug, Clone, Copy)]
pub struct ReplySpec {
    /// Service time injected before the reply is written.
    pub delay: Duration,
    /// Extra 4-byte words in the reply body.
    pub extra_words: u32,
}

/// Per-session account of what the fake server saw and sent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerLog {
    pub requests_seen: u64,
    pub replies_sent: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

/// A loopback display-server stand-in. Serves exactly one connection on a
/// background thread: performs the setup exchange, then answers every
/// request whose opcode has a [`ReplySpec`] — after that spec's delay,
/// with the correct wrapping sequence number — and stays silent on the
/// rest.
pub struct FakeXServer {
    addr: SocketAddr,
    handle: JoinHandle<io::Result<ServerLog>>,
}

impl FakeXServer {
    pub fn spawn(
        replies: HashMap<u8, ReplySpec>,
        setup_extra_words: u16,
    ) -> io::Result<FakeXServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = thread::spawn(move || serve_one(&listener, &replies, setup_extra_words));
        Ok(FakeXServer { addr, handle })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Waits for the session to finish.
    pub fn join(self) -> io::Result<ServerLog> {
        self.handle
            .join()
            .unwrap_or_else(|_| Err(io::Error::other("fake server thread panicked")))
    }
}

fn serve_one(
    listener: &TcpListener,
    replies: &HashMap<u8, ReplySpec>,
    setup_extra_words: u16,
) -> io::Result<ServerLog> {
    let (mut stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let mut log = ServerLog::default();

    let mut header = [0u8; 12];
    stream.read_exact(&mut header)?;
    let order = match header[0] {
        0x42 => ByteOrder::Msb,
        0x6C => ByteOrder::Lsb,
        b => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("setup byte {b:#04x} names no byte order"),
            ))
        }
    };
    let name_len = order.read_u16(&header[6..8]) as usize;
    let data_len = order.read_u16(&header[8..10]) as usize;
    let mut auth = vec![0u8; pad4(name_len) + pad4(data_len)];
    stream.read_exact(&mut auth)?;
    log.bytes_in += (header.len() + auth.len()) as u64;

    let setup_reply = build_setup_reply(order, setup_extra_words);
    stream.write_all(&setup_reply)?;
    log.bytes_out += setup_reply.len() as u64;

    let mut issued: u64 = 0;
    loop {
        let mut head = [0u8; 4];
        if !read_exact_or_eof(&mut stream, &mut head)? {
            break;
        }
        let opcode = head[0];
        let units = order.read_u16(&head[2..4]) as usize;
        if units == 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "request length field 0"));
        }
        let mut rest = vec![0u8; 4 * units - 4];
        stream.read_exact(&mut rest)?;
        issued += 1;
        log.requests_seen += 1;
        log.bytes_in += (4 * units) as u64;
        if let Some(spec) = replies.get(&opcode) {
            if !spec.delay.is_zero() {
                thread::sleep(spec.delay);
            }
            let reply = build_reply(order, 0, (issued & 0xFFFF) as u16, spec.extra_words);
            stream.write_all(&reply)?;
            log.replies_sent += 1;
            log.bytes_out += reply.len() as u64;
        }
    }
    Ok(log)
}

/// One scripted request from the fake client.
#[derive(Debug, Clone)]
pub struct ScriptStep {
    pub opcode: u8,
    pub detail: u8,
    pub body: Vec<u8>,
    /// Block for the reply before moving on.
    pub expect_reply: bool,
}

impl ScriptStep {
    /// A bare request with an empty body.
    pub fn new(opcode: u8, expect_reply: bool) -> ScriptStep {
        ScriptStep { opcode, detail: 0, body: Vec::new(), expect_reply }
    }
}

/// What the scripted client observed.
#[derive(Debug, Clone, Default)]
pub struct ClientLog {
    pub setup_reply_bytes: usize,
    /// (sequence, client-measured round-trip microseconds) per reply.
    pub replies: Vec<(u16, u64)>,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

/// Connects, performs the setup exchange, then plays the script in lock
/// step: each request that expects a reply blocks until that reply
/// arrives, so at most one message is in flight per direction at any
/// moment. The measured round trips are therefore per-request latencies.
pub fn run_fake_client(
    addr: SocketAddr,
    order: ByteOrder,
    script: &[ScriptStep],
) -> io::Result<ClientLog> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut log = ClientLog::default();

    let setup = build_setup_request(order, b"MIT-MAGIC-COOKIE-1", b"0123456789abcdef");
    stream.write_all(&setup)?;
    log.bytes_sent += setup.len() as u64;

    let mut reply_head = [0u8; 8];
    stream.read_exact(&mut reply_head)?;
    if reply_head[0] != 1 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("setup refused with status {}", reply_head[0]),
        ));
    }
    let extra = order.read_u16(&reply_head[6..8]) as usize;
    let mut body = vec![0u8; 4 * extra];
    stream.read_exact(&mut body)?;
    log.setup_reply_bytes = reply_head.len() + body.len();
    log.bytes_received += log.setup_reply_bytes as u64;

    for step in script {
        let request = build_request(order, step.opcode, step.detail, &step.body);
        let sent_at = Instant::now();
        stream.write_all(&request)?;
        log.bytes_sent += request.len() as u64;
        if step.expect_reply {
            let mut head = [0u8; 32];
            stream.read_exact(&mut head)?;
            if head[0] != 1 {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("expected a reply, got first byte {}", head[0]),
                ));
            }
            let seq = order.read_u16(&head[2..4]);
            let extra = order.read_u32(&head[4..8]) as usize;
            let mut rest = vec![0u8; 4 * extra];
            stream.read_exact(&mut rest)?;
            log.replies.push((seq, sent_at.elapsed().as_micros() as u64));
            log.bytes_received += (head.len() + rest.len()) as u64;
        }
    }

    stream.shutdown(Shutdown::Write)?;
    // Drain until the server closes so the relay sees an orderly shutdown.
    let mut sink = [0u8; 4096];
    loop {
        match stream.read(&mut sink) {
            Ok(0) => break,
            Ok(n) => log.bytes_received += n as u64,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(_) => break,
        }
    }
    Ok(log)
}

/// Echoes fixed-size frames back after an optional service delay. Serves
/// any number of connections, one thread each, until stopped. The delay
/// stands in for server-side work, which keeps round-trip comparisons
/// about added per-message cost rather than bare syscall counts.
pub struct EchoServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: JoinHandle<()>,
}

impl EchoServer {
    pub fn spawn(frame_bytes: usize, service_delay: Duration) -> io::Result<EchoServer> {
        assert!(frame_bytes > 0, "frame size must be positive");
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_seen = Arc::clone(&stop);
        let handle = thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_seen.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { break };
                thread::spawn(move || echo_frames(stream, frame_bytes, service_delay));
            }
        });
        Ok(EchoServer { addr, stop, handle })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting and joins the acceptor; live connections drain on
    /// their own threads.
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr); // unblock accept
        let _ = self.handle.join();
    }
}

fn echo_frames(mut stream: TcpStream, frame_bytes: usize, delay: Duration) {
    let _ = stream.set_nodelay(true);
    let mut buf = vec![0u8; frame_bytes];
    loop {
        match read_exact_or_eof(&mut stream, &mut buf) {
            Ok(true) => {}
            _ => break,
        }
        if !delay.is_zero() {
            thread::sleep(delay);
        }
        if stream.write_all(&buf).is_err() {
            break;
        }
    }
}

/// Fills `buf`, returning false on a clean end-of-stream before the first
/// byte and an error if the stream ends partway through.
fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut got = 0;
    while got < buf.len() {
        match reader.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => {
                return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "mid-message end of stream"))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}
