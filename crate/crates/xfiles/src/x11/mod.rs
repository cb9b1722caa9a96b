//! Interposing X wire tracer.
//!
//! A transparent TCP relay sits between an X client and its display server,
//! forwards every byte verbatim, and appends each read — timestamp,
//! direction, length, bytes — to a binary capture file. Decoding is a
//! separate offline pass: [`decode::decode_capture`] frames the raw streams
//! into protocol messages, [`latency::match_latencies`] joins replies to
//! requests through the 16-bit sequence counter, and
//! [`report::font_report`] attributes time to font-related opcodes.
//!
//! Keeping the relay raw-first (no inline parsing) is what keeps its
//! latency overhead small; see [`relay::overhead_probe`] for the
//! measurement harness.

pub mod capture;
pub mod decode;
pub mod fixture;
pub mod latency;
pub mod relay;
pub mod report;

pub use capture::{read_capture, write_capture, CaptureRecord, CaptureWriter, Direction, CAPTURE_MAGIC};
pub use decode::{decode_capture, ByteOrder, DecodeOptions, Decoded, MessageKind, X11Message};
pub use latency::{match_latencies, MatchResult, OrphanReply, RequestLatency, UnansweredRequest};
pub use relay::{overhead_probe, Interposer, OverheadReport, SessionStats};
pub use report::{font_report, opcode_name, OpcodeStats, TraceReport, FONT_OPCODES};

use thiserror::Error;

/// Failures across capture, relay, and decode.
#[derive(Debug, Error)]
pub enum X11Error {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot reach upstream {upstream}: {source}")]
    UpstreamConnect {
        upstream: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a capture file (bad magic)")]
    BadMagic,
    #[error("capture record direction byte {0} is neither 0 nor 1")]
    BadDirection(u8),
    #[error("capture record of {0} bytes exceeds the 4 GiB record limit")]
    OversizeRecord(u64),
    #[error("connection setup byte 0x{0:02x} names no byte order (expected 0x42 or 0x6c)")]
    BadByteOrder(u8),
    #[error(
        "request at client-stream offset {offset} has length field 0 \
         (big-request extension unsupported)"
    )]
    BigRequest { offset: usize },
    #[error(
        "server stream desynchronized at offset {offset}: \
         byte 0x{byte:02x} is not a setup-reply status"
    )]
    Desync { offset: usize, byte: u8 },
    #[error("{0}")]
    Invalid(String),
}
