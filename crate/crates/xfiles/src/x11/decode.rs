//! Offline protocol decode of a raw capture.
//!
//! Core X11 framing only. After the connection setup exchange, client
//! bytes parse as requests (4-byte header, total length in 4-byte units)
//! and server bytes parse as replies (32 bytes plus the extra length at
//! offset 4, in 4-byte units), events, and errors (32 bytes each). The
//! big-request extension's length-0 escape is out of scope and reported as
//! a hard error, as is an unknown byte-order byte or a server stream that
//! does not start with a setup-reply status.
//!
//! The decoder sees record boundaries only as timing: a message is stamped
//! with the timestamp of the record that carried its final byte (the read
//! that completed it), so re-chunking a capture never changes the decoded
//! messages, only — at most — nothing.

use serde::Serialize;

use super::capture::{CaptureRecord, Direction};
use super::X11Error;

/// Multi-byte field order, from the setup request's first byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ByteOrder {
    /// `0x42`: most-significant byte first.
    #[serde(rename = "msb")]
    Msb,
    /// `0x6c`: least-significant byte first.
    #[serde(rename = "lsb")]
    Lsb,
}

impl ByteOrder {
    /// The setup-request first byte announcing this order.
    pub fn setup_byte(self) -> u8 {
        match self {
            ByteOrder::Msb => 0x42,
            ByteOrder::Lsb => 0x6C,
        }
    }

    pub fn read_u16(self, b: &[u8]) -> u16 {
        let pair = [b[0], b[1]];
        match self {
            ByteOrder::Msb => u16::from_be_bytes(pair),
            ByteOrder::Lsb => u16::from_le_bytes(pair),
        }
    }

    pub fn read_u32(self, b: &[u8]) -> u32 {
        let quad = [b[0], b[1], b[2], b[3]];
        match self {
            ByteOrder::Msb => u32::from_be_bytes(quad),
            ByteOrder::Lsb => u32::from_le_bytes(quad),
        }
    }

    pub fn write_u16(self, v: u16) -> [u8; 2] {
        match self {
            ByteOrder::Msb => v.to_be_bytes(),
            ByteOrder::Lsb => v.to_le_bytes(),
        }
    }

    pub fn write_u32(self, v: u32) -> [u8; 4] {
        match self {
            ByteOrder::Msb => v.to_be_bytes(),
            ByteOrder::Lsb => v.to_le_bytes(),
        }
    }
}

/// What a framed message is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    SetupRequest,
    SetupReply,
    Request,
    Reply,
    Event,
    Error,
}

/// One decoded wire message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct X11Message {
    /// Microseconds since capture start, from the record that carried the
    /// message's final byte.
    pub timestamp_us: u64,
    pub direction: Direction,
    pub kind: MessageKind,
    /// Requests: the core opcode. Server messages: the first byte (1 for
    /// replies, 0 for errors, the event code — send-event bit included —
    /// for events). Setup messages: their own first byte.
    pub opcode_or_code: u8,
    /// Requests are numbered 1, 2, 3, … wrapping mod 65536 (so the count
    /// passes through 0); replies, errors, and most events carry the
    /// number read from the wire. `None` for setup messages and for
    /// events whose layout has no sequence field.
    pub sequence: Option<u16>,
    /// Total framed size, header included.
    pub byte_length: usize,
    /// Leading payload bytes retained for reporting, bounded by
    /// [`DecodeOptions`]; setup requests never retain more than their
    /// 12-byte header so authentication data stays out of decoded output.
    #[serde(serialize_with = "hex_bytes")]
    pub payload_digest: Vec<u8>,
}

fn hex_bytes<S: serde::Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    use std::fmt::Write as _;
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    s.serialize_str(&out)
}

/// Decode knobs.
#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions {
    /// Leading bytes of each message kept in [`X11Message::payload_digest`].
    pub payload_prefix: usize,
    /// Keep whole payloads instead (setup requests stay header-only).
    pub full_payload: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { payload_prefix: 64, full_payload: false }
    }
}

/// A decoded capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// `None` only for a capture with no client bytes.
    pub byte_order: Option<ByteOrder>,
    /// Both directions merged by timestamp; client-to-server first on ties.
    pub messages: Vec<X11Message>,
    /// Non-fatal oddities (truncations and the like).
    pub diagnostics: Vec<String>,
    /// The client stream ended partway through a message.
    pub truncated_client: bool,
    /// The server stream ended partway through a message.
    pub truncated_server: bool,
}

/// Rounds up to the protocol's 4-byte padding.
pub(crate) fn pad4(n: usize) -> usize {
    (n + 3) & !3
}

/// Byte length of the setup request's header.
const SETUP_REQUEST_HEADER: usize = 12;
/// Byte length of the setup reply's fixed prefix.
const SETUP_REPLY_HEADER: usize = 8;
/// Fixed size of replies (minimum), events, and errors.
const SERVER_UNIT: usize = 32;
/// Event code whose 32-byte layout carries keyboard state, not a sequence.
const KEYMAP_NOTIFY: u8 = 11;

/// One direction's bytes re-fused from the capture, with enough boundary
/// information to timestamp any byte by the record that delivered it.
struct DirStream {
    bytes: Vec<u8>,
    /// (cumulative end offset, record timestamp), in stream order.
    ends: Vec<(usize, u64)>,
}

impl DirStream {
    fn gather(records: &[CaptureRecord], direction: Direction) -> DirStream {
        let mut bytes = Vec::new();
        let mut ends = Vec::new();
        for r in records.iter().filter(|r| r.direction == direction) {
            if r.payload.is_empty() {
                continue;
            }
            bytes.extend_from_slice(&r.payload);
            ends.push((bytes.len(), r.timestamp_us));
        }
        DirStream { bytes, ends }
    }

    /// Timestamp of the record containing byte `end - 1`.
    fn stamp(&self, end: usize) -> u64 {
        debug_assert!(end >= 1 && end <= self.bytes.len());
        let i = self.ends.partition_point(|&(e, _)| e < end);
        self.ends[i].1
    }
}

/// Decodes a capture into an ordered message list. See the module docs for
/// the framing rules; truncated trailing messages are flagged, not fatal.
pub fn decode_capture(
    records: &[CaptureRecord],
    options: &DecodeOptions,
) -> Result<Decoded, X11Error> {
    let client = DirStream::gather(records, Direction::ClientToServer);
    let server = DirStream::gather(records, Direction::ServerToClient);

    let mut decoded = Decoded {
        byte_order: None,
        messages: Vec::new(),
        diagnostics: Vec::new(),
        truncated_client: false,
        truncated_server: false,
    };

    if client.bytes.is_empty() {
        if !server.bytes.is_empty() {
            return Err(X11Error::Invalid(
                "capture has server-to-client bytes but no client setup prefix".into(),
            ));
        }
        return Ok(decoded);
    }

    let mut client_messages = Vec::new();
    let order = decode_client(&client, options, &mut client_messages, &mut decoded)?;
    decoded.byte_order = Some(order);

    let mut server_messages = Vec::new();
    decode_server(&server, order, options, &mut server_messages, &mut decoded)?;

    decoded.messages = merge_by_time(client_messages, server_messages);
    Ok(decoded)
}

/// Parses the client stream: one setup request, then requests. Returns the
/// byte order announced by the setup byte.
fn decode_client(
    stream: &DirStream,
    options: &DecodeOptions,
    out: &mut Vec<X11Message>,
    decoded: &mut Decoded,
) -> Result<ByteOrder, X11Error> {
    let bytes = &stream.bytes;
    let order = match bytes[0] {
        0x42 => ByteOrder::Msb,
        0x6C => ByteOrder::Lsb,
        other => return Err(X11Error::BadByteOrder(other)),
    };
    if bytes.len() < SETUP_REQUEST_HEADER {
        decoded.truncated_client = true;
        decoded.diagnostics.push(format!(
            "client stream ends inside the setup-request header ({} of {SETUP_REQUEST_HEADER} bytes)",
            bytes.len()
        ));
        return Ok(order);
    }
    let auth_name_len = order.read_u16(&bytes[6..8]) as usize;
    let auth_data_len = order.read_u16(&bytes[8..10]) as usize;
    let setup_len = SETUP_REQUEST_HEADER + pad4(auth_name_len) + pad4(auth_data_len);
    if bytes.len() < setup_len {
        decoded.truncated_client = true;
        decoded.diagnostics.push(format!(
            "client stream ends inside the setup request ({} of {setup_len} bytes)",
            bytes.len()
        ));
        return Ok(order);
    }
    out.push(X11Message {
        timestamp_us: stream.stamp(setup_len),
        direction: Direction::ClientToServer,
        kind: MessageKind::SetupRequest,
        opcode_or_code: bytes[0],
        sequence: None,
        // Header only, regardless of options: the tail is authentication.
        byte_length: setup_len,
        payload_digest: bytes[..SETUP_REQUEST_HEADER.min(options.digest_len(setup_len))].to_vec(),
    });

    let mut off = setup_len;
    let mut issued: u64 = 0;
    while off < bytes.len() {
        if bytes.len() - off < 4 {
            decoded.truncated_client = true;
            decoded.diagnostics.push(format!(
                "client stream ends inside a request header at offset {off}"
            ));
            break;
        }
        let opcode = bytes[off];
        let units = order.read_u16(&bytes[off + 2..off + 4]) as usize;
        if units == 0 {
            return Err(X11Error::BigRequest { offset: off });
        }
        let total = 4 * units;
        if bytes.len() - off < total {
            decoded.truncated_client = true;
            decoded.diagnostics.push(format!(
                "client stream ends inside a request (opcode {opcode}, offset {off}, \
                 {} of {total} bytes)",
                bytes.len() - off
            ));
            break;
        }
        issued += 1;
        out.push(X11Message {
            timestamp_us: stream.stamp(off + total),
            direction: Direction::ClientToServer,
            kind: MessageKind::Request,
            opcode_or_code: opcode,
            sequence: Some((issued & 0xFFFF) as u16),
            byte_length: total,
            payload_digest: bytes[off..off + options.digest_len(total)].to_vec(),
        });
        off += total;
    }
    Ok(order)
}

/// Parses the server stream: one setup reply, then replies, events, and
/// errors.
fn decode_server(
    stream: &DirStream,
    order: ByteOrder,
    options: &DecodeOptions,
    out: &mut Vec<X11Message>,
    decoded: &mut Decoded,
) -> Result<(), X11Error> {
    let bytes = &stream.bytes;
    if bytes.is_empty() {
        return Ok(());
    }
    let status = bytes[0];
    if status > 2 {
        return Err(X11Error::Desync { offset: 0, byte: status });
    }
    if bytes.len() < SETUP_REPLY_HEADER {
        decoded.truncated_server = true;
        decoded.diagnostics.push(format!(
            "server stream ends inside the setup-reply header ({} of {SETUP_REPLY_HEADER} bytes)",
            bytes.len()
        ));
        return Ok(());
    }
    let extra = order.read_u16(&bytes[6..8]) as usize;
    let setup_len = SETUP_REPLY_HEADER + 4 * extra;
    if bytes.len() < setup_len {
        decoded.truncated_server = true;
        decoded.diagnostics.push(format!(
            "server stream ends inside the setup reply ({} of {setup_len} bytes)",
            bytes.len()
        ));
        return Ok(());
    }
    out.push(X11Message {
        timestamp_us: stream.stamp(setup_len),
        direction: Direction::ServerToClient,
        kind: MessageKind::SetupReply,
        opcode_or_code: status,
        sequence: None,
        byte_length: setup_len,
        payload_digest: bytes[..options.digest_len(setup_len)].to_vec(),
    });

    let mut off = setup_len;
    while off < bytes.len() {
        if bytes.len() - off < SERVER_UNIT {
            decoded.truncated_server = true;
            decoded.diagnostics.push(format!(
                "server stream ends inside a message at offset {off} \
                 ({} of at least {SERVER_UNIT} bytes)",
                bytes.len() - off
            ));
            break;
        }
        let first = bytes[off];
        let (kind, total, sequence) = if first == 1 {
            let extra = order.read_u32(&bytes[off + 4..off + 8]) as usize;
            let total = SERVER_UNIT + 4 * extra;
            if bytes.len() - off < total {
                decoded.truncated_server = true;
                decoded.diagnostics.push(format!(
                    "server stream ends inside a reply at offset {off} \
                     ({} of {total} bytes)",
                    bytes.len() - off
                ));
                break;
            }
            (MessageKind::Reply, total, Some(order.read_u16(&bytes[off + 2..off + 4])))
        } else if first == 0 {
            (MessageKind::Error, SERVER_UNIT, Some(order.read_u16(&bytes[off + 2..off + 4])))
        } else {
            // The send-event bit rides the top of the code byte.
            let sequence = if first & 0x7F == KEYMAP_NOTIFY {
                None
            } else {
                Some(order.read_u16(&bytes[off + 2..off + 4]))
            };
            (MessageKind::Event, SERVER_UNIT, sequence)
        };
        out.push(X11Message {
            timestamp_us: stream.stamp(off + total),
            direction: Direction::ServerToClient,
            kind,
            opcode_or_code: first,
            sequence,
            byte_length: total,
            payload_digest: bytes[off..off + options.digest_len(total)].to_vec(),
        });
        off += total;
    }
    Ok(())
}

impl DecodeOptions {
    /// How many leading bytes of a `total`-byte message to retain.
    fn digest_len(&self, total: usize) -> usize {
        if self.full_payload {
            total
        } else {
            self.payload_prefix.min(total)
        }
    }
}

/// Merges two per-direction, time-ordered message lists into one, client
/// side first on equal timestamps (a reply can never precede its request).
fn merge_by_time(client: Vec<X11Message>, server: Vec<X11Message>) -> Vec<X11Message> {
    let mut out = Vec::with_capacity(client.len() + server.len());
    let mut c = client.into_iter().peekable();
    let mut s = server.into_iter().peekable();
    loop {
        match (c.peek(), s.peek()) {
            (Some(cm), Some(sm)) => {
                if cm.timestamp_us <= sm.timestamp_us {
                    out.push(c.next().expect("peeked"));
                } else {
                    out.push(s.next().expect("peeked"));
                }
            }
            (Some(_), None) => out.push(c.next().expect("peeked")),
            (None, Some(_)) => out.push(s.next().expect("peeked")),
            (None, None) => break,
        }
    }
    out
}

/// Recomputes a message's framing header from its decoded fields (lengths
/// and sequence re-serialized; pad and detail bytes taken from the retained
/// digest). `None` when the digest is too short to supply the pass-through
/// bytes. Matching the original capture bytes is the decoder's
/// self-consistency check.
pub fn reencode_header(msg: &X11Message, order: ByteOrder) -> Option<Vec<u8>> {
    let d = &msg.payload_digest;
    match msg.kind {
        MessageKind::SetupRequest => {
            if d.len() < SETUP_REQUEST_HEADER {
                return None;
            }
            // The header is retained verbatim; re-derive the framing from
            // its length fields to prove they agree with byte_length.
            let name = order.read_u16(&d[6..8]) as usize;
            let data = order.read_u16(&d[8..10]) as usize;
            if SETUP_REQUEST_HEADER + pad4(name) + pad4(data) != msg.byte_length {
                return None;
            }
            Some(d[..SETUP_REQUEST_HEADER].to_vec())
        }
        MessageKind::SetupReply => {
            if d.len() < SETUP_REPLY_HEADER || msg.byte_length < SETUP_REPLY_HEADER {
                return None;
            }
            let extra = (msg.byte_length - SETUP_REPLY_HEADER) / 4;
            let mut h = d[..SETUP_REPLY_HEADER].to_vec();
            h[0] = msg.opcode_or_code;
            h[6..8].copy_from_slice(&order.write_u16(u16::try_from(extra).ok()?));
            Some(h)
        }
        MessageKind::Request => {
            if d.len() < 4 {
                return None;
            }
            let units = u16::try_from(msg.byte_length / 4).ok()?;
            let mut h = vec![msg.opcode_or_code, d[1]];
            h.extend_from_slice(&order.write_u16(units));
            Some(h)
        }
        MessageKind::Reply => {
            if d.len() < 8 || msg.byte_length < SERVER_UNIT {
                return None;
            }
            let extra = u32::try_from((msg.byte_length - SERVER_UNIT) / 4).ok()?;
            let mut h = vec![1u8, d[1]];
            h.extend_from_slice(&order.write_u16(msg.sequence?));
            h.extend_from_slice(&order.write_u32(extra));
            Some(h)
        }
        MessageKind::Error | MessageKind::Event => {
            if d.len() < 4 {
                return None;
            }
            let mut h = vec![msg.opcode_or_code, d[1]];
            match msg.sequence {
                Some(seq) => h.extend_from_slice(&order.write_u16(seq)),
                None => h.extend_from_slice(&d[2..4]),
            }
            Some(h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixture::{
        build_error, build_event, build_reply, build_request, build_setup_reply,
        build_setup_request,
    };
    use super::*;

    fn one_record(direction: Direction, payload: Vec<u8>) -> CaptureRecord {
        CaptureRecord { timestamp_us: 0, direction, payload }
    }

    fn client_record(payload: Vec<u8>) -> CaptureRecord {
        one_record(Direction::ClientToServer, payload)
    }

    fn server_record(payload: Vec<u8>) -> CaptureRecord {
        one_record(Direction::ServerToClient, payload)
    }

    #[test]
    fn empty_capture_decodes_to_nothing() {
        let d = decode_capture(&[], &DecodeOptions::default()).unwrap();
        assert_eq!(d.byte_order, None);
        assert!(d.messages.is_empty());
        assert!(d.diagnostics.is_empty());
        assert!(!d.truncated_client && !d.truncated_server);
    }

    #[test]
    fn lsb_setup_then_listfonts_request() {
        // Eight bytes after the setup: opcode 49, pad, length 2 units.
        let mut client = build_setup_request(ByteOrder::Lsb, b"", b"");
        let setup_len = client.len();
        client.extend_from_slice(&[49, 0, 2, 0, 1, 2, 3, 4]);
        let d = decode_capture(&[client_record(client)], &DecodeOptions::default()).unwrap();
        assert_eq!(d.byte_order, Some(ByteOrder::Lsb));
        assert_eq!(d.messages.len(), 2);
        assert_eq!(d.messages[0].kind, MessageKind::SetupRequest);
        assert_eq!(d.messages[0].byte_length, setup_len);
        assert_eq!(d.messages[0].sequence, None);
        let req = &d.messages[1];
        assert_eq!(req.kind, MessageKind::Request);
        assert_eq!(req.opcode_or_code, 49);
        assert_eq!(req.byte_length, 8);
        assert_eq!(req.sequence, Some(1));
    }

    #[test]
    fn msb_setup_swaps_field_order() {
        let mut client = build_setup_request(ByteOrder::Msb, b"NAME", b"xy");
        client.extend_from_slice(&[49, 0, 0, 2, 9, 9, 9, 9]); // length 2, MSB
        let d = decode_capture(&[client_record(client)], &DecodeOptions::default()).unwrap();
        assert_eq!(d.byte_order, Some(ByteOrder::Msb));
        assert_eq!(d.messages[0].byte_length, 12 + 4 + 4); // name padded to 4, data to 4
        assert_eq!(d.messages[1].byte_length, 8);
    }

    #[test]
    fn unknown_byte_order_is_a_hard_error() {
        let e = decode_capture(&[client_record(vec![0x41; 16])], &DecodeOptions::default());
        assert!(matches!(e, Err(X11Error::BadByteOrder(0x41))));
    }

    #[test]
    fn big_request_escape_is_a_hard_error_with_offset() {
        let mut client = build_setup_request(ByteOrder::Lsb, b"", b"");
        let setup_len = client.len();
        client.extend_from_slice(&build_request(ByteOrder::Lsb, 45, 0, &[0; 4]));
        client.extend_from_slice(&[120, 0, 0, 0]); // length field 0
        let e = decode_capture(&[client_record(client)], &DecodeOptions::default());
        match e {
            Err(X11Error::BigRequest { offset }) => assert_eq!(offset, setup_len + 8),
            other => panic!("expected BigRequest, got {other:?}"),
        }
    }

    #[test]
    fn server_desync_is_a_hard_error() {
        let client = build_setup_request(ByteOrder::Lsb, b"", b"");
        let server = vec![9u8; 40]; // 9 is not a setup-reply status
        let e = decode_capture(
            &[client_record(client), server_record(server)],
            &DecodeOptions::default(),
        );
        assert!(matches!(e, Err(X11Error::Desync { offset: 0, byte: 9 })));
    }

    #[test]
    fn server_bytes_without_client_setup_are_rejected() {
        let e = decode_capture(&[server_record(vec![1; 40])], &DecodeOptions::default());
        assert!(matches!(e, Err(X11Error::Invalid(_))));
    }

    #[test]
    fn full_session_frames_and_sequences() {
        let order = ByteOrder::Lsb;
        let mut client = build_setup_request(order, b"MIT-MAGIC-COOKIE-1", b"0123456789abcdef");
        client.extend_from_slice(&build_request(order, 45, 0, b"fixed\0\0\0")); // OpenFont
        client.extend_from_slice(&build_request(order, 47, 0, &[])); // QueryFont
        client.extend_from_slice(&build_request(order, 43, 0, &[])); // GetInputFocus
        let mut server = build_setup_reply(order, 8);
        server.extend_from_slice(&build_reply(order, 0, 2, 3)); // to QueryFont
        server.extend_from_slice(&build_event(order, 12, 3)); // Expose after request 3
        server.extend_from_slice(&build_error(order, 7, 1)); // to OpenFont
        let records = vec![
            CaptureRecord { timestamp_us: 10, direction: Direction::ClientToServer, payload: client.clone() },
            CaptureRecord { timestamp_us: 20, direction: Direction::ServerToClient, payload: server.clone() },
        ];
        let d = decode_capture(&records, &DecodeOptions::default()).unwrap();
        let kinds: Vec<MessageKind> = d.messages.iter().map(|m| m.kind).collect();
        assert_eq!(
            kinds,
            vec![
                MessageKind::SetupRequest,
                MessageKind::Request,
                MessageKind::Request,
                MessageKind::Request,
                MessageKind::SetupReply,
                MessageKind::Reply,
                MessageKind::Event,
                MessageKind::Error,
            ]
        );
        let seqs: Vec<Option<u16>> = d.messages.iter().map(|m| m.sequence).collect();
        assert_eq!(
            seqs,
            vec![None, Some(1), Some(2), Some(3), None, Some(2), Some(3), Some(1)]
        );
        // Totality: per direction, framed lengths cover every byte.
        let c2s: usize = d
            .messages
            .iter()
            .filter(|m| m.direction == Direction::ClientToServer)
            .map(|m| m.byte_length)
            .sum();
        let s2c: usize = d
            .messages
            .iter()
            .filter(|m| m.direction == Direction::ServerToClient)
            .map(|m| m.byte_length)
            .sum();
        assert_eq!(c2s, client.len());
        assert_eq!(s2c, server.len());
        assert!(!d.truncated_client && !d.truncated_server);
    }

    #[test]
    fn keymap_notify_has_no_sequence_but_other_events_do() {
        let order = ByteOrder::Lsb;
        let client = build_setup_request(order, b"", b"");
        let mut server = build_setup_reply(order, 0);
        server.extend_from_slice(&build_event(order, 11, 0xFFFF)); // KeymapNotify
        server.extend_from_slice(&build_event(order, 11 | 0x80, 0xFFFF)); // sent KeymapNotify
        server.extend_from_slice(&build_event(order, 22, 7));
        let d = decode_capture(
            &[client_record(client), server_record(server)],
            &DecodeOptions::default(),
        )
        .unwrap();
        let events: Vec<&X11Message> =
            d.messages.iter().filter(|m| m.kind == MessageKind::Event).collect();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0].sequence, None);
        assert_eq!(events[1].sequence, None);
        assert_eq!(events[1].opcode_or_code, 11 | 0x80);
        assert_eq!(events[2].sequence, Some(7));
    }

    #[test]
    fn request_sequences_wrap_through_zero() {
        let order = ByteOrder::Lsb;
        let mut client = build_setup_request(order, b"", b"");
        for _ in 0..65537 {
            client.extend_from_slice(&build_request(order, 43, 0, &[]));
        }
        let d = decode_capture(&[client_record(client)], &DecodeOptions::default()).unwrap();
        let requests: Vec<&X11Message> =
            d.messages.iter().filter(|m| m.kind == MessageKind::Request).collect();
        assert_eq!(requests.len(), 65537);
        assert_eq!(requests[0].sequence, Some(1));
        assert_eq!(requests[65534].sequence, Some(65535));
        assert_eq!(requests[65535].sequence, Some(0));
        assert_eq!(requests[65536].sequence, Some(1));
    }

    #[test]
    fn truncated_trailing_messages_flag_but_do_not_fail() {
        let order = ByteOrder::Lsb;
        let mut client = build_setup_request(order, b"", b"");
        client.extend_from_slice(&build_request(order, 43, 0, &[]));
        client.extend_from_slice(&[47, 0]); // half a request header
        let mut server = build_setup_reply(order, 0);
        server.extend_from_slice(&build_reply(order, 0, 1, 4)[..40]); // reply cut short
        let d = decode_capture(
            &[client_record(client), server_record(server)],
            &DecodeOptions::default(),
        )
        .unwrap();
        assert!(d.truncated_client);
        assert!(d.truncated_server);
        assert_eq!(d.diagnostics.len(), 2);
        assert_eq!(d.messages.len(), 3); // setup request, request, setup reply
    }

    #[test]
    fn message_timestamp_is_the_record_that_completes_it() {
        let order = ByteOrder::Lsb;
        let setup = build_setup_request(order, b"", b"");
        let request = build_request(order, 47, 0, &[1, 2, 3, 4]);
        // Split the request across three records; the last fragment lands
        // at t = 300.
        let records = vec![
            CaptureRecord {
                timestamp_us: 100,
                direction: Direction::ClientToServer,
                payload: setup,
            },
            CaptureRecord {
                timestamp_us: 200,
                direction: Direction::ClientToServer,
                payload: request[..3].to_vec(),
            },
            CaptureRecord {
                timestamp_us: 250,
                direction: Direction::ClientToServer,
                payload: request[3..5].to_vec(),
            },
            CaptureRecord {
                timestamp_us: 300,
                direction: Direction::ClientToServer,
                payload: request[5..].to_vec(),
            },
        ];
        let d = decode_capture(&records, &DecodeOptions::default()).unwrap();
        assert_eq!(d.messages[0].timestamp_us, 100);
        assert_eq!(d.messages[1].timestamp_us, 300);
    }

    #[test]
    fn merge_is_by_time_with_client_first_on_ties() {
        let order = ByteOrder::Lsb;
        let client_bytes = {
            let mut b = build_setup_request(order, b"", b"");
            b.extend_from_slice(&build_request(order, 43, 0, &[]));
            b
        };
        let server_bytes = build_setup_reply(order, 0);
        let records = vec![
            CaptureRecord { timestamp_us: 5, direction: Direction::ClientToServer, payload: client_bytes },
            CaptureRecord { timestamp_us: 5, direction: Direction::ServerToClient, payload: server_bytes },
        ];
        let d = decode_capture(&records, &DecodeOptions::default()).unwrap();
        let dirs: Vec<Direction> = d.messages.iter().map(|m| m.direction).collect();
        assert_eq!(
            dirs,
            vec![
                Direction::ClientToServer,
                Direction::ClientToServer,
                Direction::ServerToClient,
            ]
        );
    }

    #[test]
    fn setup_request_digest_never_includes_auth_bytes() {
        let order = ByteOrder::Lsb;
        let client = build_setup_request(order, b"MIT-MAGIC-COOKIE-1", b"s3cret-cookie-data");
        let opts = DecodeOptions { payload_prefix: 4096, full_payload: true };
        let d = decode_capture(&[client_record(client)], &opts).unwrap();
        let setup = &d.messages[0];
        assert_eq!(setup.payload_digest.len(), 12);
        let digest = &setup.payload_digest;
        assert!(!digest.windows(6).any(|w| w == b"s3cret"));
    }

    #[test]
    fn digest_respects_prefix_and_full_payload() {
        let order = ByteOrder::Lsb;
        let mut client = build_setup_request(order, b"", b"");
        client.extend_from_slice(&build_request(order, 45, 7, &[0xAB; 96]));
        let short = decode_capture(
            &[client_record(client.clone())],
            &DecodeOptions { payload_prefix: 6, full_payload: false },
        )
        .unwrap();
        assert_eq!(short.messages[1].payload_digest.len(), 6);
        let full = decode_capture(
            &[client_record(client)],
            &DecodeOptions { payload_prefix: 6, full_payload: true },
        )
        .unwrap();
        assert_eq!(full.messages[1].payload_digest.len(), 100);
    }

    #[test]
    fn reencode_reproduces_original_header_bytes() {
        let order = ByteOrder::Msb;
        let mut client = build_setup_request(order, b"AUTH", b"12345");
        client.extend_from_slice(&build_request(order, 45, 3, &[5; 12]));
        let mut server = build_setup_reply(order, 2);
        server.extend_from_slice(&build_reply(order, 1, 1, 2));
        server.extend_from_slice(&build_event(order, 11, 0));
        server.extend_from_slice(&build_event(order, 19, 1));
        server.extend_from_slice(&build_error(order, 2, 1));
        let client_stream = client.clone();
        let server_stream = server.clone();
        let d = decode_capture(
            &[client_record(client), server_record(server)],
            &DecodeOptions::default(),
        )
        .unwrap();
        let mut offsets = std::collections::HashMap::new();
        offsets.insert(Direction::ClientToServer, 0usize);
        offsets.insert(Direction::ServerToClient, 0usize);
        for msg in &d.messages {
            let header = reencode_header(msg, order).expect("digest long enough");
            let off = offsets[&msg.direction];
            let stream = match msg.direction {
                Direction::ClientToServer => &client_stream,
                Direction::ServerToClient => &server_stream,
            };
            assert_eq!(
                &stream[off..off + header.len()],
                &header[..],
                "header mismatch for {:?} at offset {off}",
                msg.kind
            );
            offsets.insert(msg.direction, off + msg.byte_length);
        }
    }

    #[test]
    fn json_line_shape_is_stable() {
        let msg = X11Message {
            timestamp_us: 42,
            direction: Direction::ClientToServer,
            kind: MessageKind::Request,
            opcode_or_code: 49,
            sequence: Some(7),
            byte_length: 8,
            payload_digest: vec![0x31, 0x00, 0x02, 0x00],
        };
        let line = serde_json::to_string(&msg).unwrap();
        assert_eq!(
            line,
            "{\"timestamp_us\":42,\"direction\":\"c2s\",\"kind\":\"request\",\
             \"opcode_or_code\":49,\"sequence\":7,\"byte_length\":8,\
             \"payload_digest\":\"31000200\"}"
        );
    }
}
