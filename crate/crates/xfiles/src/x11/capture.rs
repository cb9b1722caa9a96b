//! Binary capture container.
//!
//! A capture file is the little-endian magic `XFT1` followed by records:
//! timestamp in microseconds (8 bytes), direction (1 byte: 0 = client to
//! server, 1 = server to client), payload length (4 bytes), payload. One
//! record corresponds to one socket read inside the relay, so record
//! boundaries carry timing, not framing: protocol messages may span
//! records or share one.

use std::io::{self, Read, Write};

use serde::Serialize;

use super::X11Error;

/// File magic for the capture container.
pub const CAPTURE_MAGIC: [u8; 4] = *b"XFT1";

/// Which way the bytes were flowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    /// Application to display server.
    #[serde(rename = "c2s")]
    ClientToServer,
    /// Display server to application.
    #[serde(rename = "s2c")]
    ServerToClient,
}

impl Direction {
    fn byte(self) -> u8 {
        match self {
            Direction::ClientToServer => 0,
            Direction::ServerToClient => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, X11Error> {
        match b {
            0 => Ok(Direction::ClientToServer),
            1 => Ok(Direction::ServerToClient),
            other => Err(X11Error::BadDirection(other)),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::ClientToServer => "c2s",
            Direction::ServerToClient => "s2c",
        })
    }
}

/// One timestamped socket read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    /// Microseconds since the relay session started.
    pub timestamp_us: u64,
    pub direction: Direction,
    pub payload: Vec<u8>,
}

/// Incremental capture writer; emits the magic on construction.
pub struct CaptureWriter<W: Write> {
    inner: W,
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(&CAPTURE_MAGIC)?;
        Ok(CaptureWriter { inner })
    }

    /// Appends one record.
    pub fn append(&mut self, timestamp_us: u64, direction: Direction, payload: &[u8]) -> io::Result<()> {
        let len = u32::try_from(payload.len()).map_err(|_| {
            io::Error::new(io::ErrorKind::InvalidInput, "capture record exceeds 4 GiB")
        })?;
        self.inner.write_all(&timestamp_us.to_le_bytes())?;
        self.inner.write_all(&[direction.byte()])?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(payload)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Writes a whole capture in one call.
pub fn write_capture<W: Write>(writer: W, records: &[CaptureRecord]) -> io::Result<()> {
    let mut w = CaptureWriter::new(writer)?;
    for r in records {
        w.append(r.timestamp_us, r.direction, &r.payload)?;
    }
    w.flush()
}

/// Reads a capture. A missing or wrong magic and an invalid direction byte
/// are hard errors; a file that ends mid-record (a session cut short, or a
/// capture-side write failure) keeps every complete record and reports the
/// truncation as a diagnostic.
pub fn read_capture<R: Read>(mut reader: R) -> Result<(Vec<CaptureRecord>, Vec<String>), X11Error> {
    let mut magic = [0u8; 4];
    read_exact_or_short(&mut reader, &mut magic)?.then_some(()).ok_or(X11Error::BadMagic)?;
    if magic != CAPTURE_MAGIC {
        return Err(X11Error::BadMagic);
    }

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    loop {
        let mut header = [0u8; 13];
        let got = read_up_to(&mut reader, &mut header)?;
        if got == 0 {
            break; // clean end of file
        }
        if got < header.len() {
            diagnostics.push(format!(
                "capture ends mid-record after {} complete records ({got} header bytes of 13)",
                records.len()
            ));
            break;
        }
        let timestamp_us = u64::from_le_bytes(header[0..8].try_into().expect("8 bytes"));
        let direction = Direction::from_byte(header[8])?;
        let len = u32::from_le_bytes(header[9..13].try_into().expect("4 bytes")) as u64;
        let mut payload = Vec::new();
        (&mut reader).take(len).read_to_end(&mut payload)?;
        if (payload.len() as u64) < len {
            diagnostics.push(format!(
                "capture ends mid-record after {} complete records (payload {} of {len} bytes)",
                records.len(),
                payload.len()
            ));
            break;
        }
        records.push(CaptureRecord { timestamp_us, direction, payload });
    }
    Ok((records, diagnostics))
}

/// Fills `buf` completely, returning false on immediate end-of-input and an
/// error if the input ends partway through.
fn read_exact_or_short<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<bool, X11Error> {
    let got = read_up_to(reader, buf)?;
    if got == 0 {
        return Ok(false);
    }
    if got < buf.len() {
        return Err(X11Error::BadMagic);
    }
    Ok(true)
}

/// Reads until `buf` is full or the input ends; returns bytes read.
fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match reader.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}
