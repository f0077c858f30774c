//! IoT→Edge wire format.
//!
//! A frame is a big-endian `u32` length followed by one packet. Packet header
//! (45 bytes, integers little-endian):
//!
//! | offset | size | field           |
//! |-------:|-----:|-----------------|
//! | 0      | 4    | magic `"USV1"`  |
//! | 4      | 1    | version = 1     |
//! | 5      | 4    | device_id       |
//! | 9      | 8    | window_seq      |
//! | 17     | 8    | start_t_ns      |
//! | 25     | 8    | t_acquired_ns   |
//! | 33     | 8    | t_sent_ns       |
//! | 41     | 2    | rate_hz         |
//! | 43     | 2    | n_samples       |
//!
//! The payload is `n_samples` rows of seven little-endian `f64`:
//! `t_offset_s, ax, ay, az, gx, gy, gz`, with `t_offset_s` relative to
//! `start_t_ns`.
//!
//! The Edge acknowledges each packet with a 12-byte ack frame: `"UACK"`
//! followed by the `window_seq` as a little-endian `u64`.

use std::io::{self, Read, Write};

use crate::signal::{ImuSample, SampleWindow};

pub const MAGIC: [u8; 4] = *b"USV1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 45;
pub const SAMPLE_FIELDS: usize = 7;
pub const SAMPLE_BYTES: usize = SAMPLE_FIELDS * 8;
/// Offset of `t_sent_ns` inside an encoded packet.
pub const T_SENT_OFFSET: usize = 33;
/// Largest packet accepted from the wire.
pub const MAX_PACKET_LEN: usize = HEADER_LEN + u16::MAX as usize * SAMPLE_BYTES;
pub const ACK_MAGIC: [u8; 4] = *b"UACK";
pub const ACK_LEN: usize = 12;

/// Frame size on the wire for a window of `n` samples.
pub const fn frame_len(n: usize) -> usize {
    4 + HEADER_LEN + n * SAMPLE_BYTES
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("packet length {got} does not match header ({expected})")]
    Length { expected: usize, got: usize },
    #[error("frame length {0} out of range")]
    FrameLength(usize),
    #[error("incomplete frame: expected {expected} bytes, got {got}")]
    Incomplete { expected: usize, got: usize },
    #[error("window has {0} samples, more than a packet can carry")]
    TooManySamples(usize),
    #[error("ack for seq {got}, expected {expected}")]
    AckMismatch { expected: u64, got: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPacket {
    pub device_id: u32,
    pub window_seq: u64,
    pub start_t_ns: u64,
    pub t_acquired_ns: u64,
    pub t_sent_ns: u64,
    pub rate_hz: u16,
    pub samples: Vec<[f64; SAMPLE_FIELDS]>,
}

impl WindowPacket {
    /// Packs a window; `t_sent_ns` starts at zero and is stamped at transmit.
    pub fn from_window(window: &SampleWindow, t_acquired_ns: u64) -> Self {
        let samples = window
            .samples
            .iter()
            .map(|s| {
                let off = s.t_ns.saturating_sub(window.start_t_ns) as f64 * 1e-9;
                let [ax, ay, az] = s.lin_acc;
                let [gx, gy, gz] = s.ang_vel;
                [off, ax, ay, az, gx, gy, gz]
            })
            .collect();
        Self {
            device_id: window.device_id,
            window_seq: window.window_seq,
            start_t_ns: window.start_t_ns,
            t_acquired_ns,
            t_sent_ns: 0,
            rate_hz: window.rate_hz,
            samples,
        }
    }

    pub fn to_window(&self) -> SampleWindow {
        let samples = self
            .samples
            .iter()
            .map(|r| {
                let t_ns = self.start_t_ns + (r[0] * 1e9).round() as u64;
                ImuSample::new(t_ns, [r[1], r[2], r[3]], [r[4], r[5], r[6]])
            })
            .collect();
        SampleWindow {
            device_id: self.device_id,
            window_seq: self.window_seq,
            start_t_ns: self.start_t_ns,
            rate_hz: self.rate_hz,
            samples,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.samples.len() * SAMPLE_BYTES
    }

    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        let n = u16::try_from(self.samples.len()).map_err(|_| ProtocolError::TooManySamples(self.samples.len()))?;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.device_id.to_le_bytes());
        out.extend_from_slice(&self.window_seq.to_le_bytes());
        out.extend_from_slice(&self.start_t_ns.to_le_bytes());
        out.extend_from_slice(&self.t_acquired_ns.to_le_bytes());
        out.extend_from_slice(&self.t_sent_ns.to_le_bytes());
        out.extend_from_slice(&self.rate_hz.to_le_bytes());
        out.extend_from_slice(&n.to_le_bytes());
        for row in &self.samples {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < HEADER_LEN {
            return Err(ProtocolError::Incomplete { expected: HEADER_LEN, got: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ProtocolError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(ProtocolError::BadVersion(bytes[4]));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let n = u16::from_le_bytes([bytes[43], bytes[44]]) as usize;
        let expected = HEADER_LEN + n * SAMPLE_BYTES;
        if bytes.len() != expected {
            return Err(ProtocolError::Length { expected, got: bytes.len() });
        }
        let samples = bytes[HEADER_LEN..]
            .chunks_exact(SAMPLE_BYTES)
            .map(|row| {
                let mut r = [0.0; SAMPLE_FIELDS];
                for (k, v) in r.iter_mut().enumerate() {
                    *v = f64::from_le_bytes(row[k * 8..k * 8 + 8].try_into().unwrap());
                }
                r
            })
            .collect();
        Ok(Self {
            device_id: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
            window_seq: u64_at(9),
            start_t_ns: u64_at(17),
            t_acquired_ns: u64_at(25),
            t_sent_ns: u64_at(33),
            rate_hz: u16::from_le_bytes([bytes[41], bytes[42]]),
            samples,
        })
    }
}

/// Overwrites `t_sent_ns` in an already encoded packet.
pub fn stamp_sent(packet: &mut [u8], t_sent_ns: u64) {
    packet[T_SENT_OFFSET..T_SENT_OFFSET + 8].copy_from_slice(&t_sent_ns.to_le_bytes());
}

/// Length prefix plus packet bytes.
pub fn frame(packet: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + packet.len());
    out.extend_from_slice(&(packet.len() as u32).to_be_bytes());
    out.extend_from_slice(packet);
    out
}

pub fn write_frame(w: &mut impl Write, packet: &[u8]) -> Result<(), ProtocolError> {
    w.write_all(&frame(packet))?;
    w.flush()?;
    Ok(())
}

/// Reads into `buf` until full or EOF; returns bytes read.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

/// Reads one frame. `Ok(None)` on a clean end of stream between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<WindowPacket>, ProtocolError> {
    let mut len = [0u8; 4];
    match read_full(r, &mut len)? {
        0 => return Ok(None),
        4 => {}
        got => return Err(ProtocolError::Incomplete { expected: 4, got }),
    }
    let len = u32::from_be_bytes(len) as usize;
    if !(HEADER_LEN..=MAX_PACKET_LEN).contains(&len) {
        return Err(ProtocolError::FrameLength(len));
    }
    let mut buf = vec![0u8; len];
    let got = read_full(r, &mut buf)?;
    if got != len {
        return Err(ProtocolError::Incomplete { expected: len, got });
    }
    WindowPacket::decode(&buf).map(Some)
}

pub fn encode_ack(window_seq: u64) -> [u8; ACK_LEN] {
    let mut out = [0u8; ACK_LEN];
    out[..4].copy_from_slice(&ACK_MAGIC);
    out[4..].copy_from_slice(&window_seq.to_le_bytes());
    out
}

pub fn write_ack(w: &mut impl Write, window_seq: u64) -> Result<(), ProtocolError> {
    w.write_all(&encode_ack(window_seq))?;
    w.flush()?;
    Ok(())
}

pub fn read_ack(r: &mut impl Read) -> Result<u64, ProtocolError> {
    let mut buf = [0u8; ACK_LEN];
    let got = read_full(r, &mut buf)?;
    if got != ACK_LEN {
        return Err(ProtocolError::Incomplete { expected: ACK_LEN, got });
    }
    let magic: [u8; 4] = buf[..4].try_into().unwrap();
    if magic != ACK_MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    Ok(u64::from_le_bytes(buf[4..].try_into().unwrap()))
}
