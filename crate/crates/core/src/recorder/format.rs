use serde::{Deserialize, Serialize};

use super::RecorderError;

pub const MAGIC: &[u8; 4] = b"MVTR";
pub const FOOTER_MAGIC: &[u8; 4] = b"RTVM";
pub const VERSION: u8 = 1;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
pub const MAX_NAME_LEN: usize = 64;

/// Magic, version, channel count.
pub const HEADER_LEN: u64 = 4 + 1 + 2;
/// Channel id, timestamp, payload length.
pub const RECORD_PREFIX_LEN: u64 = 2 + 8 + 4;
pub const CRC_LEN: u64 = 4;
pub const FOOTER_LEN: u64 = 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum ChannelKind {
    StereoFrame = 1,
    Kinematics = 2,
    Lidar = 3,
    Event = 4,
}

impl TryFrom<u8> for ChannelKind {
    type Error = RecorderError;

    fn try_from(v: u8) -> Result<Self, RecorderError> {
        Ok(match v {
            1 => ChannelKind::StereoFrame,
            2 => ChannelKind::Kinematics,
            3 => ChannelKind::Lidar,
            4 => ChannelKind::Event,
            other => return Err(RecorderError::Corrupt(format!("channel kind {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub id: u16,
    pub kind: ChannelKind,
    pub name: String,
    pub nominal_rate_hz: f64,
}

impl ChannelDescriptor {
    pub fn new(id: u16, kind: ChannelKind, name: &str, nominal_rate_hz: f64) -> Self {
        ChannelDescriptor {
            id,
            kind,
            name: name.to_owned(),
            nominal_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<(), RecorderError> {
        if self.name.len() > MAX_NAME_LEN {
            return Err(RecorderError::NameTooLong(self.name.clone()));
        }
        if !(self.nominal_rate_hz.is_finite() && self.nominal_rate_hz >= 0.0) {
            return Err(RecorderError::InvalidRate(self.id));
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> u64 {
        2 + 1 + 1 + self.name.len() as u64 + 8
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.id.to_le_bytes());
        out.push(self.kind as u8);
        out.push(self.name.len() as u8);
        out.extend_from_slice(self.name.as_bytes());
        out.extend_from_slice(&self.nominal_rate_hz.to_le_bytes());
    }
}

/// Byte size of the header plus channel table, i.e. the offset of the
/// first record.
pub fn preamble_len(channels: &[ChannelDescriptor]) -> u64 {
    HEADER_LEN + channels.iter().map(ChannelDescriptor::encoded_len).sum::<u64>()
}

pub fn record_len(payload_len: usize) -> u64 {
    RECORD_PREFIX_LEN + payload_len as u64 + CRC_LEN
}

/// CRC-32 (IEEE) over channel id, timestamp and payload.
pub fn record_crc(channel: u16, ts: u64, payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&channel.to_le_bytes());
    h.update(&ts.to_le_bytes());
    h.update(payload);
    h.finalize()
}

pub(crate) fn encode_record(out: &mut Vec<u8>, channel: u16, ts: u64, payload: &[u8]) {
    out.extend_from_slice(&channel.to_le_bytes());
    out.extend_from_slice(&ts.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&record_crc(channel, ts, payload).to_le_bytes());
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8], pos: usize) -> Self {
        Cursor { buf, pos }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len().saturating_sub(self.pos)
    }

    pub fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.bytes(N).map(|s| s.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.array::<1>().map(|a| a[0])
    }

    pub fn u16(&mut self) -> Option<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn i64(&mut self) -> Option<i64> {
        self.array().map(i64::from_le_bytes)
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.array().map(f64::from_le_bytes)
    }
}
