use std::collections::BTreeMap;
use std::path::Path;

use super::format::{
    record_crc, ChannelDescriptor, ChannelKind, Cursor, FOOTER_LEN, FOOTER_MAGIC, MAGIC,
    MAX_PAYLOAD, VERSION,
};
use super::RecorderError;

/// A record as stored, with its location and integrity status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record<'a> {
    pub offset: u64,
    pub channel: u16,
    pub ts: u64,
    pub payload: &'a [u8],
    pub stored_crc: u32,
}

impl Record<'_> {
    pub fn crc_ok(&self) -> bool {
        record_crc(self.channel, self.ts, self.payload) == self.stored_crc
    }
}

/// How the record stream ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completeness {
    /// Footer and index present.
    Finalized,
    /// No valid footer; records were recovered by scanning until
    /// `scan_end`, the first byte that does not start an intact record.
    Truncated { scan_end: u64 },
}

/// An in-memory view of a recording.
#[derive(Debug, Clone)]
pub struct Recording {
    bytes: Vec<u8>,
    channels: Vec<ChannelDescriptor>,
    records_start: u64,
    records_end: u64,
    completeness: Completeness,
    index: BTreeMap<u16, Vec<(u64, u64)>>,
}

fn corrupt(what: &str) -> RecorderError {
    RecorderError::Corrupt(what.to_owned())
}

impl Recording {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RecorderError> {
        Recording::from_bytes(std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, RecorderError> {
        let mut c = Cursor::new(&bytes, 0);
        if c.array::<4>().as_ref() != Some(MAGIC) {
            return Err(RecorderError::BadMagic);
        }
        let version = c.u8().ok_or_else(|| corrupt("header"))?;
        if version != VERSION {
            return Err(RecorderError::UnsupportedVersion(version));
        }
        let count = c.u16().ok_or_else(|| corrupt("header"))?;
        let mut channels: Vec<ChannelDescriptor> = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = c.u16().ok_or_else(|| corrupt("channel table"))?;
            let kind = ChannelKind::try_from(c.u8().ok_or_else(|| corrupt("channel table"))?)?;
            let len = c.u8().ok_or_else(|| corrupt("channel table"))? as usize;
            let name = c
                .bytes(len)
                .and_then(|b| std::str::from_utf8(b).ok())
                .ok_or_else(|| corrupt("channel name"))?
                .to_owned();
            let rate = c.f64().ok_or_else(|| corrupt("channel table"))?;
            if channels.iter().any(|d| d.id == id) {
                return Err(RecorderError::DuplicateChannel(id));
            }
            channels.push(ChannelDescriptor {
                id,
                kind,
                name,
                nominal_rate_hz: rate,
            });
        }
        let records_start = c.pos as u64;
        let mut rec = Recording {
            bytes,
            channels,
            records_start,
            records_end: records_start,
            completeness: Completeness::Finalized,
            index: BTreeMap::new(),
        };
        match rec.read_footer() {
            Some((end, index)) => {
                rec.records_end = end;
                rec.index = index;
            }
            None => {
                let scan_end = rec.scan_end(rec.bytes.len() as u64);
                rec.records_end = scan_end;
                rec.completeness = Completeness::Truncated { scan_end };
                rec.index = rec.build_index();
            }
        }
        Ok(rec)
    }

    fn read_footer(&self) -> Option<(u64, BTreeMap<u16, Vec<(u64, u64)>>)> {
        let len = self.bytes.len() as u64;
        if len < self.records_start + FOOTER_LEN {
            return None;
        }
        let mut c = Cursor::new(&self.bytes, (len - FOOTER_LEN) as usize);
        if c.array::<4>().as_ref() != Some(FOOTER_MAGIC) {
            return None;
        }
        let index_at = c.u64()?;
        if index_at < self.records_start || index_at > len - FOOTER_LEN {
            return None;
        }
        let mut c = Cursor::new(&self.bytes[..(len - FOOTER_LEN) as usize], index_at as usize);
        let n = c.u16()?;
        let mut index = BTreeMap::new();
        for _ in 0..n {
            let id = c.u16()?;
            let count = c.u32()? as usize;
            if count.checked_mul(16)? > c.remaining() {
                return None;
            }
            let entries = (0..count)
                .map(|_| Some((c.u64()?, c.u64()?)))
                .collect::<Option<Vec<_>>>()?;
            index.insert(id, entries);
        }
        if c.remaining() != 0 {
            return None;
        }
        Some((index_at, index))
    }

    fn frame_at(&self, offset: u64, limit: u64) -> Option<(Record<'_>, u64)> {
        let buf = self.bytes.get(..limit as usize)?;
        let mut c = Cursor::new(buf, offset as usize);
        let channel = c.u16()?;
        self.channel(channel)?;
        let ts = c.u64()?;
        let len = c.u32()? as usize;
        if len > MAX_PAYLOAD {
            return None;
        }
        let payload = c.bytes(len)?;
        let stored_crc = c.u32()?;
        Some((
            Record {
                offset,
                channel,
                ts,
                payload,
                stored_crc,
            },
            c.pos as u64,
        ))
    }

    /// End of the trustworthy record stream of a file without footer. A
    /// record that fails its CRC ends the scan: past a crash point the
    /// bytes may be anything, including a partial index that happens to
    /// frame.
    fn scan_end(&self, limit: u64) -> u64 {
        let mut at = self.records_start;
        while let Some((r, next)) = self.frame_at(at, limit) {
            if !r.crc_ok() {
                break;
            }
            at = next;
        }
        at
    }

    fn build_index(&self) -> BTreeMap<u16, Vec<(u64, u64)>> {
        let mut index: BTreeMap<u16, Vec<(u64, u64)>> =
            self.channels.iter().map(|c| (c.id, Vec::new())).collect();
        for r in self.records() {
            index.entry(r.channel).or_default().push((r.ts, r.offset));
        }
        index
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    pub fn channel(&self, id: u16) -> Option<&ChannelDescriptor> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn completeness(&self) -> Completeness {
        self.completeness
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.completeness, Completeness::Truncated { .. })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// All records in file order, ignoring the index.
    pub fn records(&self) -> Records<'_> {
        Records {
            rec: self,
            at: self.records_start,
        }
    }

    /// Records of one channel in file order.
    pub fn channel_records(&self, id: u16) -> impl Iterator<Item = Record<'_>> {
        self.records().filter(move |r| r.channel == id)
    }

    pub fn read_at(&self, offset: u64) -> Result<Record<'_>, RecorderError> {
        self.frame_at(offset, self.records_end)
            .map(|(r, _)| r)
            .ok_or(RecorderError::BadOffset(offset))
    }

    /// `(master_ts, offset)` index of one channel.
    pub fn index(&self, id: u16) -> Result<&[(u64, u64)], RecorderError> {
        if self.channel(id).is_none() {
            return Err(RecorderError::UnknownChannel(id));
        }
        Ok(self.index.get(&id).map(Vec::as_slice).unwrap_or(&[]))
    }

    /// First record of `channel` with timestamp at or after `t`; `None` past
    /// the end of the channel.
    pub fn seek_time(&self, channel: u16, t: u64) -> Result<Option<Record<'_>>, RecorderError> {
        let idx = self.index(channel)?;
        let i = idx.partition_point(|(ts, _)| *ts < t);
        match idx.get(i) {
            Some(&(_, off)) => self.read_at(off).map(Some),
            None => Ok(None),
        }
    }
}

pub struct Records<'a> {
    rec: &'a Recording,
    at: u64,
}

impl<'a> Iterator for Records<'a> {
    type Item = Record<'a>;

    fn next(&mut self) -> Option<Record<'a>> {
        let (r, next) = self.rec.frame_at(self.at, self.rec.records_end)?;
        self.at = next;
        Some(r)
    }
}
