use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::format::{
    encode_record, ChannelDescriptor, FOOTER_MAGIC, MAGIC, MAX_PAYLOAD, VERSION,
};
use super::RecorderError;

struct ChannelState {
    last_ts: Option<u64>,
    index: Vec<(u64, u64)>,
}

/// Single-writer recorder. Records go straight to the sink; the index is
/// kept in memory until [`RecordWriter::finalize`].
pub struct RecordWriter<W: Write> {
    sink: W,
    offset: u64,
    order: Vec<u16>,
    channels: BTreeMap<u16, ChannelState>,
    scratch: Vec<u8>,
}

impl RecordWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, channels: &[ChannelDescriptor]) -> Result<Self, RecorderError> {
        RecordWriter::new(BufWriter::new(File::create(path)?), channels)
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut sink: W, channels: &[ChannelDescriptor]) -> Result<Self, RecorderError> {
        let mut state = BTreeMap::new();
        for c in channels {
            c.validate()?;
            let fresh = ChannelState {
                last_ts: None,
                index: Vec::new(),
            };
            if state.insert(c.id, fresh).is_some() {
                return Err(RecorderError::DuplicateChannel(c.id));
            }
        }
        let count = u16::try_from(channels.len()).map_err(|_| RecorderError::TooManyChannels)?;
        let mut head = Vec::new();
        head.extend_from_slice(MAGIC);
        head.push(VERSION);
        head.extend_from_slice(&count.to_le_bytes());
        for c in channels {
            c.encode(&mut head);
        }
        sink.write_all(&head)?;
        Ok(RecordWriter {
            sink,
            offset: head.len() as u64,
            order: channels.iter().map(|c| c.id).collect(),
            channels: state,
            scratch: Vec::new(),
        })
    }

    /// Bytes written so far.
    pub fn position(&self) -> u64 {
        self.offset
    }

    /// Appends one record and returns its byte offset.
    pub fn append(&mut self, channel: u16, ts: u64, payload: &[u8]) -> Result<u64, RecorderError> {
        let st = self
            .channels
            .get_mut(&channel)
            .ok_or(RecorderError::UnknownChannel(channel))?;
        if let Some(last) = st.last_ts.filter(|l| ts < *l) {
            return Err(RecorderError::TimestampRegression { channel, last, ts });
        }
        if payload.len() > MAX_PAYLOAD {
            return Err(RecorderError::PayloadTooLarge(payload.len()));
        }
        self.scratch.clear();
        encode_record(&mut self.scratch, channel, ts, payload);
        self.sink.write_all(&self.scratch)?;
        let at = self.offset;
        self.offset += self.scratch.len() as u64;
        st.last_ts = Some(ts);
        st.index.push((ts, at));
        Ok(at)
    }

    /// Writes the index and footer and hands back the sink.
    pub fn finalize(mut self) -> Result<W, RecorderError> {
        let index_at = self.offset;
        let mut out = Vec::new();
        out.extend_from_slice(&(self.order.len() as u16).to_le_bytes());
        for id in &self.order {
            let st = &self.channels[id];
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&(st.index.len() as u32).to_le_bytes());
            for (ts, off) in &st.index {
                out.extend_from_slice(&ts.to_le_bytes());
                out.extend_from_slice(&off.to_le_bytes());
            }
        }
        out.extend_from_slice(FOOTER_MAGIC);
        out.extend_from_slice(&index_at.to_le_bytes());
        self.sink.write_all(&out)?;
        self.sink.flush()?;
        Ok(self.sink)
    }
}
