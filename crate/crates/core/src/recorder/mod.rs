//! The `MVTR` recording format.
//!
//! A file is a header and channel table, a stream of CRC-protected records
//! stamped in master time, and a footer index for seeking:
//!
//! ```text
//! "MVTR" version:u8=1 channel_count:u16
//! channel*: id:u16 kind:u8 name_len:u8 name rate_hz:f64
//! record*:  channel:u16 master_ts:u64 len:u32 payload crc32:u32
//! index:    channel_count:u16 (id:u16 count:u32 (ts:u64 offset:u64)*)*
//! footer:   "RTVM" index_offset:u64
//! ```
//!
//! All integers are little-endian. The CRC is CRC-32/IEEE over channel id,
//! timestamp and payload. A file without a valid footer is treated as
//! truncated and read by scanning records from the start.

mod format;
mod payload;
mod reader;
mod verify;
mod writer;

pub use format::{
    preamble_len, record_crc, record_len, ChannelDescriptor, ChannelKind, FOOTER_LEN, FOOTER_MAGIC,
    HEADER_LEN, MAGIC, MAX_NAME_LEN, MAX_PAYLOAD, VERSION,
};
pub use payload::{pixel_crc, ArmSample, FramePayload, KinematicsSample};
pub use reader::{Completeness, Record, Recording, Records};
pub use verify::{verify, verify_recording, ChannelStats, CrcFailure, VerifyReport};
pub use writer::RecordWriter;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not an MVTR file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("channel {0} defined twice")]
    DuplicateChannel(u16),
    #[error("too many channels")]
    TooManyChannels,
    #[error("channel name longer than 64 bytes: {0:?}")]
    NameTooLong(String),
    #[error("channel {0}: rate must be finite and non-negative")]
    InvalidRate(u16),
    #[error("unknown channel {0}")]
    UnknownChannel(u16),
    #[error("channel {channel}: timestamp {ts} before {last}")]
    TimestampRegression { channel: u16, last: u64, ts: u64 },
    #[error("payload of {0} bytes exceeds 64 MiB")]
    PayloadTooLarge(usize),
    #[error("no record at offset {0}")]
    BadOffset(u64),
    #[error("bad payload: {0}")]
    BadPayload(&'static str),
}
