//! Synthetic stereo capture and the frame-processing path.
//!
//! Frames come from a simulated global-shutter sensor whose two optical
//! channels share one readout and one timestamp. Processing stages are
//! pure functions of a frame, so they can run on any thread. Alignment
//! groups frames across streams once their timestamps are in the master
//! time domain.

mod align;
mod demosaic;
mod frame;
mod latency;
mod rectify;

pub use align::{align_streams, default_tolerance, AlignedTuple, Alignment, Group, StreamAligner};
pub use demosaic::demosaic_bilinear;
pub use frame::{
    decode_seq, split_stereo, synth_capture, synth_pixels, synth_stereo, BayerFrame, BayerPattern,
    RgbFrame, StereoFrame, SynthConfig, MIN_HEIGHT, MIN_WIDTH, SEQ_BITS,
};
pub use latency::{latency_report, LatencyReport, Stage, StageLatency, StageShare, DEFAULT_BUDGET_NS};
pub use rectify::{rectify_pair, Rectification, StereoRig};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("unsupported frame size {width}x{height}")]
    Dimensions { width: u32, height: u32 },
    #[error("unsupported bit depth {0}")]
    BitDepth(u8),
    #[error("pixel buffer does not match frame size")]
    PixelCount,
    #[error("stereo baseline is zero")]
    ZeroBaseline,
    #[error("optical axes are parallel to the baseline")]
    DegenerateRig,
    #[error("stage durations overflow")]
    LatencyOverflow,
    #[error("alignment needs at least one stream and a non-negative tolerance")]
    InvalidAlignment,
    #[error("no stream {0}")]
    UnknownStream(usize),
    #[error("stream {stream}: timestamp {ts} does not increase")]
    NonMonotonic { stream: usize, ts: i64 },
}
