use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::clocksync::SimClock;

/// Color filter layout. Only RGGB is produced by the synthetic sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BayerPattern {
    Rggb,
}

/// A raw global-shutter frame: one exposure timestamp for every pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BayerFrame {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub pattern: BayerPattern,
    /// Row-major samples.
    pub pixels: Vec<u16>,
    pub stream_id: u16,
    pub seq: u64,
    /// Device-clock nanoseconds.
    pub exposure_ts: i64,
}

impl BayerFrame {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return Err(PipelineError::BitDepth(self.bit_depth));
        }
        if self.pixels.len() != self.width as usize * self.height as usize {
            return Err(PipelineError::PixelCount);
        }
        if !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return Err(PipelineError::Dimensions {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    pub fn max_value(&self) -> u16 {
        max_value(self.bit_depth)
    }

    pub fn at(&self, x: u32, y: u32) -> u16 {
        self.pixels[(y * self.width + x) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub pixels: Vec<[u16; 3]>,
    pub stream_id: u16,
    pub seq: u64,
    pub exposure_ts: i64,
}

/// Left and right optical channels read out of one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StereoFrame {
    pub left: BayerFrame,
    pub right: BayerFrame,
}

impl StereoFrame {
    pub fn exposure_ts(&self) -> i64 {
        self.left.exposure_ts
    }

    pub fn seq(&self) -> u64 {
        self.left.seq
    }

    pub fn stream_id(&self) -> u16 {
        self.left.stream_id
    }
}

fn max_value(bit_depth: u8) -> u16 {
    if bit_depth >= 16 {
        u16::MAX
    } else {
        (1u16 << bit_depth) - 1
    }
}

/// Synthetic sensor settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_depth")]
    pub bit_depth: u8,
    pub stream_id: u16,
}

fn default_depth() -> u8 {
    8
}

/// Bits of `seq` carried by the corner block.
pub const SEQ_BITS: u32 = 32;
const CELL: u32 = 2;
const CELLS_X: u32 = 8;
const CELLS_Y: u32 = SEQ_BITS / CELLS_X;

/// Smallest frame that still has room for the corner block.
pub const MIN_WIDTH: u32 = CELL * CELLS_X;
pub const MIN_HEIGHT: u32 = CELL * CELLS_Y;

impl SynthConfig {
    pub fn new(width: u32, height: u32, stream_id: u16) -> Self {
        SynthConfig {
            width,
            height,
            bit_depth: 8,
            stream_id,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return Err(PipelineError::BitDepth(self.bit_depth));
        }
        if !self.width.is_multiple_of(2)
            || !self.height.is_multiple_of(2)
            || self.width < MIN_WIDTH
            || self.height < MIN_HEIGHT
        {
            return Err(PipelineError::Dimensions {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
fn pattern_value(cfg: &SynthConfig, x: u32, y: u32, seq: u64) -> u16 {
    let max = max_value(cfg.bit_depth) as u64;
    let grad = (x as u64 * max) / cfg.width as u64 / 2 + (y as u64 * max) / cfg.height as u64 / 4;
    let checker = if ((x as u64).wrapping_add(seq) / 8 + (y / 8) as u64).is_multiple_of(2) { max / 8 } else { 0 };
    let tint = (cfg.stream_id as u64 * 37) % (max / 16 + 1);
    ((grad + checker + tint) % (max + 1)) as u16
}

/// Deterministic test pattern for `(stream_id, seq)`: gradient, a checker
/// that scrolls with `seq`, and `seq` encoded in the top-left corner.
pub fn synth_pixels(cfg: &SynthConfig, seq: u64) -> Result<Vec<u16>, PipelineError> {
    cfg.validate()?;
    let max = max_value(cfg.bit_depth);
    let m = max as u64;
    let tint = (cfg.stream_id as u64 * 37) % (m / 16 + 1);
    // gradient terms separate by axis; the sum stays below 15/16 of max
    let cols: Vec<(u16, bool)> = (0..cfg.width as u64)
        .map(|x| {
            let odd = (x.wrapping_add(seq) / 8) % 2 == 1;
            ((x * m / cfg.width as u64 / 2 + tint) as u16, odd)
        })
        .collect();
    let checker = (m / 8) as u16;
    let mut px = Vec::with_capacity(cfg.width as usize * cfg.height as usize);
    for y in 0..cfg.height as u64 {
        let row = (y * m / cfg.height as u64 / 4) as u16;
        let odd_row = (y / 8) % 2 == 1;
        px.extend(cols.iter().map(|&(c, odd)| {
            if odd == odd_row {
                c + row + checker
            } else {
                c + row
            }
        }));
    }
    for bit in 0..SEQ_BITS {
        let on = (seq >> bit) & 1 == 1;
        let (cx, cy) = ((bit % CELLS_X) * CELL, (bit / CELLS_X) * CELL);
        for y in cy..cy + CELL {
            for x in cx..cx + CELL {
                px[(y * cfg.width + x) as usize] = if on { max } else { 0 };
            }
        }
    }
    Ok(px)
}

/// Reads the corner block back. Only the low [`SEQ_BITS`] bits survive.
pub fn decode_seq(frame: &BayerFrame) -> Result<u64, PipelineError> {
    if frame.width < MIN_WIDTH || frame.height < MIN_HEIGHT {
        return Err(PipelineError::Dimensions {
            width: frame.width,
            height: frame.height,
        });
    }
    let half = frame.max_value() / 2;
    let mut seq = 0u64;
    for bit in 0..SEQ_BITS {
        let (cx, cy) = ((bit % CELLS_X) * CELL, (bit / CELLS_X) * CELL);
        if frame.at(cx, cy) > half {
            seq |= 1 << bit;
        }
    }
    Ok(seq)
}

/// One frame of the synthetic sensor, stamped by `clock` at `true_time`.
pub fn synth_capture(
    cfg: &SynthConfig,
    clock: &SimClock,
    true_time: i64,
    seq: u64,
) -> Result<BayerFrame, PipelineError> {
    Ok(BayerFrame {
        width: cfg.width,
        height: cfg.height,
        bit_depth: cfg.bit_depth,
        pattern: BayerPattern::Rggb,
        pixels: synth_pixels(cfg, seq)?,
        stream_id: cfg.stream_id,
        seq,
        exposure_ts: clock.local_time(true_time),
    })
}

/// Splits a side-by-side sensor readout into its two optical channels.
/// Both halves keep the sensor's single exposure timestamp.
pub fn split_stereo(sensor: &BayerFrame) -> Result<StereoFrame, PipelineError> {
    sensor.validate()?;
    if !sensor.width.is_multiple_of(4) {
        return Err(PipelineError::Dimensions {
            width: sensor.width,
            height: sensor.height,
        });
    }
    let half = sensor.width / 2;
    let take = |x0: u32| -> BayerFrame {
        let mut pixels = Vec::with_capacity(half as usize * sensor.height as usize);
        for y in 0..sensor.height {
            let row = (y * sensor.width) as usize;
            pixels.extend_from_slice(&sensor.pixels[row + x0 as usize..row + (x0 + half) as usize]);
        }
        BayerFrame {
            width: half,
            height: sensor.height,
            bit_depth: sensor.bit_depth,
            pattern: sensor.pattern,
            pixels,
            stream_id: sensor.stream_id,
            seq: sensor.seq,
            exposure_ts: sensor.exposure_ts,
        }
    };
    Ok(StereoFrame {
        left: take(0),
        right: take(half),
    })
}

/// Captures a stereo pair of `width x height` per eye from one
/// `2*width x height` sensor.
pub fn synth_stereo(
    cfg: &SynthConfig,
    clock: &SimClock,
    true_time: i64,
    seq: u64,
) -> Result<StereoFrame, PipelineError> {
    let sensor = SynthConfig {
        width: cfg.width * 2,
        ..*cfg
    };
    split_stereo(&synth_capture(&sensor, clock, true_time, seq)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pattern_matches_pixel_formula() {
        for (w, h, depth, sid, seq) in [(64, 48, 8, 3, 42u64), (40, 16, 16, 9, 7), (32, 8, 8, 0, u64::MAX - 3)] {
            let cfg = SynthConfig { width: w, height: h, bit_depth: depth, stream_id: sid };
            let px = synth_pixels(&cfg, seq).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let i = (y * w + x) as usize;
                    let in_block = x < MIN_WIDTH && y < MIN_HEIGHT;
                    if !in_block {
                        assert_eq!(px[i], pattern_value(&cfg, x, y, seq), "({x}, {y})");
                    }
                }
            }
        }
    }

    #[test]
    fn capture_is_deterministic() {
        let cfg = SynthConfig::new(64, 48, 3);
        let a = synth_capture(&cfg, &SimClock::ideal(), 10, 42).unwrap();
        let b = synth_capture(&cfg, &SimClock::with_offset(5), 99, 42).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert_ne!(a.exposure_ts, b.exposure_ts);
    }

    #[test]
    fn seq_round_trip() {
        for depth in [8, 16] {
            let cfg = SynthConfig {
                bit_depth: depth,
                ..SynthConfig::new(32, 16, 1)
            };
            for seq in [0u64, 1, 2, 255, 123_456, u32::MAX as u64] {
                let f = synth_capture(&cfg, &SimClock::ideal(), 0, seq).unwrap();
                assert_eq!(decode_seq(&f).unwrap(), seq);
            }
        }
    }

    #[test]
    fn odd_width_rejected() {
        let cfg = SynthConfig::new(7, 16, 0);
        assert!(matches!(
            synth_capture(&cfg, &SimClock::ideal(), 0, 0),
            Err(PipelineError::Dimensions { width: 7, .. })
        ));
    }

    #[test]
    fn stereo_halves_share_timestamp() {
        let cfg = SynthConfig::new(32, 16, 0);
        let clock = SimClock {
            noise_sigma_ns: 300.0,
            seed: 4,
            ..SimClock::with_drift(20.0)
        };
        let s = synth_stereo(&cfg, &clock, 1_234_567, 9).unwrap();
        assert_eq!(s.left.exposure_ts, s.right.exposure_ts);
        assert_eq!((s.left.width, s.right.width), (32, 32));
        assert_eq!(decode_seq(&s.left).unwrap(), 9);
        assert_eq!(s.left.pixels.len(), 32 * 16);
    }

    #[test]
    fn stereo_needs_width_multiple_of_four() {
        let sensor = BayerFrame {
            width: 6,
            height: 2,
            bit_depth: 8,
            pattern: BayerPattern::Rggb,
            pixels: vec![0; 12],
            stream_id: 0,
            seq: 0,
            exposure_ts: 0,
        };
        assert!(split_stereo(&sensor).is_err());
    }
}
