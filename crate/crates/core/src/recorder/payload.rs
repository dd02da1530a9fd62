use super::format::Cursor;
use super::RecorderError;
use crate::kinematics::{UnitQuat, Vec3};
use crate::pipeline::StereoFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSample {
    pub arm_id: u8,
    pub joints: Vec<f64>,
    pub rotation: UnitQuat,
    pub position: Vec3,
}

/// Payload of a KINEMATICS record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KinematicsSample {
    pub arms: Vec<ArmSample>,
}

fn bad(what: &'static str) -> RecorderError {
    RecorderError::BadPayload(what)
}

impl KinematicsSample {
    pub fn encode(&self) -> Result<Vec<u8>, RecorderError> {
        let count = u8::try_from(self.arms.len()).map_err(|_| bad("more than 255 arms"))?;
        let mut out = vec![count];
        for a in &self.arms {
            let n = u8::try_from(a.joints.len()).map_err(|_| bad("more than 255 joints"))?;
            out.push(a.arm_id);
            out.push(n);
            for q in &a.joints {
                out.extend_from_slice(&q.to_le_bytes());
            }
            for v in a.rotation.to_array() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in a.position.to_array() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a payload. The stored quaternion is kept bit-exact and must
    /// have unit norm within 1e-9.
    pub fn decode(bytes: &[u8]) -> Result<Self, RecorderError> {
        let mut c = Cursor::new(bytes, 0);
        let short = || bad("kinematics payload too short");
        let count = c.u8().ok_or_else(short)?;
        let mut arms = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let arm_id = c.u8().ok_or_else(short)?;
            let n = c.u8().ok_or_else(short)?;
            let joints = (0..n).map(|_| c.f64()).collect::<Option<Vec<_>>>().ok_or_else(short)?;
            let mut q = [0.0; 4];
            for v in &mut q {
                *v = c.f64().ok_or_else(short)?;
            }
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= 1e-9) {
                return Err(bad("quaternion not normalized"));
            }
            let mut p = [0.0; 3];
            for v in &mut p {
                *v = c.f64().ok_or_else(short)?;
            }
            arms.push(ArmSample {
                arm_id,
                joints,
                rotation: UnitQuat::from_stored(q),
                position: Vec3::new(p[0], p[1], p[2]),
            });
        }
        if c.remaining() != 0 {
            return Err(bad("trailing bytes in kinematics payload"));
        }
        Ok(KinematicsSample { arms })
    }
}

/// Payload of a STEREO_FRAME record: frame metadata, a CRC of each eye's
/// pixels and optionally the pixels themselves.
///
/// Layout (little-endian): stream_id u16, seq u64, exposure_ts i64,
/// width u32, height u32 (per eye), bit_depth u8, flags u8 (bit 0: pixels
/// follow), left_crc u32, right_crc u32, then left and right samples,
/// one byte each at 8 bits or two bytes each at 16 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePayload {
    pub stream_id: u16,
    pub seq: u64,
    pub exposure_ts: i64,
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub left_crc: u32,
    pub right_crc: u32,
    pub pixels: Option<(Vec<u16>, Vec<u16>)>,
}

const FLAG_PIXELS: u8 = 1;

fn pixel_bytes(px: &[u16], bit_depth: u8, out: &mut Vec<u8>) {
    if bit_depth == 8 {
        out.extend(px.iter().map(|&v| v as u8));
    } else {
        for v in px {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn pixel_crc(px: &[u16], bit_depth: u8) -> u32 {
    let mut buf = Vec::with_capacity(px.len() * 2);
    pixel_bytes(px, bit_depth, &mut buf);
    crc32fast::hash(&buf)
}

impl FramePayload {
    pub fn from_frame(frame: &StereoFrame, with_pixels: bool) -> Self {
        let (l, r) = (&frame.left, &frame.right);
        FramePayload {
            stream_id: l.stream_id,
            seq: l.seq,
            exposure_ts: l.exposure_ts,
            width: l.width,
            height: l.height,
            bit_depth: l.bit_depth,
            left_crc: pixel_crc(&l.pixels, l.bit_depth),
            right_crc: pixel_crc(&r.pixels, r.bit_depth),
            pixels: with_pixels.then(|| (l.pixels.clone(), r.pixels.clone())),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36);
        out.extend_from_slice(&self.stream_id.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.exposure_ts.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.bit_depth);
        out.push(if self.pixels.is_some() { FLAG_PIXELS } else { 0 });
        out.extend_from_slice(&self.left_crc.to_le_bytes());
        out.extend_from_slice(&self.right_crc.to_le_bytes());
        if let Some((l, r)) = &self.pixels {
            pixel_bytes(l, self.bit_depth, &mut out);
            pixel_bytes(r, self.bit_depth, &mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RecorderError> {
        let mut c = Cursor::new(bytes, 0);
        let short = || bad("frame payload too short");
        let stream_id = c.u16().ok_or_else(short)?;
        let seq = c.u64().ok_or_else(short)?;
        let exposure_ts = c.i64().ok_or_else(short)?;
        let width = c.u32().ok_or_else(short)?;
        let height = c.u32().ok_or_else(short)?;
        let bit_depth = c.u8().ok_or_else(short)?;
        if bit_depth != 8 && bit_depth != 16 {
            return Err(bad("bit depth"));
        }
        let flags = c.u8().ok_or_else(short)?;
        let left_crc = c.u32().ok_or_else(short)?;
        let right_crc = c.u32().ok_or_else(short)?;
        let pixels = if flags & FLAG_PIXELS != 0 {
            let n = width as usize * height as usize;
            let mut read = || -> Option<Vec<u16>> {
                if bit_depth == 8 {
                    Some(c.bytes(n)?.iter().map(|&b| b as u16).collect())
                } else {
                    (0..n).map(|_| c.u16()).collect()
                }
            };
            let l = read().ok_or_else(short)?;
            let r = read().ok_or_else(short)?;
            if pixel_crc(&l, bit_depth) != left_crc || pixel_crc(&r, bit_depth) != right_crc {
                return Err(bad("pixel digest mismatch"));
            }
            Some((l, r))
        } else {
            None
        };
        if c.remaining() != 0 {
            return Err(bad("trailing bytes in frame payload"));
        }
        Ok(FramePayload {
            stream_id,
            seq,
            exposure_ts,
            width,
            height,
            bit_depth,
            left_crc,
            right_crc,
            pixels,
        })
    }
}
