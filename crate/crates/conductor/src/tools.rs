use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use multiview_core::clocksync::{run_sync_with, SimClock, SyncReport};
use multiview_core::pipeline::{
    default_tolerance, demosaic_bilinear, synth_stereo, StreamAligner, SynthConfig,
};
use multiview_core::recorder::{ChannelKind, FramePayload, KinematicsSample, Recording};

use crate::config::SimConfig;
use crate::ConductorError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub width: u32,
    pub height: u32,
    pub streams: usize,
    pub frames: u64,
    pub tuples: u64,
    pub elapsed_s: f64,
    /// Frames per second per stream.
    pub fps: f64,
}

pub const BENCH_STREAMS: usize = 2;
const BENCH_RATE_HZ: f64 = 30.0;

/// Synthesizes, demosaics (both eyes) and aligns `frames` stereo frames
/// on each of two camera streams. `width` x `height` is per eye.
pub fn bench_pipeline(width: u32, height: u32, frames: u64) -> Result<BenchReport, ConductorError> {
    let cfgs: Vec<SynthConfig> = (0..BENCH_STREAMS)
        .map(|s| SynthConfig::new(width, height, s as u16 + 1))
        .collect();
    let clocks = [SimClock::with_offset(1_500), SimClock::with_offset(-2_000)];
    let period = (1e9 / BENCH_RATE_HZ).round() as i64;
    let mut aligner = StreamAligner::new(BENCH_STREAMS, default_tolerance(BENCH_RATE_HZ))?;
    let mut tuples = 0u64;
    let start = Instant::now();
    for n in 0..frames {
        let t = n as i64 * period;
        for (s, (cfg, clock)) in cfgs.iter().zip(&clocks).enumerate() {
            let frame = synth_stereo(cfg, clock, t, n)?;
            let left = demosaic_bilinear(&frame.left)?;
            let right = demosaic_bilinear(&frame.right)?;
            std::hint::black_box((&left, &right));
            tuples += aligner.push(s, frame.exposure_ts(), n)?.len() as u64;
        }
    }
    let elapsed_s = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        width,
        height,
        streams: BENCH_STREAMS,
        frames,
        tuples,
        elapsed_s,
        fps: frames as f64 / elapsed_s,
    })
}

/// Writes one JSON line per record in file order, paced so that record
/// timestamps play back at `speed` times real time. An infinite speed
/// disables pacing. Returns the number of records written.
pub fn replay<W: Write>(rec: &Recording, speed: f64, mut out: W) -> Result<u64, ConductorError> {
    if !(speed > 0.0) {
        return Err(ConductorError::Config("speed must be positive".into()));
    }
    let start = Instant::now();
    let mut first_ts = None;
    let mut count = 0;
    for r in rec.records() {
        let t0 = *first_ts.get_or_insert(r.ts);
        if speed.is_finite() {
            let due = Duration::from_secs_f64(r.ts.saturating_sub(t0) as f64 * 1e-9 / speed);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        let kind = rec.channel(r.channel).map(|c| c.kind);
        let mut line = json!({
            "channel": r.channel,
            "ts": r.ts,
            "offset": r.offset,
            "crc_ok": r.crc_ok(),
        });
        match kind {
            Some(ChannelKind::Kinematics) => {
                if let Ok(k) = KinematicsSample::decode(r.payload) {
                    line["arms"] = k
                        .arms
                        .iter()
                        .map(|a| {
                            json!({
                                "arm_id": a.arm_id,
                                "position": a.position,
                                "rotation": a.rotation,
                                "joints": a.joints,
                            })
                        })
                        .collect();
                }
            }
            Some(ChannelKind::StereoFrame) => {
                if let Ok(f) = FramePayload::decode(r.payload) {
                    line["frame"] = json!({
                        "stream_id": f.stream_id,
                        "seq": f.seq,
                        "exposure_ts": f.exposure_ts,
                        "width": f.width,
                        "height": f.height,
                        "left_crc": f.left_crc,
                        "right_crc": f.right_crc,
                        "pixels": f.pixels.is_some(),
                    });
                }
            }
            _ => line["bytes"] = json!(r.payload.len()),
        }
        writeln!(out, "{line}")?;
        count += 1;
    }
    Ok(count)
}

/// Clock synchronization of the configured slaves over `duration_s`.
pub fn sync_report(cfg: &SimConfig, duration_s: f64) -> Result<SyncReport, ConductorError> {
    Ok(run_sync_with(
        &cfg.clock.master,
        &cfg.clock.slaves,
        duration_s,
        cfg.clock.sync_interval_s,
        cfg.seed,
        cfg.servo()?,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_aligns_every_frame() {
        let r = bench_pipeline(64, 48, 10).unwrap();
        assert_eq!(r.tuples, 10);
        assert!(r.fps > 0.0);
    }

    #[test]
    fn replay_rejects_bad_speed() {
        let rec = Recording::from_bytes({
            let w = multiview_core::recorder::RecordWriter::new(Vec::new(), &[]).unwrap();
            w.finalize().unwrap()
        })
        .unwrap();
        assert!(replay(&rec, 0.0, Vec::new()).is_err());
        assert_eq!(replay(&rec, f64::INFINITY, Vec::new()).unwrap(), 0);
    }

    #[test]
    fn sync_report_of_reference_config() {
        let rep = sync_report(&SimConfig::reference(), 5.0).unwrap();
        assert_eq!(rep.slaves.len(), 2);
    }
}
