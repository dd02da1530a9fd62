use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::format::ChannelKind;
use super::reader::{Completeness, Recording};
use super::RecorderError;
use crate::pipeline::{align_streams, default_tolerance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub id: u16,
    pub name: String,
    pub kind: ChannelKind,
    pub records: usize,
    pub crc_failures: usize,
    pub first_ts: Option<u64>,
    pub last_ts: Option<u64>,
    /// Records per second over the observed span.
    pub rate_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrcFailure {
    pub offset: u64,
    pub channel: u16,
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub truncated: bool,
    pub channels: Vec<ChannelStats>,
    pub crc_failures: Vec<CrcFailure>,
    /// Offsets where a record could not even be framed.
    pub framing_errors: Vec<u64>,
    /// Largest spread among aligned tuples of the stereo channels.
    pub max_stereo_skew_ns: Option<i64>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        !self.truncated && self.crc_failures.is_empty() && self.framing_errors.is_empty()
    }
}

pub fn verify(path: impl AsRef<Path>) -> Result<VerifyReport, RecorderError> {
    Ok(verify_recording(&Recording::open(path)?))
}

/// Recomputes every CRC. Finalized files are walked through the index so
/// a damaged record does not hide the ones behind it.
pub fn verify_recording(rec: &Recording) -> VerifyReport {
    let offsets: Vec<u64> = match rec.completeness() {
        Completeness::Finalized => {
            let mut v: Vec<u64> = rec
                .channels()
                .iter()
                .flat_map(|c| rec.index(c.id).unwrap_or(&[]).iter().map(|(_, o)| *o))
                .collect();
            v.sort_unstable();
            v
        }
        Completeness::Truncated { .. } => rec.records().map(|r| r.offset).collect(),
    };

    let mut per: BTreeMap<u16, ChannelStats> = rec
        .channels()
        .iter()
        .map(|c| {
            (
                c.id,
                ChannelStats {
                    id: c.id,
                    name: c.name.clone(),
                    kind: c.kind,
                    records: 0,
                    crc_failures: 0,
                    first_ts: None,
                    last_ts: None,
                    rate_hz: None,
                },
            )
        })
        .collect();
    let mut stereo: BTreeMap<u16, Vec<i64>> = BTreeMap::new();
    let mut crc_failures = Vec::new();
    let mut framing_errors = Vec::new();

    for off in offsets {
        let Ok(r) = rec.read_at(off) else {
            framing_errors.push(off);
            continue;
        };
        let st = per.get_mut(&r.channel).expect("channel known to reader");
        st.records += 1;
        if !r.crc_ok() {
            st.crc_failures += 1;
            crc_failures.push(CrcFailure {
                offset: off,
                channel: r.channel,
                ts: r.ts,
            });
            continue;
        }
        st.first_ts = Some(st.first_ts.map_or(r.ts, |f| f.min(r.ts)));
        st.last_ts = Some(st.last_ts.map_or(r.ts, |l| l.max(r.ts)));
        if st.kind == ChannelKind::StereoFrame {
            let ts = stereo.entry(r.channel).or_default();
            if ts.last().is_none_or(|l| (r.ts as i64) > *l) {
                ts.push(r.ts as i64);
            }
        }
    }

    for st in per.values_mut() {
        let good = st.records - st.crc_failures;
        if let (Some(a), Some(b)) = (st.first_ts, st.last_ts) {
            if good > 1 && b > a {
                st.rate_hz = Some((good - 1) as f64 * 1e9 / (b - a) as f64);
            }
        }
    }

    let max_stereo_skew_ns = stereo_skew(rec, &stereo);
    VerifyReport {
        truncated: rec.is_truncated(),
        channels: per.into_values().collect(),
        crc_failures,
        framing_errors,
        max_stereo_skew_ns,
    }
}

fn stereo_skew(rec: &Recording, stereo: &BTreeMap<u16, Vec<i64>>) -> Option<i64> {
    if stereo.len() < 2 {
        return None;
    }
    let fastest = stereo
        .keys()
        .filter_map(|id| rec.channel(*id))
        .map(|c| c.nominal_rate_hz)
        .fold(0.0, f64::max);
    let tol = if fastest > 0.0 {
        default_tolerance(fastest)
    } else {
        i64::MAX / 4
    };
    let streams: Vec<Vec<i64>> = stereo.values().cloned().collect();
    let al = align_streams(&streams, tol).ok()?;
    al.tuples.iter().map(|t| t.spread).max()
}
