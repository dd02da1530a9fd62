use std::collections::VecDeque;

use serde::Serialize;

use super::PipelineError;

/// Half the nominal frame period, ns.
pub fn default_tolerance(frame_rate_hz: f64) -> i64 {
    (0.5e9 / frame_rate_hz).round() as i64
}

/// One frame from every stream; `frames[s]` indexes stream `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedTuple {
    pub frames: Vec<usize>,
    pub timestamps: Vec<i64>,
    /// max - min of the master-domain timestamps.
    pub spread: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Alignment {
    pub tuples: Vec<AlignedTuple>,
    /// Unused frames per stream.
    pub dropped: Vec<usize>,
}

/// A tuple as emitted by [`StreamAligner`], carrying the queued items.
#[derive(Debug, Clone, PartialEq)]
pub struct Group<T> {
    pub items: Vec<T>,
    pub timestamps: Vec<i64>,
    pub spread: i64,
}

/// Online aligner over `n` streams of master-time-stamped items.
///
/// Works on the oldest pending frame of each stream. When all of them fit
/// in the tolerance window they form a tuple; otherwise the oldest one can
/// no longer fit any tuple and is dropped. Matching the earliest
/// compatible frames this way yields the largest possible number of
/// tuples. Stream 0 is the reference the output is ordered by.
#[derive(Debug, Clone)]
pub struct StreamAligner<T> {
    tolerance: i64,
    queues: Vec<VecDeque<(i64, T)>>,
    last_ts: Vec<Option<i64>>,
    dropped: Vec<usize>,
}

impl<T> StreamAligner<T> {
    pub fn new(streams: usize, tolerance: i64) -> Result<Self, PipelineError> {
        if streams == 0 || tolerance < 0 {
            return Err(PipelineError::InvalidAlignment);
        }
        Ok(StreamAligner {
            tolerance,
            queues: (0..streams).map(|_| VecDeque::new()).collect(),
            last_ts: vec![None; streams],
            dropped: vec![0; streams],
        })
    }

    pub fn tolerance(&self) -> i64 {
        self.tolerance
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn pending(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    /// Queues one item. Timestamps must strictly increase per stream.
    pub fn push(&mut self, stream: usize, ts: i64, item: T) -> Result<Vec<Group<T>>, PipelineError> {
        let last = self.last_ts.get_mut(stream).ok_or(PipelineError::UnknownStream(stream))?;
        if last.is_some_and(|l| ts <= l) {
            return Err(PipelineError::NonMonotonic { stream, ts });
        }
        *last = Some(ts);
        self.queues[stream].push_back((ts, item));
        Ok(self.drain())
    }

    fn drain(&mut self) -> Vec<Group<T>> {
        let mut out = Vec::new();
        while self.queues.iter().all(|q| !q.is_empty()) {
            let heads = self.queues.iter().map(|q| q[0].0);
            let (mut lo, mut hi, mut lo_stream) = (i64::MAX, i64::MIN, 0);
            for (s, ts) in heads.enumerate() {
                if ts < lo {
                    lo = ts;
                    lo_stream = s;
                }
                hi = hi.max(ts);
            }
            if hi - lo <= self.tolerance {
                let (timestamps, items) = self
                    .queues
                    .iter_mut()
                    .map(|q| q.pop_front().expect("non-empty"))
                    .unzip();
                out.push(Group {
                    items,
                    timestamps,
                    spread: hi - lo,
                });
            } else {
                self.queues[lo_stream].pop_front();
                self.dropped[lo_stream] += 1;
            }
        }
        out
    }

    /// Ends the run: everything still queued is dropped.
    pub fn finish(mut self) -> Vec<usize> {
        for (q, d) in self.queues.iter_mut().zip(&mut self.dropped) {
            *d += q.len();
            q.clear();
        }
        self.dropped
    }
}

/// Offline alignment of complete streams of master timestamps.
pub fn align_streams(streams: &[Vec<i64>], tolerance: i64) -> Result<Alignment, PipelineError> {
    let mut al = StreamAligner::new(streams.len(), tolerance)?;
    for (s, ts) in streams.iter().enumerate() {
        if let Some(w) = ts.windows(2).find(|w| w[1] <= w[0]) {
            return Err(PipelineError::NonMonotonic { stream: s, ts: w[1] });
        }
    }
    // interleave in time order so queues stay short
    let mut cursor = vec![0usize; streams.len()];
    let mut tuples = Vec::new();
    loop {
        let next = (0..streams.len())
            .filter(|&s| cursor[s] < streams[s].len())
            .min_by_key(|&s| (streams[s][cursor[s]], s));
        let Some(s) = next else { break };
        let idx = cursor[s];
        cursor[s] += 1;
        for g in al.push(s, streams[s][idx], idx)? {
            tuples.push(AlignedTuple {
                frames: g.items,
                timestamps: g.timestamps,
                spread: g.spread,
            });
        }
    }
    Ok(Alignment {
        tuples,
        dropped: al.finish(),
    })
}
