use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::clock::SimClock;
use super::ClockSyncError;
use crate::half_even;

/// Time between the slave receiving Sync and sending Delay_Req.
pub const DEFAULT_TURNAROUND_NS: i64 = 1_000_000;

/// One-way network path characteristics, true-time nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub delay_m2s_ns: i64,
    pub delay_s2m_ns: i64,
    #[serde(default)]
    pub jitter_sigma_ns: f64,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default = "default_turnaround")]
    pub turnaround_ns: i64,
}

fn default_turnaround() -> i64 {
    DEFAULT_TURNAROUND_NS
}

impl LinkModel {
    pub fn symmetric(delay_ns: i64, jitter_sigma_ns: f64) -> Self {
        LinkModel {
            delay_m2s_ns: delay_ns,
            delay_s2m_ns: delay_ns,
            jitter_sigma_ns,
            drop_prob: 0.0,
            turnaround_ns: DEFAULT_TURNAROUND_NS,
        }
    }

    pub fn validate(&self) -> Result<(), ClockSyncError> {
        if self.delay_m2s_ns <= 0 || self.delay_s2m_ns <= 0 {
            return Err(ClockSyncError::InvalidLink("delays must be positive"));
        }
        if !(self.jitter_sigma_ns >= 0.0) || !self.jitter_sigma_ns.is_finite() {
            return Err(ClockSyncError::InvalidLink("jitter must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(ClockSyncError::InvalidLink("drop probability outside [0, 1]"));
        }
        if self.turnaround_ns < 0 {
            return Err(ClockSyncError::InvalidLink("negative turnaround"));
        }
        Ok(())
    }

    /// Draws one transit time; jitter is truncated so the delay stays positive.
    fn draw<R: Rng + ?Sized>(&self, base: i64, rng: &mut R) -> i64 {
        if self.jitter_sigma_ns == 0.0 {
            return base;
        }
        let n = Normal::new(0.0, self.jitter_sigma_ns).expect("validated sigma");
        let d = base + n.sample(rng).round_ties_even() as i64;
        d.max(1)
    }
}

/// Two-step timestamps: `t1`/`t4` on the master clock, `t2`/`t3` on the slave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncSample {
    /// Sync sent (master)
    pub t1: i64,
    /// Sync received (slave)
    pub t2: i64,
    /// Delay_Req sent (slave)
    pub t3: i64,
    /// Delay_Req received (master)
    pub t4: i64,
}

/// A completed exchange with the true time at which the master received
/// the Delay_Req, when the slave can act on the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exchange {
    pub sample: SyncSample,
    pub completed_at: i64,
}

/// Simulates Sync/Follow_Up followed by Delay_Req/Delay_Resp starting at
/// `true_time`. Returns `None` when either message is dropped.
pub fn two_step_exchange<R: Rng + ?Sized>(
    master: &SimClock,
    slave: &SimClock,
    link: &LinkModel,
    true_time: i64,
    rng: &mut R,
) -> Option<Exchange> {
    let sync_lost = rng.random::<f64>() < link.drop_prob;
    let req_lost = rng.random::<f64>() < link.drop_prob;
    let d_m2s = link.draw(link.delay_m2s_ns, rng);
    let d_s2m = link.draw(link.delay_s2m_ns, rng);
    if sync_lost || req_lost {
        return None;
    }
    let recv = true_time + d_m2s;
    let send = recv + link.turnaround_ns;
    let back = send + d_s2m;
    Some(Exchange {
        sample: SyncSample {
            t1: master.local_time(true_time),
            t2: slave.local_time(recv),
            t3: slave.local_time(send),
            t4: master.local_time(back),
        },
        completed_at: back,
    })
}

/// Offset (slave minus master) and mean path delay, ns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimate {
    pub offset: i64,
    pub mean_delay: i64,
}

/// Standard end-to-end estimator.
pub fn estimate(sample: &SyncSample) -> Result<Estimate, ClockSyncError> {
    if sample.t3 < sample.t2 {
        return Err(ClockSyncError::InvalidSample);
    }
    let ms = sample.t2 - sample.t1;
    let sm = sample.t4 - sample.t3;
    let mean_delay = half_even(ms + sm);
    if mean_delay <= 0 {
        return Err(ClockSyncError::ImplausibleDelay(mean_delay));
    }
    Ok(Estimate {
        offset: half_even(ms - sm),
        mean_delay,
    })
}
