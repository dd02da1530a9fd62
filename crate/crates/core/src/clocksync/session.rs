use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clock::{SimClock, SyncState, MAX_DRIFT_PPM};
use super::exchange::{estimate, two_step_exchange, Estimate, LinkModel};
use super::servo::{servo_update, ServoState};
use super::ClockSyncError;

/// A slave device: its clock and the link to the master.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaveConfig {
    pub id: String,
    pub clock: SimClock,
    pub link: LinkModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncStatus {
    Synchronized,
    Unsynchronized,
}

/// Slave-side synchronization state machine.
///
/// The first valid sample is only remembered. The second one yields a
/// frequency estimate and a full phase step. From then on the PI servo
/// takes over.
#[derive(Debug, Clone)]
pub struct SlaveSync {
    id: String,
    clock: SimClock,
    link: LinkModel,
    servo: ServoState,
    first: Option<(i64, i64)>,
    last_t1: Option<i64>,
    received: usize,
    sync: SyncState,
    rng: ChaCha8Rng,
}

fn stream_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl SlaveSync {
    pub fn new(
        cfg: SlaveConfig,
        servo: ServoState,
        seed: u64,
        index: u64,
    ) -> Result<Self, ClockSyncError> {
        cfg.clock.validate()?;
        cfg.link.validate()?;
        Ok(SlaveSync {
            id: cfg.id,
            clock: cfg.clock,
            link: cfg.link,
            servo,
            first: None,
            last_t1: None,
            received: 0,
            sync: SyncState::unsynchronized(),
            rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, index)),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn servo(&self) -> &ServoState {
        &self.servo
    }

    pub fn sync_state(&self) -> &SyncState {
        &self.sync
    }

    pub fn samples_received(&self) -> usize {
        self.received
    }

    pub fn status(&self) -> SyncStatus {
        if self.received >= 2 {
            SyncStatus::Synchronized
        } else {
            SyncStatus::Unsynchronized
        }
    }

    /// Noise-free `slave - master` clock difference at `true_time`.
    pub fn residual(&self, master: &SimClock, true_time: i64) -> i64 {
        self.clock.ideal_local_time(true_time) - master.ideal_local_time(true_time)
    }

    /// Runs one exchange starting at `true_time` and applies the servo.
    /// Returns the estimate that was acted upon, if any.
    pub fn exchange(&mut self, master: &SimClock, true_time: i64) -> Option<Estimate> {
        let ex = two_step_exchange(master, &self.clock, &self.link, true_time, &mut self.rng)?;
        let est = estimate(&ex.sample).ok()?;
        let t1 = ex.sample.t1;
        self.received += 1;
        match (self.received, self.first) {
            (1, _) => self.first = Some((t1, est.offset)),
            (2, Some((t1_first, o_first))) => {
                let dt = (t1 - t1_first) as f64 * 1e-9;
                let freq = if dt > 0.0 {
                    ((est.offset - o_first) as f64 / (dt * 1e3)).clamp(-MAX_DRIFT_PPM, MAX_DRIFT_PPM)
                } else {
                    0.0
                };
                self.clock.apply_correction(est.offset, freq, ex.completed_at);
                self.servo.integral_ppm = freq;
                self.servo.last_offset_estimate = est.offset;
                self.set_epoch(ex.completed_at, 0);
            }
            _ => {
                let dt = (t1 - self.last_t1.unwrap_or(t1)) as f64 * 1e-9;
                if let Ok(out) = servo_update(&self.servo, est.offset, dt) {
                    self.clock.apply_correction(
                        out.offset_correction_ns,
                        out.rate_correction_ppm,
                        ex.completed_at,
                    );
                    self.servo = out.state;
                    self.set_epoch(ex.completed_at, est.offset - out.offset_correction_ns);
                }
            }
        }
        self.last_t1 = Some(t1);
        Some(est)
    }

    fn set_epoch(&mut self, true_time: i64, remaining_offset: i64) {
        let local = self.clock.local_time(true_time);
        self.sync = SyncState {
            synchronized: true,
            epoch_local: local,
            epoch_master: local - remaining_offset,
            master_per_local: 1.0,
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidualSample {
    pub true_time_ns: i64,
    pub residual_ns: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlaveTrace {
    pub id: String,
    pub status: SyncStatus,
    pub samples: Vec<ResidualSample>,
    /// 99th percentile of |residual| over the final 10% of the run.
    pub p99_final_ns: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncReport {
    pub duration_ns: i64,
    pub interval_ns: i64,
    pub slaves: Vec<SlaveTrace>,
}

impl SyncReport {
    /// `true_time_ns,slave_id,residual_ns` rows, time-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "true_time_ns,slave_id,residual_ns")?;
        let n = self.slaves.iter().map(|s| s.samples.len()).max().unwrap_or(0);
        for i in 0..n {
            for s in &self.slaves {
                if let Some(r) = s.samples.get(i) {
                    writeln!(w, "{},{},{}", r.true_time_ns, s.id, r.residual_ns)?;
                }
            }
        }
        Ok(())
    }
}

/// Nearest-rank percentile of absolute values; `q` in (0, 1].
pub fn abs_percentile(values: impl IntoIterator<Item = i64>, q: f64) -> Option<i64> {
    let mut v: Vec<i64> = values.into_iter().map(i64::abs).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Simulates `duration_s` of synchronization against a fixed master.
///
/// Exchanges start every `interval_s`; the residual of each slave is sampled
/// just before each exchange.
pub fn run_sync(
    master: &SimClock,
    slaves: &[SlaveConfig],
    duration_s: f64,
    interval_s: f64,
    seed: u64,
) -> Result<SyncReport, ClockSyncError> {
    run_sync_with(master, slaves, duration_s, interval_s, seed, ServoState::default())
}

pub fn run_sync_with(
    master: &SimClock,
    slaves: &[SlaveConfig],
    duration_s: f64,
    interval_s: f64,
    seed: u64,
    servo: ServoState,
) -> Result<SyncReport, ClockSyncError> {
    if !(interval_s > 0.0) || !(duration_s > 10.0 * interval_s) {
        return Err(ClockSyncError::InvalidInterval);
    }
    master.validate()?;
    let interval_ns = (interval_s * 1e9).round() as i64;
    let duration_ns = (duration_s * 1e9).round() as i64;
    let mut states = slaves
        .iter()
        .enumerate()
        .map(|(i, s)| SlaveSync::new(s.clone(), servo, seed, i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut traces: Vec<Vec<ResidualSample>> = vec![Vec::new(); states.len()];

    let mut t = 0;
    while t < duration_ns {
        for (st, trace) in states.iter_mut().zip(&mut traces) {
            trace.push(ResidualSample {
                true_time_ns: t,
                residual_ns: st.residual(master, t),
            });
            st.exchange(master, t);
        }
        t += interval_ns;
    }

    let tail_start = duration_ns - duration_ns / 10;
    let slaves = states
        .into_iter()
        .zip(traces)
        .map(|(st, samples)| {
            let status = st.status();
            let p99_final_ns = match status {
                SyncStatus::Synchronized => abs_percentile(
                    samples
                        .iter()
                        .filter(|s| s.true_time_ns >= tail_start)
                        .map(|s| s.residual_ns),
                    0.99,
                ),
                SyncStatus::Unsynchronized => None,
            };
            SlaveTrace {
                id: st.id,
                status,
                samples,
                p99_final_ns,
            }
        })
        .collect();
    Ok(SyncReport {
        duration_ns,
        interval_ns,
        slaves,
    })
}
