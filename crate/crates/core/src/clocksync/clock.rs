use serde::{Deserialize, Serialize};

use super::ClockSyncError;

/// Largest frequency error a device clock may have, ppm.
pub const MAX_DRIFT_PPM: f64 = 500.0;

/// A free-running device clock with servo corrections.
///
/// `local = true + round((drift + rate_corr) * 1e-6 * true + noise) + offset0 + offset_corr`
/// in integer nanoseconds, rounding half to even.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    #[serde(default)]
    pub offset0_ns: i64,
    #[serde(default)]
    pub drift_ppm: f64,
    /// Timestamping noise, standard deviation in ns.
    #[serde(default)]
    pub noise_sigma_ns: f64,
    #[serde(default)]
    pub servo_offset_correction_ns: i64,
    #[serde(default)]
    pub servo_rate_correction_ppm: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock::ideal()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(u: u64) -> f64 {
    // (0, 1]
    ((u >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

impl SimClock {
    pub fn ideal() -> Self {
        SimClock {
            offset0_ns: 0,
            drift_ppm: 0.0,
            noise_sigma_ns: 0.0,
            servo_offset_correction_ns: 0,
            servo_rate_correction_ppm: 0.0,
            seed: 0,
        }
    }

    pub fn with_offset(offset0_ns: i64) -> Self {
        SimClock {
            offset0_ns,
            ..SimClock::ideal()
        }
    }

    pub fn with_drift(drift_ppm: f64) -> Self {
        SimClock {
            drift_ppm,
            ..SimClock::ideal()
        }
    }

    pub fn validate(&self) -> Result<(), ClockSyncError> {
        if !(self.drift_ppm.abs() <= MAX_DRIFT_PPM) {
            return Err(ClockSyncError::InvalidClock("drift beyond 500 ppm"));
        }
        if !(self.noise_sigma_ns >= 0.0) || !self.noise_sigma_ns.is_finite() {
            return Err(ClockSyncError::InvalidClock("negative noise"));
        }
        Ok(())
    }

    /// Effective frequency error including the servo's rate correction, ppm.
    pub fn rate_ppm(&self) -> f64 {
        self.drift_ppm + self.servo_rate_correction_ppm
    }

    fn noise(&self, true_time: i64) -> f64 {
        if self.noise_sigma_ns == 0.0 {
            return 0.0;
        }
        let h = splitmix(self.seed ^ splitmix(true_time as u64));
        let (u1, u2) = (unit(h), unit(splitmix(h)));
        // Box-Muller
        self.noise_sigma_ns * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn rate_term(&self, true_time: i64) -> f64 {
        true_time as f64 * self.rate_ppm() * 1e-6
    }

    /// Reading of this clock at `true_time`.
    pub fn local_time(&self, true_time: i64) -> i64 {
        true_time
            + (self.rate_term(true_time) + self.noise(true_time)).round_ties_even() as i64
            + self.offset0_ns
            + self.servo_offset_correction_ns
    }

    /// Reading without timestamping noise.
    pub fn ideal_local_time(&self, true_time: i64) -> i64 {
        true_time
            + self.rate_term(true_time).round_ties_even() as i64
            + self.offset0_ns
            + self.servo_offset_correction_ns
    }

    /// Applies a servo correction at true time `epoch`: the clock is stepped
    /// back by `offset_ns` and slowed by `rate_ppm`. The rate change is a
    /// slew, so the reading at `epoch` moves by exactly `-offset_ns`.
    pub fn apply_correction(&mut self, offset_ns: i64, rate_ppm: f64, epoch: i64) {
        let before = self.rate_term(epoch).round_ties_even() as i64;
        self.servo_rate_correction_ppm -= rate_ppm;
        let after = self.rate_term(epoch).round_ties_even() as i64;
        self.servo_offset_correction_ns += before - after - offset_ns;
    }
}

/// Free-function form of [`SimClock::local_time`].
pub fn local_time(clock: &SimClock, true_time: i64) -> i64 {
    clock.local_time(true_time)
}

/// Affine map from a device's local time to master time, valid from the
/// latest servo epoch on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncState {
    pub synchronized: bool,
    pub epoch_local: i64,
    pub epoch_master: i64,
    /// Master nanoseconds elapsed per local nanosecond.
    pub master_per_local: f64,
}

impl Default for SyncState {
    fn default() -> Self {
        SyncState::unsynchronized()
    }
}

impl SyncState {
    pub fn unsynchronized() -> Self {
        SyncState {
            synchronized: false,
            epoch_local: 0,
            epoch_master: 0,
            master_per_local: 1.0,
        }
    }

    pub fn identity() -> Self {
        SyncState {
            synchronized: true,
            ..SyncState::unsynchronized()
        }
    }

    /// Constant `master - local` offset.
    pub fn with_offset(master_minus_local: i64) -> Self {
        SyncState {
            synchronized: true,
            epoch_local: 0,
            epoch_master: master_minus_local,
            master_per_local: 1.0,
        }
    }

    /// Exact inverse of a clock's noise-free model, for an ideal master.
    pub fn from_model(clock: &SimClock) -> Self {
        SyncState {
            synchronized: true,
            epoch_local: clock.offset0_ns + clock.servo_offset_correction_ns,
            epoch_master: 0,
            master_per_local: 1.0 / (1.0 + clock.rate_ppm() * 1e-6),
        }
    }

    pub fn to_master_time(&self, local_ts: i64) -> Result<i64, ClockSyncError> {
        if !self.synchronized {
            return Err(ClockSyncError::Unsynchronized);
        }
        let elapsed = local_ts - self.epoch_local;
        let scaled = if self.master_per_local == 1.0 {
            elapsed
        } else {
            (elapsed as f64 * self.master_per_local).round_ties_even() as i64
        };
        Ok(self.epoch_master + scaled)
    }
}

/// Free-function form of [`SyncState::to_master_time`].
pub fn to_master_time(state: &SyncState, local_ts: i64) -> Result<i64, ClockSyncError> {
    state.to_master_time(local_ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_clock_is_identity() {
        let c = SimClock::ideal();
        for t in [0, 1, 999_999_999, 30_000_000_000] {
            assert_eq!(c.local_time(t), t);
        }
    }

    #[test]
    fn drift_accumulates_linearly() {
        let c = SimClock::with_drift(100.0);
        assert_eq!(c.local_time(1_000_000_000) - 1_000_000_000, 100_000);
    }

    #[test]
    fn constant_offset() {
        let c = SimClock::with_offset(5000);
        for t in [0, 17, 1_000_000_000] {
            assert_eq!(c.local_time(t) - t, 5000);
        }
    }

    #[test]
    fn noise_is_deterministic_and_centered() {
        let c = SimClock {
            noise_sigma_ns: 50.0,
            seed: 11,
            ..SimClock::ideal()
        };
        let d = c.clone();
        let errs: Vec<i64> = (0..20_000).map(|k| c.local_time(k * 1_000) - k * 1_000).collect();
        assert_eq!(errs[..10], (0..10).map(|k| d.local_time(k * 1_000) - k * 1_000).collect::<Vec<_>>()[..]);
        let mean = errs.iter().sum::<i64>() as f64 / errs.len() as f64;
        let var = errs.iter().map(|e| (*e as f64 - mean).powi(2)).sum::<f64>() / errs.len() as f64;
        assert!(mean.abs() < 2.0, "{mean}");
        assert!((var.sqrt() - 50.0).abs() < 2.0, "{}", var.sqrt());
    }

    #[test]
    fn correction_is_continuous_at_epoch() {
        let mut c = SimClock {
            offset0_ns: 12_345,
            drift_ppm: 37.3,
            ..SimClock::ideal()
        };
        let epoch = 7_300_000_123;
        let before = c.local_time(epoch);
        c.apply_correction(200, 12.5, epoch);
        assert_eq!(c.local_time(epoch), before - 200);
        assert!((c.rate_ppm() - 24.8).abs() < 1e-12);
    }

    #[test]
    fn to_master_identity_and_offset() {
        assert_eq!(SyncState::identity().to_master_time(123_456).unwrap(), 123_456);
        assert_eq!(SyncState::with_offset(-3000).to_master_time(103_000).unwrap(), 100_000);
        assert!(matches!(
            SyncState::unsynchronized().to_master_time(5),
            Err(ClockSyncError::Unsynchronized)
        ));
    }

    #[test]
    fn drift_only_model_inverts_exactly() {
        for drift in [37.3, -41.7, 3.3] {
            let c = SimClock::with_drift(drift);
            let s = SyncState::from_model(&c);
            for k in 0..2000i64 {
                let t = k * 15_000_017 + 3;
                assert_eq!(s.to_master_time(c.local_time(t)).unwrap(), t, "drift {drift} t {t}");
            }
        }
    }
}
