use serde::{Deserialize, Serialize};

use super::clock::MAX_DRIFT_PPM;
use super::ClockSyncError;

/// PI clock servo. The proportional term steps the clock, the integral term
/// is the accumulated frequency correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoState {
    pub kp: f64,
    pub ki: f64,
    /// Accumulated frequency correction, ppm (anti-windup clamped).
    pub integral_ppm: f64,
    pub last_offset_estimate: i64,
}

impl Default for ServoState {
    fn default() -> Self {
        ServoState::new(0.7, 0.3).expect("positive gains")
    }
}

/// Corrections to remove from the slave clock: step it back by
/// `offset_correction_ns` and slow it by `rate_correction_ppm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoOutput {
    pub state: ServoState,
    pub offset_correction_ns: i64,
    pub rate_correction_ppm: f64,
}

impl ServoState {
    pub fn new(kp: f64, ki: f64) -> Result<Self, ClockSyncError> {
        if !(kp > 0.0 && ki > 0.0) {
            return Err(ClockSyncError::InvalidGains);
        }
        Ok(ServoState {
            kp,
            ki,
            integral_ppm: 0.0,
            last_offset_estimate: 0,
        })
    }
}

/// One PI update for a measured offset (slave minus master) after `dt_s`
/// seconds since the previous update.
///
/// The integral grows by `ki * offset / dt` (ns/s, expressed in ppm): the
/// offset accumulated over one interval is read as a frequency error.
pub fn servo_update(
    servo: &ServoState,
    offset_estimate: i64,
    dt_s: f64,
) -> Result<ServoOutput, ClockSyncError> {
    if !(dt_s > 0.0) {
        return Err(ClockSyncError::InvalidInterval);
    }
    let offset = offset_estimate as f64;
    let step = (servo.kp * offset).round_ties_even() as i64;
    let integral = (servo.integral_ppm + servo.ki * offset / (dt_s * 1e3))
        .clamp(-MAX_DRIFT_PPM, MAX_DRIFT_PPM);
    Ok(ServoOutput {
        state: ServoState {
            integral_ppm: integral,
            last_offset_estimate: offset_estimate,
            ..*servo
        },
        offset_correction_ns: step,
        rate_correction_ppm: integral - servo.integral_ppm,
    })
}
