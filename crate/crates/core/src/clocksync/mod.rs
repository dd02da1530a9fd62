//! Simulated PTP-style clock synchronization.
//!
//! A fixed master (the network switch) exchanges two-step Sync and
//! Delay_Req messages with each slave over a jittery, possibly asymmetric
//! link. Slaves estimate their offset, step and slew their clock through a
//! PI servo, and expose an affine map from local to master time. Everything
//! is integer nanoseconds and deterministic under a seed.

mod clock;
mod exchange;
mod servo;
mod session;

pub use clock::{local_time, to_master_time, SimClock, SyncState, MAX_DRIFT_PPM};
pub use exchange::{
    estimate, two_step_exchange, Estimate, Exchange, LinkModel, SyncSample, DEFAULT_TURNAROUND_NS,
};
pub use servo::{servo_update, ServoOutput, ServoState};
pub use session::{
    abs_percentile, run_sync, run_sync_with, ResidualSample, SlaveConfig, SlaveSync, SlaveTrace,
    SyncReport, SyncStatus,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClockSyncError {
    #[error("invalid clock: {0}")]
    InvalidClock(&'static str),
    #[error("invalid link: {0}")]
    InvalidLink(&'static str),
    #[error("servo gains must be positive")]
    InvalidGains,
    #[error("invalid interval or duration")]
    InvalidInterval,
    #[error("sample has t3 < t2")]
    InvalidSample,
    #[error("implausible mean path delay {0} ns")]
    ImplausibleDelay(i64),
    #[error("clock is not synchronized")]
    Unsynchronized,
}
