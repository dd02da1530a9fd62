//! Core of the multi-viewpoint telerobotics simulator.
//!
//! The crate is split by subsystem:
//!
//! * [`kinematics`]: rigid-body algebra, remote-center-of-motion arm models,
//!   differential IK, base registration and pinhole projection.
//! * [`teleop`]: console/instrument/camera routing and the camera-frame
//!   master-slave mapping.
//! * [`clocksync`]: simulated two-step PTP exchange and clock servo.
//! * [`pipeline`]: synthetic global-shutter capture, demosaicing, stereo
//!   rectification, latency accounting and cross-stream alignment.
//! * [`recorder`]: the `MVTR` synchronized recording format.

pub mod clocksync;
pub mod kinematics;
pub mod pipeline;
pub mod recorder;
pub mod teleop;

/// Round-half-to-even division of a signed integer by two.
pub(crate) fn half_even(v: i64) -> i64 {
    let q = v.div_euclid(2);
    if v.rem_euclid(2) == 0 {
        q
    } else if q.rem_euclid(2) == 0 {
        // exactly q + 0.5: keep the even neighbour
        q
    } else {
        q + 1
    }
}
