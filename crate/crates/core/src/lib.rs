//! Joint symbol-level precoding (SLP) and pinching-antenna placement.
//!
//! A base station feeds `N` dielectric waveguides, each carrying `L` pinching
//! antennas (PAs) whose positions along the guide can be adjusted. For a given
//! M-PSK symbol vector the crate minimizes transmit power subject to
//! constructive-interference (CI) constraints at every user by alternating
//!
//! * a convex minimum-power precoder solve at fixed PA positions
//!   ([`precoder::solve_min_power`]), and
//! * a decomposed, log-sum-exp smoothed placement update solved per PA by
//!   projected gradient descent over an adjustable movable region
//!   ([`placement::optimize_all_positions`]).
//!
//! [`ao::ao_solve`] drives the loop; [`bench`] wraps it in seeded Monte Carlo
//! experiments with the fixed, random and conventional-array baselines.
//! [`oracles`] holds brute-force reference implementations used by the tests.

#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod ao;
pub mod bench;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod placement;
pub mod precoder;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

/// Converts a ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
