//! Unit conventions and physical constants.
//!
//! Every frequency-like quantity in this crate is an *angular* frequency in
//! rad/s. Laboratory values are usually quoted as ordinary frequencies
//! ("2π × 200 kHz"); the helpers here perform that conversion in one place so
//! no factor of 2π is ever applied twice.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Bohr magneton over ħ, in rad/s per gauss.
///
/// Fixed by convention at 2π × 1.3996 MHz/G; the linear Zeeman splitting of
/// the spin-1 manifold is `omega_z = MU_B_OVER_HBAR * b / 2`.
pub const MU_B_OVER_HBAR: f64 = TWO_PI * 1.3996e6;

/// Convert an ordinary frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Convert an ordinary frequency in kHz to an angular frequency in rad/s.
#[inline]
pub fn khz(f: f64) -> f64 {
    TWO_PI * 1.0e3 * f
}

/// Convert an ordinary frequency in MHz to an angular frequency in rad/s.
#[inline]
pub fn mhz(f: f64) -> f64 {
    TWO_PI * 1.0e6 * f
}

/// Angular frequency in rad/s back to an ordinary frequency in Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
