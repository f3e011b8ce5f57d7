//! Unit conventions.
//!
//! Every frequency and rate in configuration is a cyclic frequency in MHz
//! (the value of `x/2π`). Dynamics run in angular units, rad/µs, with ħ = 1.
//! Times are therefore in µs. [`angular`] and [`from_angular`] are the only
//! places where the factor 2π enters.

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// MHz (`/2π` convention) to rad/µs.
#[inline]
pub fn angular(mhz: f64) -> f64 {
    TWO_PI * mhz
}

/// rad/µs back to MHz.
#[inline]
pub fn from_angular(rad_per_us: f64) -> f64 {
    rad_per_us / TWO_PI
}
