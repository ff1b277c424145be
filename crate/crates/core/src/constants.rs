//! Physical constants (CODATA 2018) and the ⁸⁵Rb atomic mass.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Mass of ⁸⁵Rb, kg (84.911 79 u).
pub const RB85_MASS: f64 = 84.911_789_738 * AMU;

/// Converts a cyclic frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    std::f64::consts::TAU * f
}

/// Converts an angular frequency in rad/s to a cyclic frequency in Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / std::f64::consts::TAU
}
