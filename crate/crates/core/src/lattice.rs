//! Trap and scattering geometry of the standing-wave lattice.

use std::f64::consts::{PI, TAU};

use crate::constants::{HBAR, K_B, RB85_MASS};
use crate::error::{invalid, Result};

/// Default Lamb-Dicke factor at `n_z = 0`; the default axial frequency is
/// obtained by inverting it.
pub const DEFAULT_LAMB_DICKE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    /// Trap (dipole) wavelength, m.
    pub lambda_dip: f64,
    /// Bragg probe wavelength, m.
    pub lambda_brg: f64,
    /// Angle of incidence of the Bragg beam on the lattice planes, rad.
    pub incidence_angle: f64,
    /// Trap depth U₀, J.
    pub trap_depth: f64,
    /// K.
    pub temperature: f64,
    /// Cavity waist w_dip, m.
    pub cavity_waist: f64,
    /// Radial cloud size w_r, m.
    pub radial_size: f64,
    /// Bragg beam size in the scattering plane w_z, m.
    pub beam_size: f64,
    pub total_atoms: u64,
    pub illuminated_fraction: f64,
    /// Axial trap frequency Ω_z, rad/s.
    pub axial_frequency: f64,
    /// Mean atomic density, m⁻³.
    pub density: f64,
}

impl LatticeConfig {
    /// The operating point of the ring-cavity experiment: 420.2 nm probe at
    /// 58°, Bragg-matched trap wavelength, T = 200 µK = 0.2·U₀/k_B.
    pub fn experiment() -> Self {
        let lambda_brg = 420.2e-9;
        let incidence_angle = 58f64.to_radians();
        let temperature = 200e-6;
        Self {
            lambda_dip: lambda_brg / incidence_angle.cos(),
            lambda_brg,
            incidence_angle,
            trap_depth: K_B * temperature / 0.2,
            temperature,
            cavity_waist: 130e-6,
            radial_size: 30e-6,
            beam_size: 250e-6,
            total_atoms: 10_000_000,
            illuminated_fraction: 1.0 / 16.0,
            axial_frequency: recoil_frequency(lambda_brg) / DEFAULT_LAMB_DICKE,
            density: 5e17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_dip", self.lambda_dip),
            ("lambda_brg", self.lambda_brg),
            ("trap_depth", self.trap_depth),
            ("temperature", self.temperature),
            ("cavity_waist", self.cavity_waist),
            ("radial_size", self.radial_size),
            ("beam_size", self.beam_size),
            ("axial_frequency", self.axial_frequency),
            ("density", self.density),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be > 0")));
            }
        }
        if !(self.illuminated_fraction > 0.0 && self.illuminated_fraction <= 1.0) {
            return Err(invalid(
                "illuminated_fraction",
                format!("{} must lie in (0, 1]", self.illuminated_fraction),
            ));
        }
        if !(self.incidence_angle > 0.0 && self.incidence_angle < PI / 2.0) {
            return Err(invalid(
                "incidence_angle",
                format!("{} rad must lie in (0, π/2)", self.incidence_angle),
            ));
        }
        Ok(())
    }

    /// `k_dip = 2π/λ_dip`.
    pub fn k_dip(&self) -> f64 {
        TAU / self.lambda_dip
    }

    /// `k_brg = 2π/λ_brg`.
    pub fn k_brg(&self) -> f64 {
        TAU / self.lambda_brg
    }

    /// Axial wavevector transfer `Δk_z = 2k_brg·cos β_i`.
    pub fn delta_kz(&self) -> f64 {
        2.0 * self.k_brg() * self.incidence_angle.cos()
    }

    /// Lattice period `λ_dip/2`.
    pub fn period(&self) -> f64 {
        0.5 * self.lambda_dip
    }
}

/// Recoil frequency `ε = ħk²/2m` of ⁸⁵Rb at wavelength `lambda`, rad/s.
pub fn recoil_frequency(lambda: f64) -> f64 {
    let k = TAU / lambda;
    HBAR * k * k / (2.0 * RB85_MASS)
}

/// Per-period phase error `2k_brg·(λ_dip/2)·cos β_i − 2π`.
pub fn bragg_mismatch(cfg: &LatticeConfig) -> f64 {
    cfg.k_brg() * cfg.lambda_dip * cfg.incidence_angle.cos() - TAU
}

/// Trap wavelength that Bragg-matches the configured probe and angle.
pub fn matched_lambda_dip(lambda_brg: f64, incidence_angle: f64) -> f64 {
    lambda_brg / incidence_angle.cos()
}

/// Far-field solid angle of the scattered beam, `2λ_brg²/(π·w_r·w_z)`.
pub fn solid_angle(cfg: &LatticeConfig) -> f64 {
    2.0 * cfg.lambda_brg * cfg.lambda_brg / (PI * cfg.radial_size * cfg.beam_size)
}

/// Harmonic-approximation rms axial size `z̄ = k_dip⁻¹·√(k_B T / 2U₀)`.
pub fn axial_rms_size(cfg: &LatticeConfig) -> f64 {
    (K_B * cfg.temperature / (2.0 * cfg.trap_depth)).sqrt() / cfg.k_dip()
}

/// `(2n_z + 1)·ε/Ω_z` with the recoil frequency of the Bragg transition.
pub fn lamb_dicke_factor(cfg: &LatticeConfig, n_z: u32) -> f64 {
    (2.0 * n_z as f64 + 1.0) * recoil_frequency(cfg.lambda_brg) / cfg.axial_frequency
}

/// Layers taking part in multiple scattering, `round(2w_r/(λ_dip·tan β_i))`.
pub fn effective_layers(cfg: &LatticeConfig) -> u64 {
    (2.0 * cfg.radial_size / (cfg.lambda_dip * cfg.incidence_angle.tan())).round() as u64
}

/// Atoms inside the Bragg beam, `round(N_tot·fraction)`.
pub fn illuminated_atoms(cfg: &LatticeConfig) -> u64 {
    (cfg.total_atoms as f64 * cfg.illuminated_fraction).round() as u64
}

/// Lattice planes inside the Bragg beam, `round(w_z / (λ_dip/2))`. Kept as a
/// geometric diagnostic; the coherent sum counts atoms, not planes.
pub fn illuminated_planes(cfg: &LatticeConfig) -> u64 {
    (cfg.beam_size / cfg.period()).round() as u64
}
