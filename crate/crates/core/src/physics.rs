//! Closed-form scattering physics of the atomic grating.
//!
//! Polarizabilities are returned as the ratio `α/ε₀` (m³) in the
//! `e^{+iωt}` convention used by the heterodyne model, so that an absorbing
//! resonance has `Im α < 0` and the phase runs from 0 (blue side) through
//! `-π/2` (resonance) to `-π` (red side).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// A single hyperfine resonance of the Bragg transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionLine {
    /// Line center relative to the reference line, rad/s.
    pub center_offset: f64,
    /// Natural linewidth Γ, rad/s.
    pub linewidth: f64,
    pub relative_strength: f64,
}

impl TransitionLine {
    pub fn new(center_offset: f64, linewidth: f64, relative_strength: f64) -> Result<Self> {
        let line = Self {
            center_offset,
            linewidth,
            relative_strength,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center_offset.is_finite() {
            return Err(invalid("center_offset", "must be finite"));
        }
        if !(self.linewidth > 0.0 && self.linewidth.is_finite()) {
            return Err(invalid(
                "linewidth",
                format!("{} must be > 0", self.linewidth),
            ));
        }
        if !(self.relative_strength >= 0.0 && self.relative_strength.is_finite()) {
            return Err(invalid(
                "relative_strength",
                format!("{} must be >= 0", self.relative_strength),
            ));
        }
        Ok(())
    }

    /// Dimensionless Lorentzian response `s·Γ/(2Δ' + iΓ)` with `Δ' = Δ - center`.
    #[inline]
    pub fn response(&self, delta: f64) -> Complex64 {
        let x = 2.0 * (delta - self.center_offset);
        let g = self.linewidth;
        // Γ(x - iΓ)/(x² + Γ²), one real division.
        let scale = self.relative_strength * g / (x * x + g * g);
        Complex64::new(scale * x, -scale * g)
    }
}

/// An ordered set of hyperfine lines sharing one Bragg wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSet {
    lines: Vec<TransitionLine>,
    reference_wavelength: f64,
}

impl LineSet {
    pub fn new(lines: Vec<TransitionLine>, reference_wavelength: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(invalid("lines", "at least one line is required"));
        }
        for line in &lines {
            line.validate()?;
        }
        for (i, pair) in lines.windows(2).enumerate() {
            if pair[1].center_offset <= pair[0].center_offset {
                return Err(invalid(
                    "lines",
                    format!("line centers must be strictly increasing (index {})", i + 1),
                ));
            }
        }
        if !lines.iter().any(|l| l.relative_strength > 0.0) {
            return Err(invalid("lines", "at least one line needs strength > 0"));
        }
        if !(reference_wavelength > 0.0 && reference_wavelength.is_finite()) {
            return Err(invalid("reference_wavelength", "must be > 0"));
        }
        Ok(Self {
            lines,
            reference_wavelength,
        })
    }

    /// A single line at zero offset.
    pub fn single(linewidth: f64, wavelength: f64) -> Result<Self> {
        Self::new(vec![TransitionLine::new(0.0, linewidth, 1.0)?], wavelength)
    }

    /// `5S₁/₂ F=3 → 6P₃/₂ F'=3,4` of ⁸⁵Rb at 420.2 nm: Γ = 2π·1.3 MHz, lines
    /// 40 MHz apart with strengths 1:3, F'=4 as the reference line.
    pub fn rb85_blue() -> Self {
        let gamma = TAU * 1.3e6;
        Self::new(
            vec![
                TransitionLine {
                    center_offset: -TAU * 40e6,
                    linewidth: gamma,
                    relative_strength: 1.0 / 3.0,
                },
                TransitionLine {
                    center_offset: 0.0,
                    linewidth: gamma,
                    relative_strength: 1.0,
                },
            ],
            420.2e-9,
        )
        .expect("static line set is valid")
    }

    pub fn lines(&self) -> &[TransitionLine] {
        &self.lines
    }

    pub fn wavelength(&self) -> f64 {
        self.reference_wavelength
    }

    /// `k_brg = 2π/λ_brg`.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.reference_wavelength
    }

    /// `6π/k_brg³`, the magnitude of `α/ε₀` on resonance of a unit-strength line.
    pub fn resonant_scale(&self) -> f64 {
        resonant_scale(self.reference_wavelength)
    }

    /// Sum of the dimensionless line responses at `delta`.
    pub fn response(&self, delta: f64) -> Complex64 {
        self.lines.iter().map(|l| l.response(delta)).sum()
    }

    /// Sum of `α/ε₀` over all lines, m³.
    pub fn polarizability(&self, delta: f64) -> Complex64 {
        self.response(delta) * self.resonant_scale()
    }

    /// Smallest linewidth in the set.
    pub fn min_linewidth(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.linewidth)
            .fold(f64::INFINITY, f64::min)
    }
}

fn resonant_scale(wavelength: f64) -> f64 {
    let k = TAU / wavelength;
    6.0 * PI / (k * k * k)
}

/// `α/ε₀ = (6π/k³)·s·Γ/(2Δ' + iΓ)` for one line, m³.
pub fn polarizability(delta: f64, line: &TransitionLine, wavelength: f64) -> Complex64 {
    line.response(delta) * resonant_scale(wavelength)
}

/// Coherent sum `Σ_{m=0}^{M-1} e^{i m θ}` over `count` equally spaced scatterers.
pub fn structure_factor(count: u64, phase_mismatch: f64) -> Complex64 {
    if count == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = count as f64;
    // Reduce to (-π, π] so the closed form is well conditioned near Bragg matching.
    let theta = phase_mismatch - TAU * (phase_mismatch / TAU).round();
    let half = 0.5 * theta;
    let denom = half.sin();
    if denom.abs() < 1e-12 {
        return Complex64::new(m, 0.0);
    }
    let magnitude = (m * half).sin() / denom;
    Complex64::from_polar(magnitude, (m - 1.0) * half)
}

/// `exp(-½(Δk_z·z̄)²)`.
pub fn debye_waller(delta_kz: f64, z_rms: f64) -> f64 {
    let x = delta_kz * z_rms;
    (-0.5 * x * x).exp()
}

/// Probe-beam and scattering-geometry inputs of the Bragg power estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterInputs {
    /// W/m².
    pub incident_intensity: f64,
    /// W/m².
    pub saturation_intensity: f64,
    pub illuminated_atoms: u64,
    /// Angle between incident polarization and scattered wavevector, rad.
    pub polarization_angle: f64,
    pub debye_waller: f64,
    /// sr.
    pub solid_angle: f64,
}

impl ScatterInputs {
    pub fn validate(&self) -> Result<()> {
        // Zero intensity is a degenerate input yielding zero power, not an error.
        if !(self.incident_intensity >= 0.0 && self.incident_intensity.is_finite()) {
            return Err(invalid("incident_intensity", "must be >= 0"));
        }
        if !(self.saturation_intensity > 0.0) {
            return Err(invalid("saturation_intensity", "must be > 0"));
        }
        if !(self.debye_waller > 0.0 && self.debye_waller <= 1.0) {
            return Err(invalid(
                "debye_waller",
                format!("{} must lie in (0, 1]", self.debye_waller),
            ));
        }
        if !(self.solid_angle > 0.0 && self.solid_angle < 4.0 * PI) {
            return Err(invalid(
                "solid_angle",
                format!("{} must lie in (0, 4π)", self.solid_angle),
            ));
        }
        if !self.polarization_angle.is_finite() {
            return Err(invalid("polarization_angle", "must be finite"));
        }
        Ok(())
    }
}

/// Power Bragg-scattered into the solid angle `Ω_s`, W:
/// `I_i·(π²/λ⁴)·|α/ε₀|²·sin²ξ·|S|²·f_DW²·Ω_s`.
pub fn bragg_power(
    inputs: &ScatterInputs,
    alpha_ratio: Complex64,
    lineset: &LineSet,
    structure: Complex64,
) -> Result<f64> {
    inputs.validate()?;
    let lambda2 = lineset.wavelength() * lineset.wavelength();
    let sin_xi = inputs.polarization_angle.sin();
    let fdw = inputs.debye_waller;
    Ok(inputs.incident_intensity * PI * PI / (lambda2 * lambda2)
        * alpha_ratio.norm_sqr()
        * sin_xi
        * sin_xi
        * structure.norm_sqr()
        * fdw
        * fdw
        * inputs.solid_angle)
}

/// Amplitude reflection coefficient `√R` with `R = P_s / (½π·w_r·w_z·I_i)`.
pub fn reflectivity(
    scattered_power: f64,
    incident_intensity: f64,
    radial_size: f64,
    beam_size: f64,
) -> Result<f64> {
    if !(scattered_power >= 0.0 && scattered_power.is_finite()) {
        return Err(invalid("scattered_power", "must be >= 0"));
    }
    for (name, v) in [
        ("incident_intensity", incident_intensity),
        ("radial_size", radial_size),
        ("beam_size", beam_size),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("{v} must be > 0")));
        }
    }
    let overlap = 0.5 * PI * radial_size * beam_size * incident_intensity;
    let r = scattered_power / overlap;
    if r > 1.0 + 1e-12 {
        return Err(Error::UnphysicalReflectivity(r));
    }
    Ok(r.min(1.0).sqrt())
}

/// Ratio of incoherent to elastic scattering, `(I_i/I_s)/(1 + 4Δ²/Γ²)`.
/// Diagnostic only; no depletion is simulated.
pub fn incoherent_rate(
    intensity: f64,
    saturation_intensity: f64,
    delta: f64,
    linewidth: f64,
) -> f64 {
    let x = 2.0 * delta / linewidth;
    intensity / saturation_intensity / (1.0 + x * x)
}
