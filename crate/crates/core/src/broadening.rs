//! Inhomogeneously broadened reflection spectrum.
//!
//! Atoms sit in a separable potential `U = -U₀·exp(-2r²/w_dip²) + U₀k_dip²z²`
//! (Gaussian radially, harmonic axially) with Boltzmann-distributed
//! positions. Each atom's Bragg line is displaced by the local differential
//! light shift `δ_LS = η·U/ħ`, and the grating reflection is the coherent
//! ensemble average of the displaced line responses.
//!
//! The amplitude is normalized by the operating point: an unbroadened,
//! unit-strength line on resonance reflects `|r| = reflectivity(P)` with
//! `P = coherent_fraction · bragg_power(...)` evaluated for the configured
//! lattice and probe.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::constants::{HBAR, K_B};
use crate::error::{invalid, Result};
use crate::lattice::{
    axial_rms_size, bragg_mismatch, illuminated_atoms, illuminated_planes, solid_angle,
    LatticeConfig,
};
use crate::physics::{
    bragg_power, debye_waller, reflectivity, structure_factor, LineSet, ScatterInputs,
};
use crate::reflection::{check_grid, ComplexReflection};

/// Differential light-shift ratio η that yields a 10Γ-wide broadened line
/// for [`LatticeConfig::experiment`]; found with [`calibrate_light_shift_ratio`]
/// (20 000 samples, seed 0).
pub const DEFAULT_LIGHT_SHIFT_RATIO: f64 = 0.847217;

/// Measured peak Bragg power of the experiment, W.
pub const MEASURED_PEAK_POWER: f64 = 100e-12;

/// Radial sampling cutoff in units of the cavity waist.
const RADIAL_CUTOFF: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBeam {
    /// W/m².
    pub intensity: f64,
    /// W/m².
    pub saturation_intensity: f64,
    /// rad.
    pub polarization_angle: f64,
    /// Fraction of the first-principles Bragg power actually reflected
    /// coherently (1 = ideal thin grating).
    pub coherent_fraction: f64,
}

impl ProbeBeam {
    /// 1 mW/cm² p-polarized probe at half saturation, ideal coherence.
    pub fn experiment() -> Self {
        Self {
            intensity: 10.0,
            saturation_intensity: 20.0,
            polarization_angle: PI / 2.0,
            coherent_fraction: 1.0,
        }
    }

    /// [`Self::experiment`] with the coherent fraction chosen so that `lattice`
    /// reflects [`MEASURED_PEAK_POWER`] on resonance.
    pub fn calibrated_to_measurement(lattice: &LatticeConfig, lines: &LineSet) -> Result<Self> {
        let mut probe = Self::experiment();
        let ideal = resonant_bragg_power(lattice, &probe, lines)?;
        probe.coherent_fraction = if ideal > 0.0 {
            MEASURED_PEAK_POWER / ideal
        } else {
            1.0
        };
        Ok(probe)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(invalid("intensity", "must be >= 0"));
        }
        if !(self.saturation_intensity > 0.0) {
            return Err(invalid("saturation_intensity", "must be > 0"));
        }
        if !(self.coherent_fraction >= 0.0 && self.coherent_fraction.is_finite()) {
            return Err(invalid("coherent_fraction", "must be >= 0"));
        }
        Ok(())
    }
}

/// Assembles the Bragg-power inputs for `lattice` illuminated by `probe`.
pub fn scatter_inputs(lattice: &LatticeConfig, probe: &ProbeBeam) -> ScatterInputs {
    ScatterInputs {
        incident_intensity: probe.intensity,
        saturation_intensity: probe.saturation_intensity,
        illuminated_atoms: illuminated_atoms(lattice),
        polarization_angle: probe.polarization_angle,
        debye_waller: debye_waller(lattice.delta_kz(), axial_rms_size(lattice)),
        solid_angle: solid_angle(lattice),
    }
}

/// Coherent sum over the illuminated atoms: atoms within one plane scatter
/// in phase, planes add with the per-period Bragg mismatch.
pub fn lattice_structure_factor(lattice: &LatticeConfig) -> Complex64 {
    let atoms = illuminated_atoms(lattice);
    let planes = illuminated_planes(lattice).max(1);
    structure_factor(planes, bragg_mismatch(lattice)) * (atoms as f64 / planes as f64)
}

/// First-principles Bragg power on resonance of a unit-strength line, W.
pub fn resonant_bragg_power(
    lattice: &LatticeConfig,
    probe: &ProbeBeam,
    lines: &LineSet,
) -> Result<f64> {
    lattice.validate()?;
    probe.validate()?;
    let alpha = Complex64::new(0.0, -lines.resonant_scale());
    bragg_power(
        &scatter_inputs(lattice, probe),
        alpha,
        lines,
        lattice_structure_factor(lattice),
    )
}

/// `|r|` of an unbroadened unit-strength line on resonance.
pub fn operating_reflection(
    lattice: &LatticeConfig,
    probe: &ProbeBeam,
    lines: &LineSet,
) -> Result<f64> {
    let power = probe.coherent_fraction * resonant_bragg_power(lattice, probe, lines)?;
    if probe.intensity == 0.0 {
        return Ok(0.0);
    }
    reflectivity(
        power,
        probe.intensity,
        lattice.radial_size,
        lattice.beam_size,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadeningParams {
    /// η; zero disables broadening.
    pub light_shift_ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for BroadeningParams {
    fn default() -> Self {
        Self {
            light_shift_ratio: DEFAULT_LIGHT_SHIFT_RATIO,
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Potential energies (J) of `samples` atoms drawn from the Boltzmann
/// distribution of the trap. Deterministic for a given seed.
pub fn sample_trap_energies(
    lattice: &LatticeConfig,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    lattice.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = lattice.trap_depth;
    let beta_depth = depth / (K_B * lattice.temperature);
    let k = lattice.k_dip();
    let axial = Normal::new(0.0, axial_rms_size(lattice)).expect("finite axial size");
    let s_max = RADIAL_CUTOFF * RADIAL_CUTOFF;

    let mut energies = Vec::with_capacity(samples);
    while energies.len() < samples {
        // s = r²/w², uniform in area; accept with exp(-(U - U_min)/k_BT).
        let s: f64 = rng.random::<f64>() * s_max;
        let radial = (-2.0 * s).exp();
        let accept: f64 = rng.random();
        if accept >= (beta_depth * (radial - 1.0)).exp() {
            continue;
        }
        let z: f64 = axial.sample(&mut rng);
        energies.push(-depth * radial + depth * k * k * z * z);
    }
    Ok(energies)
}

/// Light-shift displacements `η·U/ħ` (rad/s) of sampled atoms.
pub fn sample_light_shifts(lattice: &LatticeConfig, params: &BroadeningParams) -> Result<Vec<f64>> {
    let energies = sample_trap_energies(lattice, params.samples, params.seed)?;
    let eta = params.light_shift_ratio;
    Ok(energies.into_iter().map(|u| eta * u / HBAR).collect())
}

/// Ensemble-averaged dimensionless response `⟨Σ_l s_l Γ_l/(2(Δ-δ-c_l)+iΓ_l)⟩`
/// on `grid`, averaged over the given shifts.
fn averaged_response(lines: &LineSet, shifts: &[f64], grid: &[f64]) -> Vec<Complex64> {
    let inv = 1.0 / shifts.len() as f64;
    grid.par_iter()
        .map(|&delta| {
            let sum: Complex64 = shifts.iter().map(|&s| lines.response(delta - s)).sum();
            sum * inv
        })
        .collect()
}

/// Complex reflection `r(Δ)` of the broadened grating, normalized so that
/// an unbroadened unit-strength line reflects `peak_reflection` on resonance.
pub fn broadened_reflection_spectrum(
    lines: &LineSet,
    lattice: &LatticeConfig,
    peak_reflection: f64,
    params: &BroadeningParams,
    grid: &[f64],
) -> Result<ComplexReflection> {
    check_grid(grid)?;
    if params.samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    if !(peak_reflection >= 0.0 && peak_reflection <= 1.0) {
        return Err(invalid(
            "peak_reflection",
            format!("{peak_reflection} must lie in [0, 1]"),
        ));
    }
    // Response is -i on resonance; r ∝ α keeps the polarizability phase.
    let values: Vec<Complex64> = if params.light_shift_ratio == 0.0 {
        grid.iter()
            .map(|&d| lines.response(d) * peak_reflection)
            .collect()
    } else {
        let shifts = sample_light_shifts(lattice, params)?;
        averaged_response(lines, &shifts, grid)
            .into_iter()
            .map(|v| v * peak_reflection)
            .collect()
    };
    ComplexReflection::new(grid.to_vec(), values)
}

/// Full width at half maximum of `|r|` around its global maximum, with
/// linear interpolation of the half-maximum crossings. `None` if the
/// profile does not fall below half maximum on both sides.
pub fn profile_fwhm(reflection: &ComplexReflection) -> Option<f64> {
    let (left, right) = half_maximum_crossings(reflection)?;
    Some(right - left)
}

/// Detunings of the half-maximum crossings on either side of the peak.
pub fn half_maximum_crossings(reflection: &ComplexReflection) -> Option<(f64, f64)> {
    let mags: Vec<f64> = reflection.values().iter().map(|v| v.norm()).collect();
    let d = reflection.detunings();
    let (peak, &max) = mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if max <= 0.0 {
        return None;
    }
    let half = 0.5 * max;
    let crossing = |i: usize, j: usize| {
        let w = (half - mags[i]) / (mags[j] - mags[i]);
        d[i] + w * (d[j] - d[i])
    };
    let left = (0..peak)
        .rev()
        .find(|&i| mags[i] < half)
        .map(|i| crossing(i, i + 1))?;
    let right = (peak + 1..mags.len())
        .find(|&i| mags[i] < half)
        .map(|i| crossing(i - 1, i))?;
    Some((left, right))
}

/// Finds η such that a single line of width `linewidth` broadened in
/// `lattice` has a `|r|` FWHM of `target_fwhm` (both rad/s).
pub fn calibrate_light_shift_ratio(
    lattice: &LatticeConfig,
    linewidth: f64,
    target_fwhm: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(target_fwhm > linewidth) {
        return Err(invalid("target_fwhm", "must exceed the natural linewidth"));
    }
    let line = LineSet::single(linewidth, lattice.lambda_brg)?;
    let energies = sample_trap_energies(lattice, samples, seed)?;
    let (u_min, u_max) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
            (lo.min(u), hi.max(u))
        });

    let fwhm_at = |eta: f64| -> f64 {
        let shifts: Vec<f64> = energies.iter().map(|&u| eta * u / HBAR).collect();
        let lo = eta * u_min / HBAR - 20.0 * linewidth;
        let hi = eta * u_max / HBAR + 20.0 * linewidth;
        let points = (((hi - lo) / (0.05 * linewidth)) as usize).clamp(401, 8001);
        let grid = crate::reflection::linear_grid(lo, hi, points);
        let values = averaged_response(&line, &shifts, &grid);
        let r = ComplexReflection::new(grid, values).expect("normalized response is bounded");
        profile_fwhm(&r).unwrap_or(f64::INFINITY)
    };

    let mut lo = 0.0;
    let mut hi = TAU * target_fwhm * HBAR / (u_max - u_min).max(f64::MIN_POSITIVE);
    while fwhm_at(hi) < target_fwhm {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(invalid("target_fwhm", "unreachable with this trap"));
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if fwhm_at(mid) < target_fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
