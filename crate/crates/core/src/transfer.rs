//! Multiple scattering in a stack of thin polarizable sheets.
//!
//! Fields between sheets are `A·e^{ik_z z} + B·e^{−ik_z z}` in the `e^{−iωt}`
//! convention, with amplitudes referenced to the nearest sheet on the left.
//! A sheet with coupling ζ maps left amplitudes to right amplitudes by
//!
//! ```text
//! S = | 1 + iζ    iζ   |        P = | e^{ik_z d}       0      |
//!     |  −iζ    1 − iζ |            |     0       e^{−ik_z d} |
//! ```
//!
//! so one sheet reflects `iζ/(1 − iζ)` and transmits `1/(1 − iζ)`. The
//! polarizability is conjugated on the way in so a resonant sheet absorbs.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lattice::{effective_layers, LatticeConfig};
use crate::physics::LineSet;
use crate::reflection::{check_grid, ComplexReflection};

/// Relative-deviation floor for [`born_equivalence_report`].
pub const BORN_FLOOR: f64 = 1e-15;

const SINGULAR_LIMIT: f64 = 1e-12;

type Matrix = [[Complex64; 2]; 2];

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Per-sheet coupling `ζ = k²·σ·conj(α/ε₀)/Δk_z`. Reduces to `(Δk_z/4)·σ·α/ε₀`
/// at normal incidence; `alpha_ratio` is α/ε₀ in m³ (`e^{+iωt}` convention).
pub fn layer_coupling(alpha_ratio: Complex64, sigma: f64, delta_kz: f64, k_brg: f64) -> Complex64 {
    alpha_ratio.conj() * (k_brg * k_brg * sigma / delta_kz)
}

/// Single-sheet reflection `iζ/(1 − iζ)`.
pub fn sheet_reflection(zeta: Complex64) -> Complex64 {
    let i = Complex64::i();
    i * zeta / (1.0 - i * zeta)
}

/// Reflection and transmission of a full stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackResponse {
    /// Incidence from the first sheet's side.
    pub reflection: Complex64,
    /// Incidence from the last sheet's side.
    pub reflection_reverse: Complex64,
    pub transmission: Complex64,
}

/// `layers` identical sheets with round-trip phase `2k_z·d` between neighbours.
pub fn stack_response(
    zeta: Complex64,
    layers: usize,
    round_trip_phase: f64,
) -> Result<StackResponse> {
    if layers == 0 {
        return Err(invalid("n_layers", "must be >= 1"));
    }
    let i = Complex64::i();
    let pivot = (1.0 - i * zeta).norm();
    if !(pivot >= SINGULAR_LIMIT) {
        return Err(Error::SingularCoupling(pivot));
    }
    let sheet: Matrix = [[1.0 + i * zeta, i * zeta], [-i * zeta, 1.0 - i * zeta]];
    let half = Complex64::from_polar(1.0, 0.5 * round_trip_phase);
    let hop: Matrix = [
        [half, Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), half.conj()],
    ];
    let cell = mul(&sheet, &hop);
    let mut m = sheet;
    for _ in 1..layers {
        m = mul(&cell, &m);
    }
    let m22 = m[1][1];
    Ok(StackResponse {
        reflection: -m[1][0] / m22,
        reflection_reverse: m[0][1] / m22,
        transmission: 1.0 / m22,
    })
}

/// Coherent single-scattering sum `Σ_m r₁·e^{i·m·phase}`, m = 0..layers.
pub fn born_sum(zeta: Complex64, layers: usize, round_trip_phase: f64) -> Complex64 {
    let r1 = sheet_reflection(zeta);
    (0..layers)
        .map(|m| r1 * Complex64::from_polar(1.0, m as f64 * round_trip_phase))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub n_layers: usize,
    /// Atoms per sheet, m⁻².
    pub areal_density: f64,
    /// Sheet spacing along the lattice axis, m.
    pub spacing: f64,
    /// rad.
    pub incidence_angle: f64,
    /// Angle between probe polarization and the scattering direction, rad.
    pub polarization_angle: f64,
    pub lines: LineSet,
}

impl LayerStack {
    /// Sheets at the lattice period holding `density·period` atoms per m²,
    /// as many as take part in multiple scattering.
    pub fn from_lattice(lattice: &LatticeConfig, lines: LineSet) -> Self {
        Self {
            n_layers: effective_layers(lattice) as usize,
            areal_density: lattice.density * lattice.period(),
            spacing: lattice.period(),
            incidence_angle: lattice.incidence_angle,
            polarization_angle: std::f64::consts::FRAC_PI_2,
            lines,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(invalid("n_layers", "must be >= 1"));
        }
        if !(self.areal_density > 0.0 && self.areal_density.is_finite()) {
            return Err(invalid("areal_density", "must be > 0"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid("spacing", "must be > 0"));
        }
        if !(self.incidence_angle.cos() > 0.0) {
            return Err(invalid("incidence_angle", "must lie in [0, 90) degrees"));
        }
        Ok(())
    }

    /// `k_z = k_brg·cos β_i`.
    pub fn axial_wavenumber(&self) -> f64 {
        self.lines.wavenumber() * self.incidence_angle.cos()
    }

    /// `2k_z·d`.
    pub fn round_trip_phase(&self) -> f64 {
        2.0 * self.axial_wavenumber() * self.spacing
    }

    pub fn coupling(&self, delta: f64) -> Complex64 {
        layer_coupling(
            self.lines.polarizability(delta),
            self.areal_density,
            2.0 * self.axial_wavenumber(),
            self.lines.wavenumber(),
        ) * self.polarization_angle.sin()
    }

    pub fn response(&self, delta: f64) -> Result<StackResponse> {
        stack_response(self.coupling(delta), self.n_layers, self.round_trip_phase())
    }

    pub fn born_reflection(&self, grid: &[f64]) -> Result<ComplexReflection> {
        self.validate()?;
        check_grid(grid)?;
        let phase = self.round_trip_phase();
        let values = grid
            .iter()
            .map(|&d| born_sum(self.coupling(d), self.n_layers, phase))
            .collect();
        ComplexReflection::new(grid.to_vec(), values)
    }

    /// Largest relative deviation of the transfer-matrix reflection from the
    /// Born sum over `grid`. The Born sum may exceed unity here.
    pub fn born_equivalence(&self, grid: &[f64]) -> Result<f64> {
        let matrix = stack_reflection(self, grid)?;
        let phase = self.round_trip_phase();
        Ok(grid
            .iter()
            .zip(matrix.values())
            .map(|(&d, &r)| relative_deviation(r, born_sum(self.coupling(d), self.n_layers, phase)))
            .fold(0.0, f64::max))
    }
}

pub fn stack_reflection(stack: &LayerStack, grid: &[f64]) -> Result<ComplexReflection> {
    stack.validate()?;
    check_grid(grid)?;
    let values = grid
        .par_iter()
        .map(|&d| stack.response(d).map(|r| r.reflection))
        .collect::<Result<Vec<_>>>()?;
    ComplexReflection::new(grid.to_vec(), values)
}

/// `max |r_matrix − r_born| / max(|r_born|, 1e-15)` over detunings present in
/// both spectra.
pub fn born_equivalence_report(
    matrix: &ComplexReflection,
    born: &ComplexReflection,
) -> Result<f64> {
    let (a, b) = (matrix.detunings(), born.detunings());
    let (mut i, mut j) = (0, 0);
    let mut worst: Option<f64> = None;
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            i += 1;
        } else if b[j] < a[i] {
            j += 1;
        } else {
            let dev = relative_deviation(matrix.values()[i], born.values()[j]);
            worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
            i += 1;
            j += 1;
        }
    }
    worst.ok_or(Error::DisjointGrids)
}

fn relative_deviation(matrix: Complex64, born: Complex64) -> f64 {
    (matrix - born).norm() / born.norm().max(BORN_FLOOR)
}
