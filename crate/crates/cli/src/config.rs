//! TOML run configuration.
//!
//! Keys carry their unit in the name. Angles are degrees and frequencies are
//! cyclic (`_mhz`, `_khz`, `_hz`); conversion to radians and rad/s happens in
//! [`RunConfig::to_run`] only. A config file is merged over a preset, so it
//! only needs the keys it changes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use bragg_core::broadening::{BroadeningParams, ProbeBeam};
use bragg_core::constants::K_B;
use bragg_core::demod::{DemodConfig, LowPassKind};
use bragg_core::lattice::{
    matched_lambda_dip, recoil_frequency, LatticeConfig, DEFAULT_LAMB_DICKE,
};
use bragg_core::physics::{LineSet, TransitionLine};
use bragg_core::reflection::linear_grid;
use bragg_core::spectrum::Window;
use bragg_core::synthesis::{NoiseConfig, SweepConfig, SweepLaw};
use bragg_core::transfer::LayerStack;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const MHZ: f64 = TAU * 1e6;
const KHZ: f64 = TAU * 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub lattice: LatticeSection,
    pub lines: LinesSection,
    pub probe: ProbeSection,
    pub broadening: BroadeningSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub noise: NoiseSection,
    pub demod: DemodSection,
    pub stack: StackSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub lambda_brg_nm: f64,
    /// Bragg-matched to the probe when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_dip_nm: Option<f64>,
    pub incidence_angle_deg: f64,
    /// U₀/k_B.
    pub trap_depth_uk: f64,
    pub temperature_uk: f64,
    pub cavity_waist_um: f64,
    pub radial_size_um: f64,
    pub beam_size_um: f64,
    pub total_atoms: u64,
    pub illuminated_fraction: f64,
    /// Ω_z/2π; Lamb-Dicke factor 0.01 when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axial_frequency_khz: Option<f64>,
    pub density_per_cm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinesSection {
    pub transition: Vec<TransitionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub center_offset_mhz: f64,
    pub linewidth_mhz: f64,
    pub relative_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub intensity_w_m2: f64,
    pub saturation_intensity_w_m2: f64,
    pub polarization_angle_deg: f64,
    /// Chosen so the lattice reflects the measured 100 pW when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherent_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadeningSection {
    pub light_shift_ratio: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub detuning_min_mhz: f64,
    pub detuning_max_mhz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepLawName {
    Linear,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub duration_ms: f64,
    pub detuning_start_mhz: f64,
    pub detuning_stop_mhz: f64,
    pub law: SweepLawName,
    pub sample_rate_hz: f64,
    /// Δω_i/2π.
    pub beat_offset_khz: f64,
    /// (ω₊ − ω₋)/2π. Give this or the lattice velocity; zero when both are absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_difference_khz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_velocity_mm_s: Option<f64>,
    /// E_r0².
    pub reference_power_pw: f64,
    /// E_i0².
    pub probe_power_pw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub laser_linewidth_hz: f64,
    pub additive_rms_pw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterName {
    WindowedSinc,
    BrickWall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemodSection {
    /// A quarter of the beat carrier when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_khz: Option<f64>,
    pub filter_taps: usize,
    pub filter: FilterName,
    pub dc_block: bool,
    pub carrier_phase_deg: f64,
    /// FFT window for spectra: rectangular, hann, hamming or blackman.
    pub window: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSection {
    /// Layers taking part in multiple scattering when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_layers: Option<u64>,
    /// Lattice density when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_per_cm3: Option<f64>,
    /// Half-width of the comparison grid in units of the narrowest linewidth.
    pub span_linewidths: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Everything a command needs, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub lines: LineSet,
    pub probe: ProbeBeam,
    pub broadening: BroadeningParams,
    /// rad/s.
    pub grid: Vec<f64>,
    pub sweep: SweepConfig,
    pub demod: DemodConfig,
    pub window: Window,
    pub stack: LayerStack,
    /// rad/s.
    pub stack_grid: Vec<f64>,
    pub out_dir: PathBuf,
}

/// Seeds are u64 but TOML integers are i64; large seeds are written as strings.
mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Where a config came from, for error messages.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub path: Option<PathBuf>,
    pub text: String,
}

impl Source {
    fn name(&self) -> String {
        self.path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<preset>".to_string())
    }

    /// Line (1-based) of `key` inside `[section]`, or of a top-level key.
    fn locate(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim();
            if let Some(header) = t.strip_prefix('[') {
                current = header
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .trim()
                    .to_string();
                continue;
            }
            let Some((k, _)) = t.split_once('=') else {
                continue;
            };
            let k = k.trim();
            let section_matches = section.is_empty() && current.is_empty()
                || current == section
                || current.starts_with(&format!("{section}."));
            if k == key && section_matches {
                return Some(i + 1);
            }
        }
        None
    }

    /// First line whose key is `key`, in any section.
    fn locate_anywhere(&self, key: &str) -> Option<usize> {
        self.text
            .lines()
            .position(|line| {
                line.trim()
                    .split_once('=')
                    .is_some_and(|(k, _)| k.trim() == key)
            })
            .map(|i| i + 1)
    }

    pub fn error(&self, section: &str, key: &str, message: impl std::fmt::Display) -> CliError {
        let path = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        let location = match self.locate(section, key) {
            Some(line) => format!("{}:{line}", self.name()),
            None => match &self.path {
                Some(_) => format!("{} (value from preset)", self.name()),
                None => self.name(),
            },
        };
        CliError::Config {
            location,
            message: format!("{path}: {message}"),
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses `text` and merges it over `base`.
    pub fn overlay(base: &RunConfig, source: &Source) -> CliResult<RunConfig> {
        let over: toml::Table =
            source
                .text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config {
                    location: format!(
                        "{}:{}",
                        source.name(),
                        e.span()
                            .map(|s| line_of(&source.text, s.start))
                            .unwrap_or(1)
                    ),
                    message: e.message().to_string(),
                })?;
        let mut merged = toml::Table::try_from(base).expect("config serializes");
        merge(&mut merged, over);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| {
                let message = e.message().to_string();
                let line = backticked(&message).and_then(|k| source.locate_anywhere(k));
                CliError::Config {
                    location: match line {
                        Some(l) => format!("{}:{l}", source.name()),
                        None => source.name(),
                    },
                    message,
                }
            })
    }

    pub fn load(base: &RunConfig, path: &Path) -> CliResult<(RunConfig, Source)> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let source = Source {
            path: Some(path.to_path_buf()),
            text,
        };
        Ok((Self::overlay(base, &source)?, source))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills every optional key with the value it defaults to, so the result
    /// reproduces this run without relying on defaults.
    pub fn resolved(&self, source: &Source) -> CliResult<RunConfig> {
        let mut out = self.clone();
        let l = &mut out.lattice;
        let lambda_brg = l.lambda_brg_nm * 1e-9;
        // Checked here because the derived trap wavelength depends on it.
        if !(0.0..90.0).contains(&l.incidence_angle_deg) {
            return Err(source.error(
                "lattice",
                "incidence_angle_deg",
                format!("{} must lie in [0, 90)", l.incidence_angle_deg),
            ));
        }
        if l.lambda_dip_nm.is_none() {
            l.lambda_dip_nm =
                Some(matched_lambda_dip(lambda_brg, l.incidence_angle_deg.to_radians()) * 1e9);
        }
        if l.axial_frequency_khz.is_none() {
            l.axial_frequency_khz = Some(recoil_frequency(lambda_brg) / DEFAULT_LAMB_DICKE / KHZ);
        }
        let lambda_dip = l.lambda_dip_nm.unwrap() * 1e-9;

        let s = &mut out.sweep;
        // 2k_dip·v = ω₊ − ω₋ with v in mm/s and the difference in kHz.
        let khz_per_mm_s = 2.0 / lambda_dip * 1e-3 / 1e3;
        match (s.pump_difference_khz, s.lattice_velocity_mm_s) {
            (None, None) => {
                s.pump_difference_khz = Some(0.0);
                s.lattice_velocity_mm_s = Some(0.0);
            }
            (Some(p), None) => s.lattice_velocity_mm_s = Some(p / khz_per_mm_s),
            (None, Some(v)) => s.pump_difference_khz = Some(v * khz_per_mm_s),
            (Some(p), Some(v)) => {
                let implied = v * khz_per_mm_s;
                if (implied - p).abs() > 1e-9 * p.abs().max(implied.abs()).max(1e-12) {
                    return Err(source.error(
                        "sweep",
                        "lattice_velocity_mm_s",
                        format!(
                            "{v} mm/s implies a pump difference of {implied} kHz, \
                             inconsistent with pump_difference_khz = {p}; set only one"
                        ),
                    ));
                }
            }
        }
        let carrier_khz = s.beat_offset_khz - s.pump_difference_khz.unwrap();
        if out.demod.cutoff_khz.is_none() {
            out.demod.cutoff_khz = Some(carrier_khz.abs() / 4.0);
        }

        if out.probe.coherent_fraction.is_none() {
            let lattice = lattice_from(&out.lattice, source)?;
            let lines = lines_from(&out, source)?;
            let probe = ProbeBeam::calibrated_to_measurement(&lattice, &lines)
                .map_err(|e| source.error("probe", "coherent_fraction", e))?;
            out.probe.coherent_fraction = Some(probe.coherent_fraction);
        }

        if out.stack.n_layers.is_none() {
            let lattice = lattice_from(&out.lattice, source)?;
            out.stack.n_layers = Some(bragg_core::lattice::effective_layers(&lattice));
        }
        if out.stack.density_per_cm3.is_none() {
            out.stack.density_per_cm3 = Some(out.lattice.density_per_cm3);
        }
        Ok(out)
    }

    /// Resolves defaults and converts to SI, validating every section.
    pub fn to_run(&self, source: &Source) -> CliResult<Run> {
        let cfg = self.resolved(source)?;
        let lattice = lattice_from(&cfg.lattice, source)?;
        let lines = lines_from(&cfg, source)?;

        let p = &cfg.probe;
        let probe = ProbeBeam {
            intensity: p.intensity_w_m2,
            saturation_intensity: p.saturation_intensity_w_m2,
            polarization_angle: p.polarization_angle_deg.to_radians(),
            coherent_fraction: p.coherent_fraction.unwrap(),
        };
        probe.validate().map_err(|e| {
            let key = match core_name(&e) {
                "intensity" => "intensity_w_m2",
                "saturation_intensity" => "saturation_intensity_w_m2",
                _ => "coherent_fraction",
            };
            source.error("probe", key, e)
        })?;

        let b = &cfg.broadening;
        if !(b.light_shift_ratio >= 0.0 && b.light_shift_ratio.is_finite()) {
            return Err(source.error("broadening", "light_shift_ratio", "must be >= 0"));
        }
        if b.samples == 0 {
            return Err(source.error("broadening", "samples", "must be >= 1"));
        }
        let broadening = BroadeningParams {
            light_shift_ratio: b.light_shift_ratio,
            samples: b.samples,
            seed: cfg.seed,
        };

        let g = &cfg.spectrum;
        if g.points < 2 {
            return Err(source.error("spectrum", "points", "must be >= 2"));
        }
        if !(g.detuning_max_mhz > g.detuning_min_mhz) {
            return Err(source.error(
                "spectrum",
                "detuning_max_mhz",
                "must exceed detuning_min_mhz",
            ));
        }
        let grid = linear_grid(g.detuning_min_mhz * MHZ, g.detuning_max_mhz * MHZ, g.points);

        let s = &cfg.sweep;
        let sweep = SweepConfig {
            duration: s.duration_ms * 1e-3,
            detuning_start: s.detuning_start_mhz * MHZ,
            detuning_stop: s.detuning_stop_mhz * MHZ,
            law: match s.law {
                SweepLawName::Linear => SweepLaw::Linear,
                SweepLawName::Triangle => SweepLaw::Triangle,
            },
            sample_rate: s.sample_rate_hz,
            beat_offset: s.beat_offset_khz * KHZ,
            pump_difference: s.pump_difference_khz.unwrap() * KHZ,
            reference_field: (s.reference_power_pw * 1e-12).max(0.0).sqrt(),
            probe_field: (s.probe_power_pw * 1e-12).max(0.0).sqrt(),
            noise: NoiseConfig {
                laser_linewidth: cfg.noise.laser_linewidth_hz,
                additive_rms: cfg.noise.additive_rms_pw * 1e-12,
                seed: cfg.seed.wrapping_add(1),
            },
        };
        for (key, v) in [
            ("reference_power_pw", s.reference_power_pw),
            ("probe_power_pw", s.probe_power_pw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(source.error("sweep", key, "must be >= 0"));
            }
        }
        sweep.validate().map_err(|e| match &e {
            bragg_core::Error::Nyquist { .. } => source.error(
                "sweep",
                "sample_rate_hz",
                format!("{e}; the Nyquist constraint needs sample_rate_hz > 2·(|beat_offset| + |pump_difference|)"),
            ),
            _ => match core_name(&e) {
                "laser_linewidth" => source.error("noise", "laser_linewidth_hz", e),
                "additive_rms" => source.error("noise", "additive_rms_pw", e),
                "sample_rate" => source.error("sweep", "sample_rate_hz", e),
                "beat_offset" => source.error("sweep", "beat_offset_khz", e),
                "pump_difference" => source.error("sweep", "pump_difference_khz", e),
                "detuning_start" => source.error("sweep", "detuning_start_mhz", e),
                "detuning_stop" => source.error("sweep", "detuning_stop_mhz", e),
                _ => source.error("sweep", "duration_ms", e),
            },
        })?;

        let d = &cfg.demod;
        let demod = DemodConfig {
            carrier: sweep.carrier().abs(),
            carrier_phase: d.carrier_phase_deg.to_radians(),
            lowpass_cutoff: d.cutoff_khz.unwrap() * KHZ,
            filter_taps: d.filter_taps,
            dc_block: d.dc_block,
            filter: match d.filter {
                FilterName::WindowedSinc => LowPassKind::WindowedSinc,
                FilterName::BrickWall => LowPassKind::BrickWall,
            },
        };
        if sweep.carrier() == 0.0 {
            return Err(source.error(
                "sweep",
                "beat_offset_khz",
                "beat carrier beat_offset - pump_difference must be nonzero",
            ));
        }
        demod.validate(sweep.sample_rate).map_err(|e| {
            let key = match core_name(&e) {
                "filter_taps" => "filter_taps",
                "carrier_phase" => "carrier_phase_deg",
                _ => "cutoff_khz",
            };
            source.error("demod", key, e)
        })?;
        let window: Window = d
            .window
            .parse()
            .map_err(|e| source.error("demod", "window", e))?;

        let k = &cfg.stack;
        let mut stack = LayerStack::from_lattice(&lattice, lines.clone());
        stack.n_layers = k.n_layers.unwrap() as usize;
        stack.areal_density = k.density_per_cm3.unwrap() * 1e6 * lattice.period();
        stack.polarization_angle = probe.polarization_angle;
        stack.validate().map_err(|e| {
            let key = if core_name(&e) == "n_layers" {
                "n_layers"
            } else {
                "density_per_cm3"
            };
            source.error("stack", key, e)
        })?;
        if !(k.span_linewidths > 0.0 && k.span_linewidths.is_finite()) {
            return Err(source.error("stack", "span_linewidths", "must be > 0"));
        }
        if k.points < 2 {
            return Err(source.error("stack", "points", "must be >= 2"));
        }
        let half = k.span_linewidths * lines.min_linewidth();
        let stack_grid = linear_grid(-half, half, k.points);

        Ok(Run {
            seed: cfg.seed,
            lattice,
            lines,
            probe,
            broadening,
            grid,
            sweep,
            demod,
            window,
            stack,
            stack_grid,
            out_dir: cfg.output.dir.clone(),
        })
    }
}

fn lattice_from(l: &LatticeSection, source: &Source) -> CliResult<LatticeConfig> {
    let lambda_brg = l.lambda_brg_nm * 1e-9;
    let angle = l.incidence_angle_deg.to_radians();
    let lattice = LatticeConfig {
        lambda_dip: l
            .lambda_dip_nm
            .map(|v| v * 1e-9)
            .unwrap_or_else(|| matched_lambda_dip(lambda_brg, angle)),
        lambda_brg,
        incidence_angle: angle,
        trap_depth: K_B * l.trap_depth_uk * 1e-6,
        temperature: l.temperature_uk * 1e-6,
        cavity_waist: l.cavity_waist_um * 1e-6,
        radial_size: l.radial_size_um * 1e-6,
        beam_size: l.beam_size_um * 1e-6,
        total_atoms: l.total_atoms,
        illuminated_fraction: l.illuminated_fraction,
        axial_frequency: l
            .axial_frequency_khz
            .map(|v| v * KHZ)
            .unwrap_or_else(|| recoil_frequency(lambda_brg) / DEFAULT_LAMB_DICKE),
        density: l.density_per_cm3 * 1e6,
    };
    lattice.validate().map_err(|e| {
        let key = match core_name(&e) {
            "lambda_dip" => "lambda_dip_nm",
            "lambda_brg" => "lambda_brg_nm",
            "trap_depth" => "trap_depth_uk",
            "temperature" => "temperature_uk",
            "cavity_waist" => "cavity_waist_um",
            "radial_size" => "radial_size_um",
            "beam_size" => "beam_size_um",
            "axial_frequency" => "axial_frequency_khz",
            "density" => "density_per_cm3",
            "illuminated_fraction" => "illuminated_fraction",
            _ => "incidence_angle_deg",
        };
        source.error("lattice", key, e)
    })?;
    Ok(lattice)
}

fn lines_from(cfg: &RunConfig, source: &Source) -> CliResult<LineSet> {
    let lines = cfg
        .lines
        .transition
        .iter()
        .map(|t| TransitionLine {
            center_offset: t.center_offset_mhz * MHZ,
            linewidth: t.linewidth_mhz * MHZ,
            relative_strength: t.relative_strength,
        })
        .collect();
    LineSet::new(lines, cfg.lattice.lambda_brg_nm * 1e-9).map_err(|e| {
        let key = match core_name(&e) {
            "linewidth" => "linewidth_mhz",
            "relative_strength" => "relative_strength",
            "center_offset" | "lines" => "center_offset_mhz",
            _ => "transition",
        };
        source.error("lines.transition", key, e)
    })
}

fn core_name(e: &bragg_core::Error) -> &'static str {
    match e {
        bragg_core::Error::InvalidParameter { name, .. } => name,
        _ => "",
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}
