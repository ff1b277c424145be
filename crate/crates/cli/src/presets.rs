use std::fmt;
use std::str::FromStr;

use bragg_core::broadening::DEFAULT_LIGHT_SHIFT_RATIO;
use bragg_core::demod::DEFAULT_FILTER_TAPS;

use crate::config::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Broadened two-line reflection spectrum.
    #[value(name = "paper-fig2c")]
    Spectrum,
    /// Swept heterodyne beat at a 5.4 kHz carrier, demodulated.
    #[value(name = "paper-fig3")]
    Heterodyne,
    /// Moving lattice: 37 kHz pump difference, 52 kHz beat offset.
    #[value(name = "paper-fig4")]
    MovingLattice,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Spectrum, Preset::Heterodyne, Preset::MovingLattice];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Spectrum => "paper-fig2c",
            Preset::Heterodyne => "paper-fig3",
            Preset::MovingLattice => "paper-fig4",
        }
    }

    pub fn config(self) -> RunConfig {
        let mut cfg = base();
        match self {
            Preset::Spectrum | Preset::Heterodyne => {}
            Preset::MovingLattice => {
                cfg.sweep.duration_ms = 50.0;
                cfg.sweep.sample_rate_hz = 1e6;
                cfg.sweep.beat_offset_khz = 52.0;
                cfg.sweep.pump_difference_khz = Some(37.0);
                cfg.demod.filter_taps = DEFAULT_FILTER_TAPS;
            }
        }
        cfg
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

/// The experiment's operating point. The sweep keeps the 5.4 kHz carrier but
/// lasts 500 ms so the lock-in has many carrier cycles per linewidth.
fn base() -> RunConfig {
    RunConfig {
        seed: 0,
        lattice: LatticeSection {
            lambda_brg_nm: 420.2,
            lambda_dip_nm: None,
            incidence_angle_deg: 58.0,
            trap_depth_uk: 1000.0,
            temperature_uk: 200.0,
            cavity_waist_um: 130.0,
            radial_size_um: 30.0,
            beam_size_um: 250.0,
            total_atoms: 10_000_000,
            illuminated_fraction: 1.0 / 16.0,
            axial_frequency_khz: None,
            density_per_cm3: 5e11,
        },
        lines: LinesSection {
            transition: vec![
                TransitionEntry {
                    center_offset_mhz: -40.0,
                    linewidth_mhz: 1.3,
                    relative_strength: 1.0 / 3.0,
                },
                TransitionEntry {
                    center_offset_mhz: 0.0,
                    linewidth_mhz: 1.3,
                    relative_strength: 1.0,
                },
            ],
        },
        probe: ProbeSection {
            intensity_w_m2: 10.0,
            saturation_intensity_w_m2: 20.0,
            polarization_angle_deg: 90.0,
            coherent_fraction: None,
        },
        broadening: BroadeningSection {
            light_shift_ratio: DEFAULT_LIGHT_SHIFT_RATIO,
            samples: 100_000,
        },
        spectrum: SpectrumSection {
            detuning_min_mhz: -100.0,
            detuning_max_mhz: 100.0,
            points: 1024,
        },
        sweep: SweepSection {
            duration_ms: 500.0,
            detuning_start_mhz: 100.0,
            detuning_stop_mhz: -100.0,
            law: SweepLawName::Linear,
            sample_rate_hz: 100e3,
            beat_offset_khz: 5.4,
            pump_difference_khz: None,
            lattice_velocity_mm_s: None,
            reference_power_pw: 54.0,
            probe_power_pw: 54.0,
        },
        noise: NoiseSection {
            laser_linewidth_hz: 0.0,
            additive_rms_pw: 0.0,
        },
        demod: DemodSection {
            cutoff_khz: None,
            filter_taps: 1023,
            filter: FilterName::WindowedSinc,
            dc_block: true,
            carrier_phase_deg: 0.0,
            window: "hann".to_string(),
        },
        stack: StackSection {
            n_layers: None,
            density_per_cm3: None,
            span_linewidths: 20.0,
            points: 401,
        },
        output: OutputSection {
            dir: "bragg-out".into(),
        },
    }
}
