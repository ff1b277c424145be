//! Subcommand bodies. Each writes its CSVs, the resolved config and a
//! manifest into the output directory.

use std::f64::consts::TAU;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bragg_core::broadening::{
    broadened_reflection_spectrum, operating_reflection, resonant_bragg_power, ProbeBeam,
};
use bragg_core::demod::{closure, demodulate, phase_by_counting};
use bragg_core::lattice::{axial_rms_size, lamb_dicke_factor, solid_angle, LatticeConfig};
use bragg_core::physics::{bragg_power, debye_waller, reflectivity, LineSet, ScatterInputs};
use bragg_core::reflection::ComplexReflection;
use bragg_core::spectrum::spectrum_of;
use bragg_core::synthesis::{
    synthesize_beat, synthesize_reference_pair, synthesize_track, wrap_phase, BeatTrace,
    NoiseConfig,
};
use bragg_core::transfer::{stack_response, LayerStack};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Run, RunConfig, Source};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Broadened reflection spectrum |r|, arg r.
    Spectrum,
    /// Swept heterodyne beat, lock-in demodulation and closure report.
    Heterodyne,
    /// Spectra of the Doppler tone, the reference tone and the Bragg beat.
    Moving,
    /// Invariant and reproduction checks; nonzero exit on any failure.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Heterodyne => "heterodyne",
            Command::Moving => "moving",
            Command::Validate => "validate",
        }
    }
}

/// One line of a command's summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub name: String,
    pub value: f64,
    /// Empty for plain measurements.
    pub requirement: String,
    pub passed: bool,
}

impl Finding {
    fn info(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            requirement: String::new(),
            passed: true,
        }
    }

    fn check(name: &str, value: f64, requirement: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            requirement: requirement.to_string(),
            passed,
        }
    }

    pub fn render(&self) -> String {
        if self.requirement.is_empty() {
            format!("{:<40} {:.6e}", self.name, self.value)
        } else {
            let verdict = if self.passed { "PASS" } else { "FAIL" };
            format!(
                "{verdict} {:<40} {:.6e}  ({})",
                self.name, self.value, self.requirement
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub findings: Vec<Finding>,
}

impl Outcome {
    pub fn failures(&self) -> usize {
        self.findings.iter().filter(|f| !f.passed).count()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    preset: &'a str,
    config_file: Option<String>,
    seed: String,
    bragg_core_version: &'a str,
    bragg_cli_version: &'a str,
    outputs: Vec<String>,
    findings: Vec<Finding>,
    config: &'a RunConfig,
}

/// Resolves `cfg`, runs `command` and writes `config.resolved.toml` and
/// `manifest.toml` beside the CSVs. `out_override` replaces `[output] dir`.
pub fn execute(
    command: Command,
    cfg: &RunConfig,
    source: &Source,
    preset: &str,
    out_override: Option<&Path>,
) -> CliResult<Outcome> {
    let mut resolved = cfg.resolved(source)?;
    if let Some(dir) = out_override {
        resolved.output.dir = dir.to_path_buf();
    }
    let run = resolved.to_run(source)?;
    fs::create_dir_all(&run.out_dir).map_err(|e| io_error(&run.out_dir, e))?;

    let mut outcome = match command {
        Command::Spectrum => spectrum(&run)?,
        Command::Heterodyne => heterodyne(&run)?,
        Command::Moving => moving(&run)?,
        Command::Validate => validate(&run)?,
    };

    let config_path = run.out_dir.join("config.resolved.toml");
    fs::write(&config_path, resolved.to_toml()).map_err(|e| io_error(&config_path, e))?;
    outcome.outputs.push(config_path);

    let manifest_path = run.out_dir.join("manifest.toml");
    let manifest = Manifest {
        command: command.name(),
        preset,
        config_file: source.path.as_ref().map(|p| p.display().to_string()),
        seed: run.seed.to_string(),
        bragg_core_version: bragg_core::VERSION,
        bragg_cli_version: env!("CARGO_PKG_VERSION"),
        outputs: outcome
            .outputs
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        findings: outcome.findings.clone(),
        config: &resolved,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(|e| io_error(&manifest_path, e))?;
    outcome.outputs.push(manifest_path);

    Ok(outcome)
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

/// Broadened reflection spectrum at the configured operating point.
pub fn reflection_spectrum(run: &Run) -> CliResult<ComplexReflection> {
    let peak = operating_reflection(&run.lattice, &run.probe, &run.lines)?;
    Ok(broadened_reflection_spectrum(
        &run.lines,
        &run.lattice,
        peak,
        &run.broadening,
        &run.grid,
    )?)
}

pub fn spectrum(run: &Run) -> CliResult<Outcome> {
    let r = reflection_spectrum(run)?;
    let complex = run.out_dir.join("spectrum.csv");
    let polar = run.out_dir.join("spectrum_polar.csv");
    r.write_csv(create(&complex)?)?;
    r.write_polar_csv(create(&polar)?)?;

    let (k, peak) = r
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (k, v.norm()))
        .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
    Ok(Outcome {
        outputs: vec![complex, polar],
        findings: vec![
            Finding::info("peak |r|", peak),
            Finding::info("peak detuning (MHz)", r.detunings()[k] / (TAU * 1e6)),
            Finding::info("grid points", r.len() as f64),
        ],
    })
}

pub fn heterodyne(run: &Run) -> CliResult<Outcome> {
    let r = reflection_spectrum(run)?;
    let trace = synthesize_beat(&r, &run.sweep)?;
    let track = synthesize_track(&r, &run.sweep)?;
    let demod = demodulate(&trace, &run.demod)?;
    let counted = phase_by_counting(&trace)?;
    let trace_spectrum = spectrum_of(&trace.samples, trace.sample_rate, run.window)?;
    let fit = closure(
        &demod,
        &track.reflection,
        run.sweep.reference_field * run.sweep.probe_field,
    );

    let paths: Vec<PathBuf> = [
        "spectrum_polar.csv",
        "trace.csv",
        "demod.csv",
        "phase_counting.csv",
        "trace_spectrum.csv",
    ]
    .iter()
    .map(|n| run.out_dir.join(n))
    .collect();
    r.write_polar_csv(create(&paths[0])?)?;
    trace.write_csv(create(&paths[1])?)?;
    demod.write_csv(create(&paths[2])?)?;
    write_phase_csv(&paths[3], &trace, &counted)?;
    trace_spectrum.write_csv(create(&paths[4])?)?;

    let noise_off = run.sweep.noise.is_off();
    let mut findings = vec![
        Finding::info("carrier (kHz)", run.sweep.carrier() / (TAU * 1e3)),
        Finding::info(
            "trace spectrum peak (kHz)",
            trace_spectrum.peak_frequency() / 1e3,
        ),
        Finding::info("spectrum bin (Hz)", trace_spectrum.bin_width()),
    ];
    if noise_off {
        findings.push(Finding::check(
            "closure amplitude rms",
            fit.amplitude_rms,
            "< 0.01",
            fit.amplitude_rms < 0.01,
        ));
        findings.push(Finding::check(
            "closure phase rms (rad)",
            fit.phase_rms,
            "< 0.02",
            fit.phase_rms < 0.02,
        ));
    } else {
        findings.push(Finding::info("closure amplitude rms", fit.amplitude_rms));
        findings.push(Finding::info("closure phase rms (rad)", fit.phase_rms));
    }
    Ok(Outcome {
        outputs: paths,
        findings,
    })
}

fn write_phase_csv(path: &Path, trace: &BeatTrace, phase: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["time_s", "phase_rad"])
        .map_err(bragg_core::Error::from)?;
    for (i, p) in phase.iter().enumerate() {
        w.write_record([trace.time(i).to_string(), p.to_string()])
            .map_err(bragg_core::Error::from)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn moving(run: &Run) -> CliResult<Outcome> {
    let r = reflection_spectrum(run)?;
    let beat = synthesize_beat(&r, &run.sweep)?;
    let (doppler, reference) = synthesize_reference_pair(&run.sweep)?;
    let spectra = [
        (
            "doppler_spectrum.csv",
            spectrum_of(&doppler.samples, doppler.sample_rate, run.window)?,
        ),
        (
            "reference_spectrum.csv",
            spectrum_of(&reference.samples, reference.sample_rate, run.window)?,
        ),
        (
            "bragg_spectrum.csv",
            spectrum_of(&beat.samples, beat.sample_rate, run.window)?,
        ),
    ];
    let mut outputs = Vec::new();
    for (name, s) in &spectra {
        let path = run.out_dir.join(name);
        s.write_csv(create(&path)?)?;
        outputs.push(path);
    }
    let expected = run.sweep.carrier().abs() / TAU;
    let bin = spectra[2].1.bin_width();
    let bragg_peak = spectra[2].1.peak_frequency();
    let offset = peak_bin_offset(bragg_peak, expected, bin);
    Ok(Outcome {
        outputs,
        findings: vec![
            Finding::info(
                "doppler tone peak (kHz)",
                spectra[0].1.peak_frequency() / 1e3,
            ),
            Finding::info(
                "reference tone peak (kHz)",
                spectra[1].1.peak_frequency() / 1e3,
            ),
            Finding::info("bragg beat peak (kHz)", bragg_peak / 1e3),
            Finding::info("expected |beat - pump| (kHz)", expected / 1e3),
            Finding::info(
                "lattice velocity (mm/s)",
                run.sweep.lattice_velocity(run.lattice.lambda_dip) * 1e3,
            ),
            Finding::check(
                "bragg peak offset (bins)",
                offset as f64,
                "|offset| <= 1",
                offset.abs() <= 1,
            ),
        ],
    })
}

/// Signed distance in whole bins between a spectral peak and the bin
/// nearest to `expected`.
pub fn peak_bin_offset(peak: f64, expected: f64, bin_width: f64) -> i64 {
    (peak / bin_width).round() as i64 - (expected / bin_width).round() as i64
}

/// Scatter inputs of the experiment's own estimate: 6.25·10⁵ coherent atoms,
/// f_DW = 0.8, Ω_s = 1.5·10⁻⁵ sr, 10 W/m² p-polarized.
pub fn reference_scatter_inputs() -> ScatterInputs {
    ScatterInputs {
        incident_intensity: 10.0,
        saturation_intensity: 20.0,
        illuminated_atoms: 625_000,
        polarization_angle: TAU / 4.0,
        debye_waller: 0.8,
        solid_angle: 1.5e-5,
    }
}

/// Power scattered by `atoms` coherent scatterers on resonance of a single line.
pub fn reference_bragg_power(atoms: u64) -> bragg_core::Result<f64> {
    let lines = LineSet::single(TAU * 1.3e6, 420.2e-9)?;
    let inputs = ScatterInputs {
        illuminated_atoms: atoms,
        ..reference_scatter_inputs()
    };
    bragg_power(
        &inputs,
        lines.polarizability(0.0),
        &lines,
        Complex64::new(atoms as f64, 0.0),
    )
}

/// Least-squares slope of `ln P` against `ln N_tot` over two decades.
pub fn quadratic_scaling_slope(
    lattice: &LatticeConfig,
    lines: &LineSet,
) -> bragg_core::Result<f64> {
    let base = lattice.total_atoms.max(1_000_000) as f64;
    let points: Vec<(f64, f64)> = (0..=10)
        .map(|i| {
            let mut l = *lattice;
            l.total_atoms = (base * 10f64.powf(i as f64 / 5.0)).round() as u64;
            let p = resonant_bragg_power(&l, &ProbeBeam::experiment(), lines)?;
            Ok(((l.total_atoms as f64).ln(), p.ln()))
        })
        .collect::<bragg_core::Result<_>>()?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Worst `||r|² + |t|² − 1|` of `stack` with absorption removed from ζ.
pub fn lossless_energy_error(stack: &LayerStack, grid: &[f64]) -> bragg_core::Result<f64> {
    let phase = stack.round_trip_phase();
    grid.iter().try_fold(0.0f64, |worst, &d| {
        let zeta = Complex64::new(stack.coupling(d).re, 0.0);
        let r = stack_response(zeta, stack.n_layers, phase)?;
        Ok(worst.max((r.reflection.norm_sqr() + r.transmission.norm_sqr() - 1.0).abs()))
    })
}

/// Worst relative deviation of the instantaneous carrier, with the
/// reflection-phase slope removed, from `Δω_i − 2k_dip·v`.
pub fn doppler_identity_error(run: &Run, r: &ComplexReflection) -> bragg_core::Result<f64> {
    let mut sweep = run.sweep;
    sweep.noise = NoiseConfig::default();
    let track = synthesize_track(r, &sweep)?;
    let dt = 1.0 / sweep.sample_rate;
    let carrier = sweep.carrier();
    Ok((1..track.time.len())
        .map(|i| {
            let d_phi = wrap_phase(track.reflection[i].arg() - track.reflection[i - 1].arg());
            let omega = (track.carrier_phase[i] - track.carrier_phase[i - 1] - d_phi) / dt;
            ((omega - carrier) / carrier).abs()
        })
        .fold(0.0, f64::max))
}

pub fn validate(run: &Run) -> CliResult<Outcome> {
    let mut f = Vec::new();

    // Fixed reproduction numbers, independent of the configuration.
    let p = reference_bragg_power(625_000)?;
    f.push(Finding::check(
        "scattered power (nW)",
        p * 1e9,
        "400 +/- 30%",
        (p / 400e-9 - 1.0).abs() <= 0.3,
    ));
    let r = reflectivity(100e-12, 10.0, 30e-6, 250e-6)?;
    f.push(Finding::check(
        "reflectivity at 100 pW",
        r,
        "0.029 +/- 0.003",
        (r - 0.029).abs() <= 0.003,
    ));
    let lattice = LatticeConfig::experiment();
    let omega = solid_angle(&lattice);
    f.push(Finding::check(
        "solid angle (sr)",
        omega,
        "1.5e-5 +/- 5%",
        (omega / 1.5e-5 - 1.0).abs() <= 0.05,
    ));
    let dw = debye_waller(lattice.delta_kz(), axial_rms_size(&lattice));
    f.push(Finding::check(
        "Debye-Waller factor",
        dw,
        "0.82 +/- 0.02",
        (dw - 0.82).abs() <= 0.02,
    ));
    let ld = lamb_dicke_factor(&lattice, 0);
    f.push(Finding::check(
        "Lamb-Dicke factor",
        ld,
        "0.01 +/- 20%",
        (ld / 0.01 - 1.0).abs() <= 0.2,
    ));

    let slope = quadratic_scaling_slope(&run.lattice, &run.lines)?;
    f.push(Finding::check(
        "power vs atom number slope",
        slope,
        "2.00 +/- 0.01",
        (slope - 2.0).abs() <= 0.01,
    ));

    match operating_reflection(&run.lattice, &run.probe, &run.lines) {
        Ok(r_op) => {
            f.push(Finding::check("operating |r|", r_op, "<= 1", r_op <= 1.0));
            let spectrum = reflection_spectrum(run)?;
            f.push(Finding::check(
                "spectrum max |r|",
                spectrum.max_magnitude(),
                "<= 1",
                spectrum.max_magnitude() <= 1.0,
            ));

            let mut quiet = run.sweep;
            quiet.noise = NoiseConfig::default();
            let trace = synthesize_beat(&spectrum, &quiet)?;
            let track = synthesize_track(&spectrum, &quiet)?;
            let demod = demodulate(&trace, &run.demod)?;
            let fit = closure(
                &demod,
                &track.reflection,
                quiet.reference_field * quiet.probe_field,
            );
            f.push(Finding::check(
                "closure amplitude rms",
                fit.amplitude_rms,
                "< 0.01",
                fit.amplitude_rms < 0.01,
            ));
            f.push(Finding::check(
                "closure phase rms (rad)",
                fit.phase_rms,
                "< 0.02",
                fit.phase_rms < 0.02,
            ));

            let doppler = doppler_identity_error(run, &spectrum)?;
            f.push(Finding::check(
                "Doppler identity relative error",
                doppler,
                "< 1e-8",
                doppler < 1e-8,
            ));

            let a = synthesize_beat(&spectrum, &run.sweep)?;
            let b = synthesize_beat(&spectrum, &run.sweep)?;
            let again = reflection_spectrum(run)?;
            let same = a == b && again == spectrum;
            f.push(Finding::check(
                "seeded reruns identical",
                same as u8 as f64,
                "== 1",
                same,
            ));
        }
        Err(bragg_core::Error::UnphysicalReflectivity(big_r)) => {
            f.push(Finding::check("operating |r|", big_r.sqrt(), "<= 1", false));
        }
        Err(e) => return Err(e.into()),
    }

    let mut dilute = run.stack.clone();
    dilute.areal_density *= 1e-4;
    let born = dilute.born_equivalence(&run.stack_grid)?;
    f.push(Finding::check(
        "Born deviation, dilute limit",
        born,
        "< 1e-3",
        born < 1e-3,
    ));
    let born_cfg = run.stack.born_equivalence(&run.stack_grid)?;
    f.push(Finding::info("Born deviation, configured stack", born_cfg));
    let energy = lossless_energy_error(&run.stack, &run.stack_grid)?;
    f.push(Finding::check(
        "lossless energy error",
        energy,
        "< 1e-9",
        energy < 1e-9,
    ));

    let path = run.out_dir.join("validation.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["check", "value", "requirement", "passed"])
        .map_err(bragg_core::Error::from)?;
    for x in &f {
        w.write_record([
            x.name.clone(),
            x.value.to_string(),
            x.requirement.clone(),
            x.passed.to_string(),
        ])
        .map_err(bragg_core::Error::from)?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    Ok(Outcome {
        outputs: vec![path],
        findings: f,
    })
}
