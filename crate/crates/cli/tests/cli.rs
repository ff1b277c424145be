//! End-to-end runs of the `bragg` binary.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bragg_cli::config::Source;
use bragg_cli::presets::Preset;
use bragg_core::broadening::operating_reflection;
use bragg_core::physics::LineSet;

fn bragg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bragg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = bragg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a numeric CSV, header skipped.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn peak_frequency(path: &Path) -> f64 {
    rows(path)
        .into_iter()
        .max_by(|a, b| a[1].total_cmp(&b[1]))
        .unwrap()[0]
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn default_spectrum_has_two_lines_forty_mhz_apart() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["spectrum", "--out", s(dir.path())]);
    let data = rows(&dir.path().join("spectrum_polar.csv"));
    let maxima: Vec<(f64, f64)> = (1..data.len() - 1)
        .filter(|&i| data[i][1] > data[i - 1][1] && data[i][1] >= data[i + 1][1])
        .map(|i| (data[i][0] / (TAU * 1e6), data[i][1]))
        .collect();
    assert_eq!(maxima.len(), 2, "{maxima:?}");
    let separation = maxima[1].0 - maxima[0].0;
    assert!((separation - 40.0).abs() < 1.0, "{separation}");
    // Overlapping broadened wings lift the weak line slightly above 1:3.
    let ratio = maxima[0].1 / maxima[1].1;
    assert!((0.25..0.45).contains(&ratio), "{ratio}");

    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    for key in [
        "command = \"spectrum\"",
        "preset = \"paper-fig2c\"",
        "seed = \"0\"",
        "bragg_core_version",
        "[config.lattice]",
    ] {
        assert!(manifest.contains(key), "{key} missing");
    }
}

#[test]
fn zero_broadening_gives_the_bare_lineset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[broadening]\nlight_shift_ratio = 0.0\n");
    run_ok(&["spectrum", "--config", s(&cfg), "--out", s(dir.path())]);

    let run = Preset::Spectrum
        .config()
        .to_run(&Source::default())
        .unwrap();
    let peak = operating_reflection(&run.lattice, &run.probe, &run.lines).unwrap();
    for row in rows(&dir.path().join("spectrum.csv")) {
        let expected = run.lines.response(row[0]) * peak;
        assert!((row[1] - expected.re).abs() < 1e-15 && (row[2] - expected.im).abs() < 1e-15);
    }
}

#[test]
fn no_atoms_reflect_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[lattice]\ntotal_atoms = 0\n");
    run_ok(&["spectrum", "--config", s(&cfg), "--out", s(dir.path())]);
    let data = rows(&dir.path().join("spectrum_polar.csv"));
    assert!(data.iter().all(|r| r[1] == 0.0));
}

#[test]
fn nyquist_violation_exits_one_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nsample_rate_hz = 100e3\n");
    let out = bragg(&["moving", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("Nyquist") && err.contains("run.toml:2"),
        "{err}"
    );
}

#[test]
fn io_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let out = bragg(&["spectrum", "--config", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = bragg(&["spectrum", "--out", s(&blocker.join("sub"))]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_key_exits_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\n[probe]\nintensity_wm2 = 3.0\n");
    let out = bragg(&["spectrum", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.toml:3"));
}

#[test]
fn validate_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["validate", "--out", s(dir.path())]);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    let report = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert!(report.starts_with("check,value,requirement,passed"));
}

#[test]
fn validate_reports_reflection_above_unity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[probe]\ncoherent_fraction = 1e6\n");
    let out = bragg(&["validate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL operating |r|"), "{stdout}");
}

#[test]
fn heterodyne_closure_and_carrier() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["heterodyne", "--out", s(dir.path())]);
    assert!(
        stdout.contains("PASS closure amplitude rms") && stdout.contains("PASS closure phase rms")
    );
    for name in [
        "trace.csv",
        "demod.csv",
        "phase_counting.csv",
        "trace_spectrum.csv",
        "spectrum_polar.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    // 2 Hz bins; the downward sweep pulls the peak by at most one bin.
    let peak = peak_frequency(&dir.path().join("trace_spectrum.csv"));
    assert!((peak - 5400.0).abs() <= 2.0 + 1e-9, "{peak}");
}

#[test]
fn stationary_lattice_beats_at_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\npump_difference_khz = 0.0\n");
    run_ok(&["moving", "--config", s(&cfg), "--out", s(dir.path())]);
    let bragg = peak_frequency(&dir.path().join("bragg_spectrum.csv"));
    let reference = peak_frequency(&dir.path().join("reference_spectrum.csv"));
    assert!(
        (bragg - reference).abs() <= 20.0 + 1e-9,
        "{bragg} vs {reference}"
    );
}

#[test]
fn reversed_lattice_velocity_adds_the_doppler_shift() {
    let dir = tempfile::tempdir().unwrap();
    let lambda_dip = LineSet::rb85_blue().wavelength() / 58f64.to_radians().cos();
    let v_mm_s = -37e3 * lambda_dip / 2.0 * 1e3;
    let cfg = write_config(
        dir.path(),
        &format!("[sweep]\nlattice_velocity_mm_s = {v_mm_s}\n"),
    );
    // The preset already fixes the pump difference, so a velocity contradicts it.
    assert_eq!(
        Preset::MovingLattice.config().sweep.pump_difference_khz,
        Some(37.0)
    );
    let out = bragg(&["moving", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("set only one"));

    let cfg = write_config(dir.path(), "[sweep]\npump_difference_khz = -37.0\n");
    run_ok(&["moving", "--config", s(&cfg), "--out", s(dir.path())]);
    let bragg = peak_frequency(&dir.path().join("bragg_spectrum.csv"));
    assert!((bragg - 89e3).abs() <= 20.0 + 1e-9, "{bragg}");
    let resolved = fs::read_to_string(dir.path().join("config.resolved.toml")).unwrap();
    assert!(
        resolved.contains("lattice_velocity_mm_s = -14.66"),
        "{resolved}"
    );
}

#[test]
fn seed_flag_changes_noise_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fig3-noisy.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["heterodyne", "--config", cfg, "--out", s(&a)]);
    run_ok(&["heterodyne", "--config", cfg, "--out", s(&b), "--seed", "8"]);
    assert_ne!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(b.join("trace.csv")).unwrap()
    );
    assert!(fs::read_to_string(b.join("manifest.toml"))
        .unwrap()
        .contains("seed = \"8\""));
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fig3-noisy.toml");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&["heterodyne", "--config", cfg, "--out", s(&first)]);
    let resolved = first.join("config.resolved.toml");
    run_ok(&["heterodyne", "--config", s(&resolved), "--out", s(&second)]);

    let a = csv_files(&first);
    assert_eq!(a.len(), 5);
    for path in a {
        let other = second.join(path.file_name().unwrap());
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(other).unwrap(),
            "{}",
            path.display()
        );
    }
    // Identical apart from the output directory.
    let strip = |p: &Path| {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("dir = "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(&resolved),
        strip(&second.join("config.resolved.toml"))
    );
}
