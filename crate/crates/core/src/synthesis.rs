//! Heterodyne beat synthesis.
//!
//! The detector sees `I = |E_r + r·E_i|²` while the probe detuning is swept:
//!
//! ```text
//! I(t) = E_r0² + |r|²E_i0² + 2|r|E_r0E_i0·cos Θ(t)
//! Θ(t) = (Δω_i − 2k_dip·v)·t + φ(Δ(t)) + phase noise
//! ```
//!
//! Field amplitudes carry power units (`E²` in W) and the detector
//! responsivity is one.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::reflection::ComplexReflection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepLaw {
    /// Start to stop over the whole duration.
    #[default]
    Linear,
    /// Start to stop over the first half, back to start over the second.
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// Lorentzian linewidth of the beat phase random walk, Hz.
    pub laser_linewidth: f64,
    /// White Gaussian detector noise, detector units (W).
    pub additive_rms: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn is_off(&self) -> bool {
        self.laser_linewidth == 0.0 && self.additive_rms == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// s.
    pub duration: f64,
    /// rad/s.
    pub detuning_start: f64,
    /// rad/s.
    pub detuning_stop: f64,
    pub law: SweepLaw,
    /// Hz.
    pub sample_rate: f64,
    /// Probe-reference offset Δω_i, rad/s.
    pub beat_offset: f64,
    /// Pump frequency difference ω₊ − ω₋ = 2k_dip·v, rad/s.
    pub pump_difference: f64,
    /// Reference field amplitude E_r0, √W.
    pub reference_field: f64,
    /// Probe field amplitude E_i0, √W.
    pub probe_field: f64,
    pub noise: NoiseConfig,
}

impl SweepConfig {
    /// 1 ms linear sweep across ±2π·100 MHz, 5.4 kHz beat, 54 pW in both
    /// beams, 1 MHz sampling, static lattice, no noise.
    pub fn experiment() -> Self {
        Self {
            duration: 1e-3,
            detuning_start: TAU * 100e6,
            detuning_stop: -TAU * 100e6,
            law: SweepLaw::Linear,
            sample_rate: 1e6,
            beat_offset: TAU * 5.4e3,
            pump_difference: 0.0,
            reference_field: 54e-12f64.sqrt(),
            probe_field: 54e-12f64.sqrt(),
            noise: NoiseConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", "must be > 0"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(invalid("sample_rate", "must be > 0"));
        }
        for (name, v) in [
            ("detuning_start", self.detuning_start),
            ("detuning_stop", self.detuning_stop),
            ("beat_offset", self.beat_offset),
            ("pump_difference", self.pump_difference),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("reference_field", self.reference_field),
            ("probe_field", self.probe_field),
            ("laser_linewidth", self.noise.laser_linewidth),
            ("additive_rms", self.noise.additive_rms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        let max_carrier_hz = (self.beat_offset.abs() + self.pump_difference.abs()) / TAU;
        if !(self.sample_rate > 2.0 * max_carrier_hz) {
            return Err(Error::Nyquist {
                sample_rate: self.sample_rate,
                max_carrier_hz,
            });
        }
        if self.sample_count() == 0 {
            return Err(invalid("duration", "shorter than one sample"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Beat carrier of the Bragg interferometer, `Δω_i − 2k_dip·v`, rad/s.
    pub fn carrier(&self) -> f64 {
        self.beat_offset - self.pump_difference
    }

    /// Lattice velocity implied by the pump difference, m/s.
    pub fn lattice_velocity(&self, lambda_dip: f64) -> f64 {
        self.pump_difference * lambda_dip / (2.0 * TAU)
    }

    /// Sets the pump difference from a lattice velocity, `2k_dip·v`.
    pub fn set_lattice_velocity(&mut self, velocity: f64, lambda_dip: f64) {
        self.pump_difference = 2.0 * TAU / lambda_dip * velocity;
    }

    pub fn detuning_at(&self, t: f64) -> f64 {
        let x = (t / self.duration).clamp(0.0, 1.0);
        let progress = match self.law {
            SweepLaw::Linear => x,
            SweepLaw::Triangle => 1.0 - (2.0 * x - 1.0).abs(),
        };
        self.detuning_start + (self.detuning_stop - self.detuning_start) * progress
    }

    /// Smallest and largest detuning visited.
    pub fn detuning_range(&self) -> (f64, f64) {
        (
            self.detuning_start.min(self.detuning_stop),
            self.detuning_start.max(self.detuning_stop),
        )
    }
}

/// Uniformly sampled detector signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatTrace {
    pub samples: Vec<f64>,
    /// Hz.
    pub sample_rate: f64,
    pub sweep: SweepConfig,
    /// Probe detuning at each sample, rad/s.
    pub detuning: Vec<f64>,
}

impl BeatTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Writes `time_s,value,detuning_rad_s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "value", "detuning_rad_s"])?;
        for (i, (v, d)) in self.samples.iter().zip(&self.detuning).enumerate() {
            w.write_record([self.time(i).to_string(), v.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-sample quantities that generate a beat trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisTrack {
    pub time: Vec<f64>,
    pub detuning: Vec<f64>,
    /// `r(Δ(t))` by linear interpolation of the spectrum.
    pub reflection: Vec<Complex64>,
    /// Total beat phase Θ(t) including phase noise, unwrapped, rad.
    pub carrier_phase: Vec<f64>,
    /// Additive detector noise per sample.
    pub additive_noise: Vec<f64>,
}

/// Evaluates the sweep, the interpolated reflection and the noisy carrier
/// phase at every sample. Noise is drawn sequentially from one seeded stream.
pub fn synthesize_track(
    reflection: &ComplexReflection,
    sweep: &SweepConfig,
) -> Result<SynthesisTrack> {
    sweep.validate()?;
    let (lo, hi) = sweep.detuning_range();
    if !reflection.covers(lo, hi) {
        return Err(Error::GridDoesNotCoverSweep {
            grid_min: reflection.min_detuning(),
            grid_max: reflection.max_detuning(),
            sweep_min: lo,
            sweep_max: hi,
        });
    }

    let n = sweep.sample_count();
    let dt = 1.0 / sweep.sample_rate;
    let carrier = sweep.carrier();
    let phase_step = (TAU * sweep.noise.laser_linewidth * dt).sqrt();
    let additive = sweep.noise.additive_rms;
    let mut rng = ChaCha8Rng::seed_from_u64(sweep.noise.seed);

    let mut track = SynthesisTrack {
        time: Vec::with_capacity(n),
        detuning: Vec::with_capacity(n),
        reflection: Vec::with_capacity(n),
        carrier_phase: Vec::with_capacity(n),
        additive_noise: Vec::with_capacity(n),
    };
    let mut walk = 0.0;
    let mut phase = 0.0;
    let mut last_arg = None;
    for i in 0..n {
        let t = i as f64 * dt;
        let delta = sweep.detuning_at(t);
        let r = reflection
            .interpolate(delta)
            .expect("sweep range checked against grid");
        if phase_step > 0.0 && i > 0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            walk += phase_step * g;
        }
        let noise = if additive > 0.0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            additive * g
        } else {
            0.0
        };
        // Keep φ(Δ(t)) continuous so Θ is an unwrapped phase.
        let arg = r.arg();
        phase = match last_arg {
            None => arg,
            Some(prev) => phase + wrap_phase(arg - prev),
        };
        last_arg = Some(arg);
        track.time.push(t);
        track.detuning.push(delta);
        track.reflection.push(r);
        track.carrier_phase.push(carrier * t + phase + walk);
        track.additive_noise.push(noise);
    }
    Ok(track)
}

/// Swept heterodyne beat between the Bragg-reflected probe and the reference.
pub fn synthesize_beat(reflection: &ComplexReflection, sweep: &SweepConfig) -> Result<BeatTrace> {
    let track = synthesize_track(reflection, sweep)?;
    let er = sweep.reference_field;
    let ei = sweep.probe_field;
    let samples = track
        .reflection
        .iter()
        .zip(&track.carrier_phase)
        .zip(&track.additive_noise)
        .map(|((r, theta), noise)| {
            let m = r.norm();
            er * er + m * m * ei * ei + 2.0 * m * er * ei * theta.cos() + noise
        })
        .collect();
    Ok(BeatTrace {
        samples,
        sample_rate: sweep.sample_rate,
        sweep: *sweep,
        detuning: track.detuning,
    })
}

/// Pure-tone companions of a moving-lattice measurement: the pump beat at
/// `ω₊ − ω₋` and the reference interferometer at `Δω_i`, both with full
/// fringe contrast `E_r0² + E_i0² + 2E_r0E_i0·cos(ωt)`.
pub fn synthesize_reference_pair(sweep: &SweepConfig) -> Result<(BeatTrace, BeatTrace)> {
    sweep.validate()?;
    let n = sweep.sample_count();
    let detuning: Vec<f64> = (0..n)
        .map(|i| sweep.detuning_at(i as f64 / sweep.sample_rate))
        .collect();
    let er = sweep.reference_field;
    let ei = sweep.probe_field;
    let tone = |omega: f64| BeatTrace {
        samples: (0..n)
            .map(|i| {
                let t = i as f64 / sweep.sample_rate;
                er * er + ei * ei + 2.0 * er * ei * (omega * t).cos()
            })
            .collect(),
        sample_rate: sweep.sample_rate,
        sweep: *sweep,
        detuning: detuning.clone(),
    };
    Ok((tone(sweep.pump_difference), tone(sweep.beat_offset)))
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x - TAU * (x / TAU).round();
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}
