//! Lock-in recovery of the reflection amplitude and phase from a beat trace.
//!
//! Mixing `2A·cos(ωt + φ)` with `cos(ωt + θ)` and `sin(ωt + θ)` and low-pass
//! filtering leaves `u_c = A·cos(φ − θ)` and `u_s = −A·sin(φ − θ)`, so the
//! amplitude is `A = |r|·E_r0·E_i0` (the mixer ½ is not rescaled away) and the
//! phase is `atan2(−u_s, u_c)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::fir::LowPass;
use crate::synthesis::BeatTrace;

pub const DEFAULT_FILTER_TAPS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowPassKind {
    /// Hamming-windowed sinc FIR, group delay compensated.
    #[default]
    WindowedSinc,
    /// Zeroes every FFT bin above the cutoff.
    BrickWall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodConfig {
    /// rad/s.
    pub carrier: f64,
    /// Reference phase θ of the mixing oscillators, rad.
    pub carrier_phase: f64,
    /// rad/s.
    pub lowpass_cutoff: f64,
    /// Odd. Also sets the edge margin for [`LowPassKind::BrickWall`].
    pub filter_taps: usize,
    /// Remove the trace mean before mixing.
    pub dc_block: bool,
    pub filter: LowPassKind,
}

impl DemodConfig {
    /// Cutoff at a quarter of the carrier, 255 taps, DC blocked.
    pub fn for_carrier(carrier: f64) -> Self {
        Self {
            carrier,
            carrier_phase: 0.0,
            lowpass_cutoff: carrier / 4.0,
            filter_taps: DEFAULT_FILTER_TAPS,
            dc_block: true,
            filter: LowPassKind::WindowedSinc,
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.carrier > 0.0 && self.carrier.is_finite()) {
            return Err(invalid("carrier", "must be > 0"));
        }
        if !self.carrier_phase.is_finite() {
            return Err(invalid("carrier_phase", "must be finite"));
        }
        if !(self.lowpass_cutoff > 0.0 && self.lowpass_cutoff < self.carrier) {
            return Err(invalid(
                "lowpass_cutoff",
                "must satisfy 0 < cutoff < carrier",
            ));
        }
        if self.filter_taps < 3 || self.filter_taps % 2 == 0 {
            return Err(invalid(
                "filter_taps",
                format!("must be odd and >= 3, got {}", self.filter_taps),
            ));
        }
        let carrier_hz = self.carrier / TAU;
        if !(sample_rate > 2.0 * carrier_hz) {
            return Err(Error::Nyquist {
                sample_rate,
                max_carrier_hz: carrier_hz,
            });
        }
        Ok(())
    }
}

/// Quadratures on the valid (edge-free) part of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub time: Vec<f64>,
    pub u_c: Vec<f64>,
    pub u_s: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Unwrapped; the first sample keeps its principal value.
    pub phase: Vec<f64>,
    /// Probe detuning at each result sample, rad/s.
    pub detuning: Vec<f64>,
    /// Trace index of the first result sample.
    pub first_index: usize,
}

impl DemodResult {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Writes `time_s,u_c,u_s,amplitude,phase_rad`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "u_c", "u_s", "amplitude", "phase_rad"])?;
        for i in 0..self.len() {
            w.write_record([
                self.time[i].to_string(),
                self.u_c[i].to_string(),
                self.u_s[i].to_string(),
                self.amplitude[i].to_string(),
                self.phase[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn demodulate(trace: &BeatTrace, cfg: &DemodConfig) -> Result<DemodResult> {
    cfg.validate(trace.sample_rate)?;
    if trace.len() <= cfg.filter_taps {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            taps: cfg.filter_taps,
        });
    }
    let offset = if cfg.dc_block {
        trace.samples.iter().sum::<f64>() / trace.len() as f64
    } else {
        0.0
    };
    let (mut mixed_c, mut mixed_s): (Vec<f64>, Vec<f64>) = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (s, c) = (cfg.carrier * trace.time(i) + cfg.carrier_phase).sin_cos();
            let x = x - offset;
            (x * c, x * s)
        })
        .unzip();

    let delay = cfg.filter_taps / 2;
    let valid = trace.len() - 2 * delay;
    let cutoff = cfg.lowpass_cutoff / (TAU * trace.sample_rate);
    let (u_c, u_s) = match cfg.filter {
        LowPassKind::WindowedSinc => {
            let lp = LowPass::windowed_sinc(cfg.filter_taps, cutoff)?;
            (lp.filter_valid(&mixed_c), lp.filter_valid(&mixed_s))
        }
        LowPassKind::BrickWall => {
            brick_wall(&mut mixed_c, &mut mixed_s, cutoff);
            (
                mixed_c[delay..delay + valid].to_vec(),
                mixed_s[delay..delay + valid].to_vec(),
            )
        }
    };

    let amplitude = u_c.iter().zip(&u_s).map(|(c, s)| c.hypot(*s)).collect();
    let wrapped: Vec<f64> = u_c.iter().zip(&u_s).map(|(c, s)| (-s).atan2(*c)).collect();
    Ok(DemodResult {
        time: (delay..delay + valid).map(|i| trace.time(i)).collect(),
        u_c,
        u_s,
        amplitude,
        phase: unwrap_phase(&wrapped),
        detuning: trace.detuning[delay..delay + valid].to_vec(),
        first_index: delay,
    })
}

/// Agreement between a demodulated trace and the reflection that generated it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closure {
    /// RMS of `A − |r|·E_r0·E_i0`, relative to the peak of `|r|·E_r0·E_i0`.
    pub amplitude_rms: f64,
    /// RMS of the wrapped phase difference, rad.
    pub phase_rms: f64,
    pub samples: usize,
}

/// Compares `result` with the generating per-sample reflection `truth`
/// (indexed like the trace) over the central 80% of the trace.
pub fn closure(result: &DemodResult, truth: &[Complex64], field_product: f64) -> Closure {
    let n = truth.len();
    let (lo, hi) = (n / 10, n - n / 10);
    let peak = truth.iter().map(|r| r.norm()).fold(0.0, f64::max) * field_product;
    let (mut amp, mut phase, mut count) = (0.0, 0.0, 0usize);
    for j in 0..result.len() {
        let i = j + result.first_index;
        if i < lo || i >= hi {
            continue;
        }
        let r = truth[i];
        amp += (result.amplitude[j] - r.norm() * field_product).powi(2);
        phase += crate::synthesis::wrap_phase(result.phase[j] - r.arg()).powi(2);
        count += 1;
    }
    let m = count.max(1) as f64;
    Closure {
        amplitude_rms: (amp / m).sqrt() / peak.max(f64::MIN_POSITIVE),
        phase_rms: (phase / m).sqrt(),
        samples: count,
    }
}

/// Low-passes both mixer outputs at once as the real and imaginary parts of
/// one complex sequence. `cutoff` in cycles per sample.
fn brick_wall(re: &mut [f64], im: &mut [f64], cutoff: f64) {
    let n = re.len();
    let mut buf: Vec<Complex64> = re
        .iter()
        .zip(im.iter())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 / n as f64;
        if f > cutoff {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for ((a, b), v) in re.iter_mut().zip(im.iter_mut()).zip(&buf) {
        *a = v.re * scale;
        *b = v.im * scale;
    }
}

/// Removes ±2π jumps so adjacent samples differ by at most π.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut correction = 0.0;
    for (i, &p) in wrapped.iter().enumerate() {
        if i > 0 {
            let jump = p - wrapped[i - 1];
            if jump > PI {
                correction -= TAU * ((jump + PI) / TAU).floor();
            } else if jump < -PI {
                correction += TAU * ((-jump + PI) / TAU).floor();
            }
        }
        out.push(p + correction);
    }
    out
}

/// Phase from counting zero crossings of the mean-removed trace, minus the
/// linear carrier ramp `carrier·t`. Each crossing advances the beat phase by π;
/// the value at a crossing holds until the next one.
pub fn phase_by_counting(trace: &BeatTrace) -> Result<Vec<f64>> {
    let carrier = trace.sweep.carrier();
    let mean = trace.samples.iter().sum::<f64>() / trace.len().max(1) as f64;
    let x: Vec<f64> = trace.samples.iter().map(|v| v - mean).collect();

    let mut crossings = Vec::new();
    let mut first_falling = false;
    for i in 1..x.len() {
        let (a, b) = (x[i - 1], x[i]);
        if (a >= 0.0) != (b >= 0.0) {
            if crossings.is_empty() {
                first_falling = a >= 0.0;
            }
            let frac = a / (a - b);
            crossings.push(((i - 1) as f64 + frac) / trace.sample_rate);
        }
    }
    if crossings.len() < 3 {
        return Err(Error::TooFewZeroCrossings(crossings.len()));
    }
    let s = if carrier >= 0.0 { 1.0 } else { -1.0 };
    let start = if first_falling {
        s * PI / 2.0
    } else {
        -s * PI / 2.0
    };
    let residual: Vec<f64> = crossings
        .iter()
        .enumerate()
        .map(|(k, &t)| start + s * PI * k as f64 - carrier * t)
        .collect();

    let mut out = Vec::with_capacity(x.len());
    let mut k = 0;
    for i in 0..x.len() {
        let t = trace.time(i);
        while k + 1 < crossings.len() && crossings[k + 1] <= t {
            k += 1;
        }
        out.push(residual[k]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflection::{linear_grid, ComplexReflection};
    use crate::synthesis::{synthesize_beat, synthesize_track, wrap_phase, SweepConfig};
    use proptest::prelude::*;

    const CARRIER: f64 = TAU * 100e3;

    fn sweep() -> SweepConfig {
        SweepConfig {
            duration: 20e-3,
            detuning_start: TAU * 60e6,
            detuning_stop: -TAU * 60e6,
            sample_rate: 1e6,
            beat_offset: CARRIER,
            ..SweepConfig::experiment()
        }
    }

    fn tone(omega: f64, phase: f64, duration: f64) -> BeatTrace {
        let mut s = sweep();
        s.duration = duration;
        s.beat_offset = omega;
        let n = s.sample_count();
        BeatTrace {
            samples: (0..n)
                .map(|i| (omega * i as f64 / s.sample_rate + phase).cos())
                .collect(),
            sample_rate: s.sample_rate,
            sweep: s,
            detuning: vec![0.0; n],
        }
    }

    fn single_line(peak: f64) -> ComplexReflection {
        let g = TAU * 4e6;
        ComplexReflection::from_fn(&linear_grid(-TAU * 70e6, TAU * 70e6, 4001), |d| {
            Complex64::new(0.0, -peak * g) / Complex64::new(2.0 * d, g)
        })
        .unwrap()
    }

    #[test]
    fn pure_tone_gives_half_amplitude_zero_phase() {
        let res = demodulate(
            &tone(CARRIER, 0.0, 5e-3),
            &DemodConfig::for_carrier(CARRIER),
        )
        .unwrap();
        assert_eq!(res.len(), 5000 - 254);
        assert_eq!(res.first_index, 127);
        for (a, p) in res.amplitude.iter().zip(&res.phase) {
            assert!((a - 0.5).abs() < 2e-3, "{a}");
            assert!(p.abs() < 5e-3, "{p}");
        }
    }

    #[test]
    fn brick_wall_pure_tone() {
        let cfg = DemodConfig {
            filter: LowPassKind::BrickWall,
            ..DemodConfig::for_carrier(CARRIER)
        };
        // 500 whole carrier cycles: no leakage.
        let res = demodulate(&tone(CARRIER, 0.4, 5e-3), &cfg).unwrap();
        for (a, p) in res.amplitude.iter().zip(&res.phase) {
            assert!((a - 0.5).abs() < 1e-9);
            assert!((p - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_single_line() {
        let s = sweep();
        let r = single_line(0.2);
        let trace = synthesize_beat(&r, &s).unwrap();
        let track = synthesize_track(&r, &s).unwrap();
        let res = demodulate(&trace, &DemodConfig::for_carrier(CARRIER)).unwrap();
        let c = closure(&res, &track.reflection, s.reference_field * s.probe_field);
        assert!(c.samples > 15_000);
        assert!(c.amplitude_rms < 0.01, "{c:?}");
        assert!(c.phase_rms < 0.02, "{c:?}");
        // Oracle-free check of the same metric on a perfect recovery.
        let mut ideal = res.clone();
        for j in 0..ideal.len() {
            let t = track.reflection[j + ideal.first_index];
            ideal.amplitude[j] = t.norm() * s.reference_field * s.probe_field;
            ideal.phase[j] = t.arg() + TAU;
        }
        let c = closure(&ideal, &track.reflection, s.reference_field * s.probe_field);
        assert!(c.amplitude_rms < 1e-12 && c.phase_rms < 1e-12);
    }

    #[test]
    fn counting_agrees_with_lock_in() {
        let s = sweep();
        let trace = synthesize_beat(&single_line(0.2), &s).unwrap();
        let res = demodulate(&trace, &DemodConfig::for_carrier(CARRIER)).unwrap();
        let counted = phase_by_counting(&trace).unwrap();
        let n = res.len();
        let mut sum = 0.0;
        for j in n / 10..n - n / 10 {
            sum += wrap_phase(counted[j + res.first_index] - res.phase[j]).powi(2);
        }
        assert!((sum / (n - n / 5) as f64).sqrt() < 0.2);
    }

    #[test]
    fn counting_pure_tone_and_offset() {
        let trace = tone(CARRIER, 0.0, 5e-3);
        let phase = phase_by_counting(&trace).unwrap();
        assert!(phase.iter().all(|p| wrap_phase(*p).abs() < 0.05));

        // Carrier + 1 kHz over 10 ms: the residual ramps by 2π·10.
        let mut trace = tone(CARRIER + TAU * 1e3, 0.0, 10e-3);
        trace.sweep.beat_offset = CARRIER;
        let phase = phase_by_counting(&trace).unwrap();
        let ramp = phase[phase.len() - 1] - phase[0];
        assert!((ramp - TAU * 10.0).abs() < 0.1, "{ramp}");
    }

    #[test]
    fn counting_needs_oscillation() {
        let mut trace = tone(CARRIER, 0.0, 1e-3);
        trace.samples = (0..trace.len()).map(|i| i as f64).collect();
        assert!(matches!(
            phase_by_counting(&trace),
            Err(Error::TooFewZeroCrossings(1))
        ));
    }

    #[test]
    fn rejects_short_trace_and_bad_config() {
        let trace = tone(CARRIER, 0.0, 200e-6);
        assert!(matches!(
            demodulate(&trace, &DemodConfig::for_carrier(CARRIER)),
            Err(Error::TraceTooShort {
                len: 200,
                taps: 255
            })
        ));
        let trace = tone(CARRIER, 0.0, 5e-3);
        let mut cfg = DemodConfig::for_carrier(TAU * 600e3);
        assert!(matches!(
            demodulate(&trace, &cfg),
            Err(Error::Nyquist { .. })
        ));
        cfg = DemodConfig::for_carrier(CARRIER);
        cfg.filter_taps = 254;
        assert!(demodulate(&trace, &cfg).is_err());
        cfg = DemodConfig::for_carrier(CARRIER);
        cfg.lowpass_cutoff = CARRIER;
        assert!(demodulate(&trace, &cfg).is_err());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let truth: Vec<f64> = (0..200).map(|i| -0.3 * i as f64).collect();
        let wrapped: Vec<f64> = truth.iter().map(|&p| wrap_phase(p)).collect();
        let un = unwrap_phase(&wrapped);
        for (u, t) in un.iter().zip(&truth) {
            assert!((u - t).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_header() {
        let res = demodulate(
            &tone(CARRIER, 0.0, 1e-3),
            &DemodConfig::for_carrier(CARRIER),
        )
        .unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,u_c,u_s,amplitude,phase_rad\n"));
        assert_eq!(text.lines().count(), res.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quadrature_identity(samples in prop::collection::vec(-1.0..1.0f64, 300..400)) {
            let mut trace = tone(CARRIER, 0.0, 1e-3);
            trace.detuning = vec![0.0; samples.len()];
            trace.samples = samples;
            let res = demodulate(&trace, &DemodConfig::for_carrier(CARRIER)).unwrap();
            for i in 0..res.len() {
                let a2 = res.amplitude[i].powi(2);
                let q2 = res.u_c[i].powi(2) + res.u_s[i].powi(2);
                prop_assert!(res.amplitude[i] >= 0.0);
                prop_assert!((a2 - q2).abs() <= 1e-12 * q2.max(f64::MIN_POSITIVE));
            }
            for w in res.phase.windows(2) {
                prop_assert!((w[1] - w[0]).abs() <= PI);
            }
        }

        #[test]
        fn carrier_phase_equivariance(theta in -3.0..3.0f64) {
            let trace = synthesize_beat(&single_line(0.3), &SweepConfig { duration: 2e-3, ..sweep() }).unwrap();
            let base = DemodConfig::for_carrier(CARRIER);
            let a = demodulate(&trace, &base).unwrap();
            let b = demodulate(&trace, &DemodConfig { carrier_phase: theta, ..base }).unwrap();
            let (s, c) = theta.sin_cos();
            for i in 0..a.len() {
                // (u_c + i·u_s) picks up e^{iθ}.
                let rc = a.u_c[i] * c - a.u_s[i] * s;
                let rs = a.u_c[i] * s + a.u_s[i] * c;
                let scale = a.amplitude[i].max(1e-30);
                prop_assert!((b.u_c[i] - rc).abs() <= 1e-9 * scale);
                prop_assert!((b.u_s[i] - rs).abs() <= 1e-9 * scale);
                prop_assert!((b.amplitude[i] - a.amplitude[i]).abs() <= 1e-9 * scale);
                prop_assert!(wrap_phase(b.phase[i] - a.phase[i] + theta).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn amplitude_time_reversal_symmetry() {
        // Symmetric sweep through a real, even |r|.
        let s = SweepConfig {
            duration: 4e-3,
            ..sweep()
        };
        let r = ComplexReflection::from_fn(&linear_grid(-TAU * 70e6, TAU * 70e6, 2001), |d| {
            Complex64::new(0.1 / (1.0 + (d / (TAU * 10e6)).powi(2)), 0.0)
        })
        .unwrap();
        let trace = synthesize_beat(&r, &s).unwrap();
        let mut reversed = trace.clone();
        reversed.samples.reverse();
        let cfg = DemodConfig::for_carrier(CARRIER);
        let a = demodulate(&trace, &cfg).unwrap();
        let b = demodulate(&reversed, &cfg).unwrap();
        let n = a.len();
        for i in 0..n {
            assert!((a.amplitude[i] - b.amplitude[n - 1 - i]).abs() < 1e-9 * 0.1 * 54e-12);
        }
    }
}
