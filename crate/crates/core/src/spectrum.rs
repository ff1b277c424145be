//! Windowed FFT magnitude spectra of beat traces.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::synthesis::BeatTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
    Hamming,
    Blackman,
}

impl Window {
    pub const ALL: [Window; 4] = [
        Window::Rectangular,
        Window::Hann,
        Window::Hamming,
        Window::Blackman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
            Window::Blackman => "blackman",
        }
    }

    /// Symmetric window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n < 2 {
            return vec![1.0; n];
        }
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / last;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Window::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::UnknownWindow(s.to_string()))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One-sided magnitude spectrum, bins `0..=n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Hz.
    pub frequencies: Vec<f64>,
    /// A tone `a·cos(2πft)` on a bin centre reads `a/2`.
    pub magnitude: Vec<f64>,
    pub window_name: String,
}

impl SpectrumEstimate {
    pub fn bin_width(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Frequency of the largest bin.
    pub fn peak_frequency(&self) -> f64 {
        let (k, _) =
            self.magnitude
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &m)| {
                    if m > best.1 {
                        (k, m)
                    } else {
                        best
                    }
                });
        self.frequencies[k]
    }

    /// Writes `freq_hz,magnitude`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["freq_hz", "magnitude"])?;
        for (f, m) in self.frequencies.iter().zip(&self.magnitude) {
            w.write_record([f.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn spectrum(trace: &BeatTrace, window_name: &str) -> Result<SpectrumEstimate> {
    spectrum_of(&trace.samples, trace.sample_rate, window_name.parse()?)
}

pub fn spectrum_of(samples: &[f64], sample_rate: f64, window: Window) -> Result<SpectrumEstimate> {
    if samples.is_empty() {
        return Err(crate::error::invalid("trace", "must not be empty"));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let w = window.coefficients(n);
    let gain: f64 = w.iter().sum();
    let mut buf: Vec<Complex64> = samples
        .iter()
        .zip(&w)
        .map(|(x, c)| Complex64::new((x - mean) * c, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    Ok(SpectrumEstimate {
        frequencies: (0..bins)
            .map(|k| k as f64 * sample_rate / n as f64)
            .collect(),
        magnitude: buf[..bins].iter().map(|v| v.norm() / gain).collect(),
        window_name: window.name().to_string(),
    })
}
