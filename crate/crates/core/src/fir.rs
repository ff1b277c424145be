//! Linear-phase FIR low-pass filters.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Hamming-windowed sinc low-pass with unity DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPass {
    taps: Vec<f64>,
}

impl LowPass {
    /// `cutoff` in cycles per sample, strictly inside (0, 0.5). `taps` odd, at least 3.
    pub fn windowed_sinc(taps: usize, cutoff: f64) -> Result<Self> {
        if taps < 3 || taps % 2 == 0 {
            return Err(invalid(
                "filter_taps",
                format!("must be odd and >= 3, got {taps}"),
            ));
        }
        if !(cutoff > 0.0 && cutoff < 0.5) {
            return Err(invalid(
                "lowpass_cutoff",
                "must lie strictly between 0 and the Nyquist frequency",
            ));
        }
        let mid = (taps / 2) as f64;
        let last = (taps - 1) as f64;
        let mut h: Vec<f64> = (0..taps)
            .map(|i| {
                let x = i as f64 - mid;
                let sinc = if x == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * x).sin() / (PI * x)
                };
                let window = 0.54 - 0.46 * (2.0 * PI * i as f64 / last).cos();
                sinc * window
            })
            .collect();
        // Mirror so the taps are exactly symmetric (linear phase).
        for i in 0..taps / 2 {
            h[taps - 1 - i] = h[i];
        }
        let gain: f64 = h.iter().sum();
        h.iter_mut().for_each(|c| *c /= gain);
        Ok(Self { taps: h })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Group delay in samples, `(taps − 1)/2`.
    pub fn delay(&self) -> usize {
        self.taps.len() / 2
    }

    /// Magnitude of the frequency response at `f` cycles per sample.
    pub fn response(&self, f: f64) -> f64 {
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (i, &h)| {
                let w = 2.0 * PI * f * i as f64;
                (re + h * w.cos(), im - h * w.sin())
            });
        re.hypot(im)
    }

    /// Delay-compensated output for every input index whose full filter
    /// support lies inside `input`. Element `j` aligns with `input[j + delay]`.
    pub fn filter_valid(&self, input: &[f64]) -> Vec<f64> {
        let mut stream = self.stream();
        input.iter().filter_map(|&x| stream.push(x)).collect()
    }

    pub fn stream(&self) -> FirStream<'_> {
        FirStream {
            taps: &self.taps,
            ring: vec![0.0; self.taps.len()],
            head: 0,
            filled: 0,
        }
    }
}

/// Streaming evaluation: each output depends only on the last `taps` inputs.
#[derive(Debug, Clone)]
pub struct FirStream<'a> {
    taps: &'a [f64],
    ring: Vec<f64>,
    head: usize,
    filled: usize,
}

impl FirStream<'_> {
    /// Pushes one input; returns an output once the window is full.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        let n = self.ring.len();
        self.ring[self.head] = x;
        self.head = (self.head + 1) % n;
        self.filled = (self.filled + 1).min(n);
        if self.filled < n {
            return None;
        }
        // ring[head] is now the oldest sample.
        let (newer, older) = self.ring.split_at(self.head);
        let acc = older
            .iter()
            .chain(newer)
            .zip(self.taps.iter().rev())
            .map(|(x, h)| x * h)
            .sum();
        Some(acc)
    }
}
