use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Allowed excess of `|r|` over unity before a spectrum is rejected.
const UNITY_SLACK: f64 = 1e-12;

/// Complex amplitude reflection coefficient sampled on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexReflection {
    detunings: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexReflection {
    pub fn new(detunings: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        check_grid(&detunings)?;
        if detunings.len() != values.len() {
            return Err(Error::LengthMismatch(detunings.len(), values.len()));
        }
        for (&d, v) in detunings.iter().zip(&values) {
            let m = v.norm();
            if !(m <= 1.0 + UNITY_SLACK) {
                return Err(Error::ReflectionExceedsUnity {
                    detuning: d,
                    magnitude: m,
                });
            }
        }
        Ok(Self { detunings, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid.to_vec(), grid.iter().map(|&d| f(d)).collect())
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_detuning(&self) -> f64 {
        self.detunings[0]
    }

    pub fn max_detuning(&self) -> f64 {
        self.detunings[self.detunings.len() - 1]
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.min_detuning() <= lo && hi <= self.max_detuning()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation of the complex spectrum; `None` outside the grid.
    pub fn interpolate(&self, delta: f64) -> Option<Complex64> {
        let d = &self.detunings;
        if !(delta >= d[0] && delta <= d[d.len() - 1]) {
            return None;
        }
        // First index with detuning > delta.
        let hi = d.partition_point(|&x| x <= delta);
        if hi == 0 {
            return Some(self.values[0]);
        }
        if hi == d.len() {
            return Some(self.values[d.len() - 1]);
        }
        let lo = hi - 1;
        let w = (delta - d[lo]) / (d[hi] - d[lo]);
        Some(self.values[lo] * (1.0 - w) + self.values[hi] * w)
    }

    /// Writes `detuning_rad_s,re_r,im_r`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["detuning_rad_s", "re_r", "im_r"])?;
        for (d, v) in self.detunings.iter().zip(&self.values) {
            w.write_record([d.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `detuning_rad_s,abs_r,arg_r_rad`.
    pub fn write_polar_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["detuning_rad_s", "abs_r", "arg_r_rad"])?;
        for (d, v) in self.detunings.iter().zip(&self.values) {
            w.write_record([d.to_string(), v.norm().to_string(), v.arg().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `detuning_rad_s,re_r,im_r` format written by [`Self::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["detuning_rad_s", "re_r", "im_r"] {
            return Err(crate::error::invalid(
                "csv header",
                format!(
                    "expected detuning_rad_s,re_r,im_r, found {}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut detunings = Vec::new();
        let mut values = Vec::new();
        for record in r.records() {
            let record = record?;
            let field = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        crate::error::invalid("csv record", format!("bad number in column {i}"))
                    })
            };
            detunings.push(field(0)?);
            values.push(Complex64::new(field(1)?, field(2)?));
        }
        Self::new(detunings, values)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for (i, pair) in grid.windows(2).enumerate() {
        if !(pair[1] > pair[0]) {
            return Err(Error::GridNotIncreasing(i + 1));
        }
    }
    if grid.iter().any(|d| !d.is_finite()) {
        return Err(crate::error::invalid("detunings", "must be finite"));
    }
    Ok(())
}

/// `points` equally spaced detunings over `[lo, hi]`, both ends included.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        n => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
                .collect()
        }
    }
}
