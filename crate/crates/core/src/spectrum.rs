//! Sampled ΔI(f) traces and their acquisition metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Current, Frequency, MagneticField, Voltage};

/// Acquisition settings recorded alongside every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    /// Commanded (set-point) field; the analysis only ever sees this one.
    pub b_set: MagneticField,
    pub position: String,
    pub v_dc: Voltage,
    pub i_set: Current,
    pub v_rf: Voltage,
    pub seed: u64,
}

impl Default for SpectrumMeta {
    fn default() -> Self {
        SpectrumMeta {
            b_set: MagneticField(0.0),
            position: String::from("unspecified"),
            v_dc: Voltage(-0.100),
            i_set: Current(10e-12),
            v_rf: Voltage(0.010),
            seed: 0,
        }
    }
}

/// Uniform frequency grid including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: Frequency,
    pub stop: Frequency,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(start: Frequency, stop: Frequency, points: usize) -> Result<Self> {
        let grid = FrequencyGrid { start, stop, points };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid from `start` to `stop` with the given spacing; `stop - start`
    /// must be a whole number of steps (to 1e-6 of a step).
    pub fn with_step(start: Frequency, stop: Frequency, step: Frequency) -> Result<Self> {
        if !(step.0 > 0.0) {
            return Err(Error::Construction(format!("grid step {} Hz must be positive", step.0)));
        }
        let intervals = (stop.0 - start.0) / step.0;
        let n = intervals.round();
        if (intervals - n).abs() > 1e-6 {
            return Err(Error::Construction(format!(
                "range {}..{} Hz is not a multiple of the step {} Hz",
                start.0, stop.0, step.0
            )));
        }
        Self::new(start, stop, n as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Construction(format!(
                "a spectrum needs at least 2 points, got {}",
                self.points
            )));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Construction("non-finite frequency range".into()));
        }
        if self.start.0 < 0.0 {
            return Err(Error::Construction(format!(
                "negative start frequency {} Hz",
                self.start.0
            )));
        }
        if !(self.stop.0 > self.start.0) {
            return Err(Error::Construction(format!(
                "frequency range {}..{} Hz is not increasing",
                self.start.0, self.stop.0
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> Frequency {
        Frequency((self.stop.0 - self.start.0) / (self.points - 1) as f64)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.points;
        let span = self.stop.0 - self.start.0;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.stop.0
                } else {
                    self.start.0 + span * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// A ΔI(f) trace. Immutable once built; transformations return new values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
    meta: SpectrumMeta,
}

impl Spectrum {
    /// Frequencies in Hz, ΔI in A.
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if freqs.len() < 2 {
            return Err(Error::Construction(format!(
                "a spectrum needs at least 2 points, got {}",
                freqs.len()
            )));
        }
        if freqs.len() != values.len() {
            return Err(Error::Construction(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Construction("frequencies must be finite and non-negative".into()));
        }
        if let Some(w) = freqs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Construction(format!(
                "frequencies not strictly increasing at index {}",
                w + 1
            )));
        }
        Ok(Spectrum { freqs, values, meta })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Mean grid spacing in Hz.
    pub fn step(&self) -> f64 {
        (self.freqs[self.len() - 1] - self.freqs[0]) / (self.len() - 1) as f64
    }

    /// New spectrum on the same grid with the values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Spectrum::new(self.freqs.clone(), values, self.meta.clone())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Spectrum {
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Zero-valued spectrum on a uniform grid spanning `range` inclusively.
pub fn make_spectrum(
    range: (Frequency, Frequency),
    n_points: usize,
    meta: SpectrumMeta,
) -> Result<Spectrum> {
    let grid = FrequencyGrid::new(range.0, range.1, n_points)?;
    let freqs = grid.frequencies();
    let values = vec![0.0; freqs.len()];
    Spectrum::new(freqs, values, meta)
}
