use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fitkit::{detect_peak, fit_lorentzian_with_guess};
use crate::spectrometer::{radical_density, synthesize_spectrum, Instrument, NoiseModel, Position};
use crate::spectrum::FrequencyGrid;
use crate::units::MagneticField;

/// Outcome at one tip position. Fit fields are `None` when no peak was
/// detected or the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialPoint {
    pub label: String,
    pub x_nm: f64,
    pub y_nm: f64,
    /// Model radical density at the position (ground truth, 1 on a lobe).
    pub density: f64,
    pub detected: bool,
    /// A.
    pub amplitude: Option<f64>,
    pub amplitude_sigma: Option<f64>,
    /// Hz.
    pub f_r: Option<f64>,
    pub f_r_sigma: Option<f64>,
}

/// Synthesizes, detects and fits at every position. Positions are processed
/// in parallel with per-position seeds; the output keeps the input order.
pub fn spatial_scan(
    positions: &[Position],
    b_set: MagneticField,
    grid: &FrequencyGrid,
    inst: &Instrument,
    noise: &NoiseModel,
    k_mad: f64,
) -> Result<Vec<SpatialPoint>> {
    positions
        .par_iter()
        .map(|pos| {
            let s = synthesize_spectrum(inst, pos, b_set, grid, noise)?;
            let mut point = SpatialPoint {
                label: pos.label.clone(),
                x_nm: pos.x_nm,
                y_nm: pos.y_nm,
                density: radical_density(pos, &inst.molecule),
                detected: false,
                amplitude: None,
                amplitude_sigma: None,
                f_r: None,
                f_r_sigma: None,
            };
            if let Some(guess) = detect_peak(&s, k_mad)? {
                point.detected = true;
                if let Ok(fit) = fit_lorentzian_with_guess(&s, &guess) {
                    let finite = |x: Option<f64>| x.filter(|v| v.is_finite());
                    point.amplitude = finite(fit.get("amplitude"));
                    point.amplitude_sigma = finite(fit.sigma("amplitude"));
                    point.f_r = finite(fit.get("center"));
                    point.f_r_sigma = finite(fit.sigma("center"));
                }
            }
            Ok(point)
        })
        .collect()
}
