use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

use super::lm::{levenberg_marquardt, LmOptions, Model};
use super::FitResult;

/// Robust normal-consistent scale for the median absolute deviation.
const MAD_TO_SIGMA: f64 = 1.4826;

const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeakGuess {
    /// Hz.
    pub f_guess: f64,
    /// A above the median baseline.
    pub amplitude_guess: f64,
    /// FWHM in Hz.
    pub width_guess: f64,
    /// Amplitude over the robust noise estimate.
    pub snr: f64,
    /// Median baseline, A.
    pub baseline: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Peak if the largest sample exceeds median + k_mad·1.4826·MAD.
///
/// A noiseless flat trace has zero MAD and therefore no peak; a noiseless
/// peak on a flat baseline is detected with infinite SNR.
pub fn detect_peak(s: &Spectrum, k_mad: f64) -> Result<Option<PeakGuess>> {
    if s.len() < MIN_POINTS {
        return Err(Error::Precondition(format!(
            "peak detection needs ≥ {MIN_POINTS} points, got {}",
            s.len()
        )));
    }
    let y = s.values();
    let f = s.freqs();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("spectrum contains non-finite values".into()));
    }
    let base = median(y);
    let dev: Vec<f64> = y.iter().map(|v| (v - base).abs()).collect();
    let noise = MAD_TO_SIGMA * median(&dev);
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let amp = ymax - base;
    if !(amp > k_mad * noise) || amp <= 0.0 {
        return Ok(None);
    }

    let half = base + 0.5 * amp;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if y[i] < half {
                let t = (y[prev] - half) / (y[prev] - y[i]);
                return Some(f[prev] + t * (f[i] - f[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..y.len()));
    // Centroid of the contiguous run above half maximum; steadier under
    // noise than the argmax sample.
    let mut lo = imax;
    while lo > 0 && y[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi + 1] >= half {
        hi += 1;
    }
    let (mut wsum, mut fsum) = (0.0, 0.0);
    for i in lo..=hi {
        let w = y[i] - half;
        wsum += w;
        fsum += w * f[i];
    }
    let center = if wsum > 0.0 { fsum / wsum } else { f[imax] };
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (f[imax] - l),
        (None, Some(r)) => 2.0 * (r - f[imax]),
        (None, None) => f[f.len() - 1] - f[0],
    }
    .max(s.step());

    Ok(Some(PeakGuess {
        f_guess: center,
        amplitude_guess: amp,
        width_guess: width,
        snr: if noise > 0.0 { amp / noise } else { f64::INFINITY },
        baseline: base,
    }))
}

/// b + A·(Γ²/4)/((x − c)² + Γ²/4) with parameters (A, c, Γ, b). Γ enters
/// squared, so its sign is immaterial.
pub struct LorentzianModel;

impl LorentzianModel {
    /// Analytic ∂f/∂(A, c, Γ, b).
    pub fn gradient(x: f64, p: &[f64]) -> [f64; 4] {
        let (a, c, g) = (p[0], p[1], p[2]);
        let q = 0.25 * g * g;
        let d = x - c;
        let den = d * d + q;
        let shape = q / den;
        [
            shape,
            a * q * 2.0 * d / (den * den),
            a * 0.5 * g * d * d / (den * den),
            1.0,
        ]
    }
}

impl Model for LorentzianModel {
    fn param_names(&self) -> Vec<String> {
        ["amplitude", "center", "fwhm", "baseline"].iter().map(|s| s.to_string()).collect()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let q = 0.25 * p[2] * p[2];
        let d = x - p[1];
        p[3] + p[0] * q / (d * d + q)
    }
}

/// Abscissa origin of the Lorentzian fit in GHz: one window width below the
/// window. The fitted center is then O(window) instead of O(frequency), so
/// the relative finite-difference step on it stays well below the linewidth,
/// and it is never near zero, where the step would hit its absolute floor.
pub fn fit_origin_ghz(freqs: &[f64]) -> f64 {
    let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min) / 1e9;
    let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / 1e9;
    lo - (hi - lo)
}

/// Detects the peak and fits a Lorentzian seeded from it.
pub fn fit_lorentzian(s: &Spectrum) -> Result<FitResult> {
    match detect_peak(s, 5.0)? {
        Some(g) => fit_lorentzian_with_guess(s, &g),
        None => Err(Error::Analysis("no peak detected and no initial guess supplied".into())),
    }
}

/// Lorentzian fit from an explicit starting point. Returns parameters
/// `amplitude` (A), `center` (Hz), `fwhm` (Hz, ≥ 0) and `baseline` (A).
///
/// Internally frequencies are in GHz and ΔI is divided by its largest
/// excursion from the median, so the fit is independent of the overall
/// current scale. The abscissa is measured from [`fit_origin_ghz`].
pub fn fit_lorentzian_with_guess(s: &Spectrum, guess: &PeakGuess) -> Result<FitResult> {
    let y = s.values();
    let base = median(y);
    let mut scale = y.iter().map(|v| (v - base).abs()).fold(0.0, f64::max);
    if !(scale > 0.0 && scale.is_finite()) {
        scale = 1.0;
    }
    let origin = fit_origin_ghz(s.freqs());
    let x: Vec<f64> = s.freqs().iter().map(|f| f / 1e9 - origin).collect();
    let yn: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let sigma = vec![1.0; x.len()];
    let p0 = [
        guess.amplitude_guess / scale,
        guess.f_guess / 1e9 - origin,
        guess.width_guess / 1e9,
        guess.baseline / scale,
    ];
    let fit = levenberg_marquardt(&LorentzianModel, &x, &yn, &sigma, &p0, &LmOptions::default())?;
    let mut out = fit.rescaled(&[scale, 1e9, 1e9, scale]);
    out.params[1] += origin * 1e9;
    if out.params[2] < 0.0 {
        out.params[2] = -out.params[2];
        for j in 0..4 {
            if j != 2 {
                out.covariance[2][j] = -out.covariance[2][j];
                out.covariance[j][2] = -out.covariance[j][2];
            }
        }
    }
    out.chi2 *= scale * scale;
    out.chi2_history.iter_mut().for_each(|c| *c *= scale * scale);
    Ok(out)
}
