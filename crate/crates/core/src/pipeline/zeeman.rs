use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{detect_peak, fit_lorentzian_with_guess, linear_fit_unweighted, linear_fit_weighted, FitResult};
use crate::spectrum::Spectrum;
use crate::spinham::exchange_from_f0;
use crate::units::{Frequency, BOHR_MAGNETON_OVER_H};

use super::config::Weighting;

/// Fitted resonance at one commanded field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    /// T.
    pub b_set: f64,
    /// Hz.
    pub f_fit: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub f_sigma: f64,
    /// A.
    pub amplitude: f64,
    /// Hz.
    pub fwhm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub b_set: f64,
    pub reason: String,
}

/// Line f_r = slope·B + f0 through the per-field peaks, with
/// g = slope/(μ_B/h) and |J_ex| = h·|f0|/6.
///
/// Uncertainties are NaN with fewer than three usable fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeemanResult {
    pub g: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub g_sigma: f64,
    /// Hz.
    pub f0: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub f0_sigma: f64,
    /// |J_ex| in eV.
    pub j_ex_ev: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub j_ex_sigma_ev: f64,
    /// `weighted` or `unweighted`.
    pub weighting: String,
    pub peaks: Vec<PeakRow>,
    pub excluded: Vec<Excluded>,
    pub line: FitResult,
    pub warnings: Vec<String>,
}

/// Detects and fits the peak of one spectrum. The inner `Err` carries the
/// reason the field cannot be used; the outer one is a precondition failure.
pub fn peak_row(s: &Spectrum, k_mad: f64) -> Result<std::result::Result<PeakRow, String>> {
    let Some(guess) = detect_peak(s, k_mad)? else {
        return Ok(Err("no peak detected".into()));
    };
    Ok(match fit_lorentzian_with_guess(s, &guess) {
        Ok(fit) if fit.converged => Ok(PeakRow {
            b_set: s.meta().b_set.tesla(),
            f_fit: fit.get("center").expect("named"),
            f_sigma: fit.sigma("center").expect("named"),
            amplitude: fit.get("amplitude").expect("named"),
            fwhm: fit.get("fwhm").expect("named"),
        }),
        Ok(_) => Err("Lorentzian fit did not converge".into()),
        Err(e) => Err(format!("Lorentzian fit failed: {e}")),
    })
}

/// Fits every spectrum, drops fields without a usable peak and fits the
/// Zeeman line through the rest.
pub fn zeeman_analysis(spectra: &[Spectrum], k_mad: f64, weighting: Weighting) -> Result<ZeemanResult> {
    let mut fields: Vec<f64> = spectra.iter().map(|s| s.meta().b_set.tesla()).collect();
    fields.sort_by(f64::total_cmp);
    if fields.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Precondition("Zeeman analysis needs spectra at distinct fields".into()));
    }

    let mut peaks = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for s in spectra {
        let b = s.meta().b_set.tesla();
        match peak_row(s, k_mad)? {
            Ok(row) => peaks.push(row),
            Err(reason) => {
                warnings.push(format!("field {b} T excluded: {reason}"));
                excluded.push(Excluded { b_set: b, reason });
            }
        }
    }
    let mut z = zeeman_from_peaks(peaks, weighting)?;
    z.excluded = excluded;
    warnings.append(&mut z.warnings);
    z.warnings = warnings;
    Ok(z)
}

/// Zeeman line through already fitted peaks (field in T, f_r and σ in Hz).
pub fn zeeman_from_peaks(mut peaks: Vec<PeakRow>, weighting: Weighting) -> Result<ZeemanResult> {
    let mut warnings = Vec::new();
    peaks.sort_by(|a, b| a.b_set.total_cmp(&b.b_set));
    if peaks.windows(2).any(|w| w[0].b_set == w[1].b_set) {
        return Err(Error::Precondition("Zeeman analysis needs peaks at distinct fields".into()));
    }
    if peaks.len() < 2 {
        return Err(Error::Analysis(format!(
            "{} usable field(s); the Zeeman line needs at least 2",
            peaks.len()
        )));
    }

    let usable_sigma = peaks.iter().all(|p| p.f_sigma > 0.0 && p.f_sigma.is_finite());
    let weighted = match weighting {
        Weighting::Auto => usable_sigma,
        Weighting::Weighted => {
            if !usable_sigma {
                return Err(Error::Analysis("weighted Zeeman fit needs σ(f_r) > 0 at every field".into()));
            }
            true
        }
        Weighting::Unweighted => false,
    };
    // GHz and T keep the line fit well scaled.
    let line = if weighted {
        let pts: Vec<_> = peaks.iter().map(|p| (p.b_set, p.f_fit / 1e9, p.f_sigma / 1e9)).collect();
        linear_fit_weighted(&pts)?
    } else {
        let pts: Vec<_> = peaks.iter().map(|p| (p.b_set, p.f_fit / 1e9)).collect();
        linear_fit_unweighted(&pts)?
    };

    let ghz_per_t = BOHR_MAGNETON_OVER_H / 1e9;
    let (slope, f0_ghz) = (line.params[0], line.params[1]);
    let (mut s_slope, mut s_f0) = (line.sigmas[0], line.sigmas[1]);
    if peaks.len() < 3 {
        warnings.push("fewer than 3 fields: uncertainties not reported".into());
        s_slope = f64::NAN;
        s_f0 = f64::NAN;
    }
    let f0 = f0_ghz * 1e9;
    Ok(ZeemanResult {
        g: slope / ghz_per_t,
        g_sigma: s_slope / ghz_per_t,
        f0,
        f0_sigma: s_f0 * 1e9,
        j_ex_ev: exchange_from_f0(Frequency(f0)).ev(),
        j_ex_sigma_ev: exchange_from_f0(Frequency(s_f0 * 1e9)).ev(),
        weighting: if weighted { "weighted" } else { "unweighted" }.into(),
        peaks,
        excluded: Vec::new(),
        line,
        warnings,
    })
}
