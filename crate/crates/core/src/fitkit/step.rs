use crate::error::{Error, Result};
use crate::rfchain::{broadened_didv, IVCurve};

use super::lm::{levenberg_marquardt, FnModel, LmOptions};
use super::FitResult;

/// 10–90 % span of a logistic step in units of its width: 2·ln 9.
const LOGISTIC_SPAN: f64 = 4.394_449_154_672_439;
/// 10–90 % span of an arcsine-broadened hard step in units of V_RF: 2·cos(π/10).
const ARCSINE_SPAN: f64 = 1.902_113_032_590_307;

/// Starting values for the RF-off step fit, bias in V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGuess {
    pub ohmic: f64,
    pub height: f64,
    pub onset: f64,
    pub width: f64,
}

fn end_means(y: &[f64]) -> (f64, f64) {
    let m = (y.len() / 10).max(1);
    let lo = y[..m].iter().sum::<f64>() / m as f64;
    let hi = y[y.len() - m..].iter().sum::<f64>() / m as f64;
    (lo, hi)
}

/// Bias at which `y` first crosses `level` going up, linearly interpolated.
fn crossing(v: &[f64], y: &[f64], level: f64) -> Option<f64> {
    (1..v.len()).find(|&i| y[i - 1] < level && y[i] >= level).map(|i| {
        let t = (level - y[i - 1]) / (y[i] - y[i - 1]);
        v[i - 1] + t * (v[i] - v[i - 1])
    })
}

/// 10–90 % rise span of an upward step trace.
fn rise_span(v: &[f64], y: &[f64]) -> Option<f64> {
    let (lo, hi) = end_means(y);
    let g = hi - lo;
    Some(crossing(v, y, lo + 0.9 * g)? - crossing(v, y, lo + 0.1 * g)?)
}

fn step_guess(v: &[f64], y: &[f64]) -> Result<StepGuess> {
    let (lo, hi) = end_means(y);
    let height = hi - lo;
    // Sample-to-sample scatter, robust against the step itself.
    let mut diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let noise = 1.4826 * diffs[diffs.len() / 2] / std::f64::consts::SQRT_2;
    if !(height > 0.0) || height <= 10.0 * noise {
        return Err(Error::Analysis("no conductance step found in the RF-off trace".into()));
    }
    let onset = crossing(v, y, lo + 0.5 * height)
        .ok_or_else(|| Error::Analysis("RF-off trace never crosses its half-step level".into()))?;
    let dv = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    let width = rise_span(v, y).map_or(dv, |s| (s / LOGISTIC_SPAN).max(0.5 * dv));
    Ok(StepGuess { ohmic: lo, height, onset, width })
}

fn check_traces(v: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    if v.len() < 8 || a.len() != v.len() || b.len() != v.len() {
        return Err(Error::Precondition("bias grid and dI/dV traces must match (≥ 8 points)".into()));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("bias grid must increase strictly".into()));
    }
    if v.iter().chain(a).chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite bias or dI/dV sample".into()));
    }
    Ok(())
}

/// Fits c + G·logistic((V − V0)/w) to the RF-off trace.
///
/// Returns parameters `ohmic`, `height`, `v0` (V) and `width` (V).
pub fn fit_step_off(v: &[f64], didv_off: &[f64]) -> Result<FitResult> {
    check_traces(v, didv_off, didv_off)?;
    let g = step_guess(v, didv_off)?;
    // Bias in mV and dI/dV in units of the step height keep the fit well scaled.
    let x: Vec<f64> = v.iter().map(|x| x * 1e3).collect();
    let y: Vec<f64> = didv_off.iter().map(|y| y / g.height).collect();
    let model = FnModel::new(&["ohmic", "height", "v0", "width"], |x, p| {
        let iv = IVCurve { ohmic: p[0], step: p[1], onset: p[2], width: p[3].abs() };
        iv.conductance(x)
    });
    let p0 = [g.ohmic / g.height, 1.0, g.onset * 1e3, g.width * 1e3];
    let fit = levenberg_marquardt(&model, &x, &y, &vec![1.0; x.len()], &p0, &LmOptions::default())?;
    let mut fit = fit.rescaled(&[g.height, g.height, 1e-3, 1e-3]);
    fit.params[3] = fit.params[3].abs();
    fit.chi2 *= g.height * g.height;
    Ok(fit)
}

/// Two-stage arcsine step fit: the RF-off trace fixes the step, then V_RF
/// alone is fitted to the RF-on trace through the broadened conductance.
///
/// Parameters: `v_rf` (V, ≥ 0), `v0`, `height`, `width`, `ohmic`. The
/// covariance is block diagonal between the two stages. The result is
/// flagged unconverged if either stage was.
pub fn fit_arcsine_step(v: &[f64], didv_on: &[f64], didv_off: &[f64]) -> Result<FitResult> {
    check_traces(v, didv_on, didv_off)?;
    let off = fit_step_off(v, didv_off)?;
    let height = off.get("height").expect("named");
    let iv_mv = IVCurve {
        ohmic: off.get("ohmic").expect("named") / height,
        step: 1.0,
        onset: off.get("v0").expect("named") * 1e3,
        width: off.get("width").expect("named") * 1e3,
    };

    let x: Vec<f64> = v.iter().map(|x| x * 1e3).collect();
    let y: Vec<f64> = didv_on.iter().map(|y| y / height).collect();
    let span_off = iv_mv.width * LOGISTIC_SPAN;
    let span_on = rise_span(&x, &y).unwrap_or(span_off);
    let guess = ((span_on * span_on - span_off * span_off).max(0.0).sqrt() / ARCSINE_SPAN)
        .max(0.5 * iv_mv.width);

    // NaN on quadrature failure makes the LM step be rejected.
    let model = FnModel::new(&["v_rf"], |x, p| broadened_didv(&iv_mv, x, p[0].abs()).unwrap_or(f64::NAN));
    let on = levenberg_marquardt(&model, &x, &y, &vec![1.0; x.len()], &[guess], &LmOptions::default())?;

    let names = ["v_rf", "v0", "height", "width", "ohmic"];
    let idx_off = ["", "v0", "height", "width", "ohmic"].map(|n| off.index(n));
    let mut cov = vec![vec![0.0; 5]; 5];
    cov[0][0] = on.covariance[0][0] * 1e-6;
    for i in 1..5 {
        for j in 1..5 {
            cov[i][j] = off.covariance[idx_off[i].unwrap()][idx_off[j].unwrap()];
        }
    }
    let params = vec![
        on.params[0].abs() * 1e-3,
        off.get("v0").unwrap(),
        height,
        off.get("width").unwrap(),
        off.get("ohmic").unwrap(),
    ];
    let sigmas = (0..5).map(|i| cov[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params,
        sigmas,
        covariance: cov,
        chi2: on.chi2 * height * height,
        dof: on.dof,
        converged: on.converged && off.converged,
        n_iter: on.n_iter + off.n_iter,
        chi2_history: on.chi2_history.iter().map(|c| c * height * height).collect(),
    })
}
