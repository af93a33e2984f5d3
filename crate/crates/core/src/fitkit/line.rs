use crate::error::{Error, Result};

use super::FitResult;

fn names() -> Vec<String> {
    vec!["slope".into(), "intercept".into()]
}

/// Closed-form weighted straight line y = slope·x + intercept through
/// (x, y, σ_y). The covariance is the absolute one, (XᵀWX)⁻¹, so scaling
/// every σ by c scales the parameter σ by c.
pub fn linear_fit_weighted(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::Precondition(format!("a line needs ≥ 2 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y, s)| !x.is_finite() || !y.is_finite() || !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Precondition("points must be finite with σ > 0".into()));
    }
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let sw: f64 = w.iter().sum();
    let xm = points.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let ym = points.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.0 - xm) * (p.0 - xm)).sum();
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.0 - xm) * (p.1 - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Analysis("all x values identical; the line is undetermined".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let var_s = 1.0 / sxx;
    let var_i = 1.0 / sw + xm * xm / sxx;
    let cov = -xm / sxx;
    Ok(FitResult {
        names: names(),
        params: vec![slope, intercept],
        sigmas: vec![var_s.sqrt(), var_i.sqrt()],
        covariance: vec![vec![var_s, cov], vec![cov, var_i]],
        chi2,
        dof: points.len() - 2,
        converged: true,
        n_iter: 0,
        chi2_history: vec![chi2],
    })
}

/// Ordinary least squares; uncertainties from the residual scatter
/// (χ²/dof-scaled), NaN when there are only two points.
pub fn linear_fit_unweighted(points: &[(f64, f64)]) -> Result<FitResult> {
    let with_unit: Vec<(f64, f64, f64)> = points.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    let mut fit = linear_fit_weighted(&with_unit)?;
    let s = if fit.dof == 0 { f64::NAN } else { fit.chi2 / fit.dof as f64 };
    for row in fit.covariance.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    fit.sigmas = vec![fit.covariance[0][0].sqrt(), fit.covariance[1][1].sqrt()];
    Ok(fit)
}
