use crate::error::{Error, Result};
use crate::linalg::{invert_spd, solve_spd, Matrix};

use super::FitResult;

/// A model y = f(x; p).
pub trait Model {
    fn param_names(&self) -> Vec<String>;

    fn eval(&self, x: f64, p: &[f64]) -> f64;

    fn eval_all(&self, xs: &[f64], p: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x, p)).collect()
    }
}

/// Wraps a closure as a [`Model`].
pub struct FnModel<F> {
    names: Vec<String>,
    f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> FnModel<F> {
    pub fn new(names: &[&str], f: F) -> Self {
        FnModel { names: names.iter().map(|s| s.to_string()).collect(), f }
    }
}

impl<F: Fn(f64, &[f64]) -> f64> Model for FnModel<F> {
    fn param_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        (self.f)(x, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub initial_lambda: f64,
    /// Damping multiplier on a rejected step (and divisor on an accepted one).
    pub lambda_factor: f64,
    pub max_lambda: f64,
    pub max_iter: usize,
    /// Stop when an accepted step changes χ² by less than this fraction.
    pub rel_chi2_tol: f64,
    pub fd_rel_step: f64,
    pub fd_abs_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            initial_lambda: 1e-3,
            lambda_factor: 10.0,
            max_lambda: 1e12,
            max_iter: 200,
            rel_chi2_tol: 1e-10,
            fd_rel_step: 1e-6,
            fd_abs_step: 1e-12,
        }
    }
}

/// ∂f(x_i)/∂p_j by central differences; rows are data points.
pub fn numeric_jacobian(model: &dyn Model, xs: &[f64], p: &[f64], opts: &LmOptions) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; p.len()]; xs.len()];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = (opts.fd_rel_step * p[j].abs()).max(opts.fd_abs_step);
        q[j] = p[j] + h;
        let up = model.eval_all(xs, &q);
        q[j] = p[j] - h;
        let down = model.eval_all(xs, &q);
        q[j] = p[j];
        for i in 0..xs.len() {
            jac[i][j] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

fn weighted_residuals(model: &dyn Model, x: &[f64], y: &[f64], sigma: &[f64], p: &[f64]) -> Vec<f64> {
    model
        .eval_all(x, p)
        .iter()
        .zip(y.iter().zip(sigma))
        .map(|(f, (y, s))| (y - f) / s)
        .collect()
}

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// JᵀWJ and JᵀW·r for weighted residuals r.
fn normal_equations(jac: &[Vec<f64>], sigma: &[f64], r: &[f64], n_par: usize) -> (Matrix, Vec<f64>) {
    let mut a = Matrix::zeros(n_par);
    let mut g = vec![0.0; n_par];
    for (i, row) in jac.iter().enumerate() {
        let w = 1.0 / sigma[i];
        for j in 0..n_par {
            let jj = row[j] * w;
            g[j] += jj * r[i];
            for k in 0..=j {
                a[(j, k)] += jj * row[k] * w;
            }
        }
    }
    for j in 0..n_par {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
    }
    (a, g)
}

/// Minimizes Σ((y − f(x; p))/σ)² from `p0`.
///
/// Marquardt damping on the diagonal of JᵀWJ, λ ×10 on a rejected step and
/// ÷10 on an accepted one. Stops when an accepted step changes χ² by less
/// than `rel_chi2_tol` (converged), when λ exceeds `max_lambda` (no descent
/// left at working precision, converged) or after `max_iter` Jacobians (not
/// converged). A singular normal matrix is reported as non-convergence.
pub fn levenberg_marquardt(
    model: &dyn Model,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    p0: &[f64],
    opts: &LmOptions,
) -> Result<FitResult> {
    let n = x.len();
    let n_par = p0.len();
    let names = model.param_names();
    if names.len() != n_par {
        return Err(Error::Precondition(format!(
            "model has {} parameters but {} initial values were given",
            names.len(),
            n_par
        )));
    }
    if y.len() != n || sigma.len() != n {
        return Err(Error::Precondition("x, y and sigma lengths differ".into()));
    }
    if n <= n_par {
        return Err(Error::Precondition(format!(
            "{n} data points cannot constrain {n_par} parameters"
        )));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Precondition("every σ_y must be positive and finite".into()));
    }
    if x.iter().chain(y).chain(p0).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite data or initial parameters".into()));
    }

    let mut p = p0.to_vec();
    let mut r = weighted_residuals(model, x, y, sigma, &p);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("model evaluates to NaN at the initial parameters".into()));
    }
    let mut chi2 = chi2_of(&r);
    let mut history = vec![chi2];
    let mut lambda = opts.initial_lambda;
    let mut n_iter = 0;
    let mut converged = false;
    let mut singular = false;

    'outer: while n_iter < opts.max_iter {
        if chi2 == 0.0 {
            converged = true;
            break;
        }
        let jac = numeric_jacobian(model, x, &p, opts);
        let (a, g) = normal_equations(&jac, sigma, &r, n_par);
        if (0..n_par).any(|j| !(a[(j, j)] > 0.0)) {
            singular = true;
            break;
        }
        n_iter += 1;
        loop {
            let mut damped = a.clone();
            for j in 0..n_par {
                damped[(j, j)] += lambda * a[(j, j)];
            }
            if let Some(step) = solve_spd(&damped, &g) {
                let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
                let r_trial = weighted_residuals(model, x, y, sigma, &trial);
                let chi2_trial = chi2_of(&r_trial);
                if chi2_trial.is_finite() && chi2_trial < chi2 {
                    let rel = (chi2 - chi2_trial) / chi2;
                    p = trial;
                    r = r_trial;
                    chi2 = chi2_trial;
                    history.push(chi2);
                    lambda /= opts.lambda_factor;
                    if rel < opts.rel_chi2_tol {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            lambda *= opts.lambda_factor;
            if lambda > opts.max_lambda {
                converged = true;
                break 'outer;
            }
        }
    }

    let dof = n - n_par;
    let jac = numeric_jacobian(model, x, &p, opts);
    let (a, _) = normal_equations(&jac, sigma, &r, n_par);
    let inverse = if singular { None } else { invert_spd(&a) };
    let (covariance, sigmas) = match inverse {
        Some(inv) => {
            let s = chi2 / dof as f64;
            let cov: Vec<Vec<f64>> =
                (0..n_par).map(|i| (0..n_par).map(|j| inv[(i, j)] * s).collect()).collect();
            let sig = (0..n_par).map(|i| cov[i][i].max(0.0).sqrt()).collect();
            (cov, sig)
        }
        None => {
            converged = false;
            (vec![vec![f64::NAN; n_par]; n_par], vec![f64::NAN; n_par])
        }
    };

    Ok(FitResult {
        names,
        params: p,
        sigmas,
        covariance,
        chi2,
        dof,
        converged,
        n_iter,
        chi2_history: history,
    })
}
