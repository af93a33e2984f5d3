//! Least-squares machinery and the model fits the analyses need: a
//! Lorentzian peak, the arcsine-broadened surface-state step and a
//! weighted straight line.

mod line;
mod lm;
mod peak;
mod step;

pub use line::{linear_fit_unweighted, linear_fit_weighted};
pub use lm::{levenberg_marquardt, numeric_jacobian, FnModel, LmOptions, Model};
pub use peak::{detect_peak, fit_lorentzian, fit_origin_ghz, fit_lorentzian_with_guess, LorentzianModel, PeakGuess};
pub use step::{fit_arcsine_step, fit_step_off, StepGuess};

use serde::{Deserialize, Serialize};

/// Outcome of any model fit.
///
/// `covariance` is the χ²/dof-scaled inverse normal matrix for nonlinear
/// fits and `sigmas` its root diagonal. A fit flagged `converged = false`
/// because the normal matrix was singular carries NaN uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub params: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub sigmas: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::matrix")]
    pub covariance: Vec<Vec<f64>>,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub n_iter: usize,
    /// χ² after every accepted step, starting with the initial value.
    #[serde(skip)]
    pub chi2_history: Vec<f64>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.sigmas[i])
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }

    /// Rescales parameter i by `factors[i]` (value, σ and covariance).
    pub(crate) fn rescaled(mut self, factors: &[f64]) -> Self {
        for (i, f) in factors.iter().enumerate() {
            self.params[i] *= f;
            self.sigmas[i] *= f.abs();
            for j in 0..factors.len() {
                self.covariance[i][j] *= f;
                self.covariance[j][i] *= f;
            }
        }
        self
    }
}
