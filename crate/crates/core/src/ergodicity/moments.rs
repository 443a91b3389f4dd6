use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub value: f64,
    /// Jackknife standard error.
    pub stderr: f64,
    /// Set when `p >= alpha`, where the moment is infinite.
    pub warning: Option<String>,
}

/// `(1/M) Σ |row_i|^p` with a jackknife standard error. Passing the stability
/// index attaches a warning for `p >= alpha`.
pub fn estimate_moment(ens: &Ensemble, p: f64, alpha: Option<f64>) -> Result<MomentEstimate> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Parameter(format!(
            "moment order must be > 0, got {p}"
        )));
    }
    let values: Vec<f64> = ens
        .rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
        .collect();
    let (value, stderr) = jackknife_mean(&values);
    let warning = alpha.filter(|a| p >= *a && *a < 2.0).map(|a| {
        format!("p = {p} >= alpha = {a}: the moment is infinite and the estimate unstable")
    });
    Ok(MomentEstimate {
        p,
        value,
        stderr,
        warning,
    })
}

/// Mean and jackknife standard error over leave-one-out means.
pub fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let total: f64 = values.iter().sum();
    let mean = total / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let loo: Vec<f64> = values
        .iter()
        .map(|v| (total - v) / (m - 1) as f64)
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / m as f64;
    let var = loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>() * (m - 1) as f64 / m as f64;
    (mean, var.sqrt())
}
