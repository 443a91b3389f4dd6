use serde::Serialize;

use crate::error::{Error, Result};

/// Exponential decay `v(t) ≈ C e^{-βt}` fitted by least squares on `log v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub beta: f64,
    pub log_c: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub dropped: usize,
}

impl RateFit {
    pub fn predict(&self, t: f64) -> f64 {
        (self.log_c - self.beta * t).exp()
    }
}

/// Fits `log v = log C - β t` to the points with `v > floor`.
pub fn fit_rate(times: &[f64], values: &[f64], floor: f64) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::Usage(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| t.is_finite() && v.is_finite() && **v > floor && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let dropped = times.len() - pts.len();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            dropped,
            needed: 3,
        });
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            usable: 1,
            dropped,
            needed: 3,
        });
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        beta: -slope,
        log_c: intercept,
        r_squared,
        points_used: pts.len(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..6).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|t| 2.0 * (-0.5 * t).exp()).collect();
        let fit = fit_rate(&t, &v, 0.0).unwrap();
        assert!((fit.beta - 0.5).abs() < 1e-12);
        assert!((fit.log_c - 2f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points_used, 6);
        assert!((fit.predict(3.0) - v[3]).abs() < 1e-12);
    }

    #[test]
    fn noisy_exponential() {
        // ±5% multiplicative perturbation with alternating signs.
        let t: Vec<f64> = (0..6).map(f64::from).collect();
        let v: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(i, t)| 2.0 * (-0.5 * t).exp() * if i % 2 == 0 { 1.05 } else { 0.95 })
            .collect();
        let fit = fit_rate(&t, &v, 0.0).unwrap();
        assert!(fit.beta > 0.4 && fit.beta < 0.6, "{}", fit.beta);
        assert!(fit.r_squared > 0.9);
    }

    #[test]
    fn below_floor_is_insufficient() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [0.01, 0.005, 0.002, 0.001];
        let err = fit_rate(&t, &v, 0.02).unwrap_err();
        assert_eq!(
            err,
            Error::InsufficientData {
                usable: 0,
                dropped: 4,
                needed: 3
            }
        );
        let fit = fit_rate(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.5, 0.25, 0.001], 0.01).unwrap();
        assert_eq!(fit.dropped, 1);
    }
}
