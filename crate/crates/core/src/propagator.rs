//! Exact-in-law transitions of the linear equation, one mode at a time.
//!
//! Mode `k` of the linear equation solves
//! `dX = (-λ X + a) dt + sqrt(q) dW + b dL`, with `L` a standard symmetric
//! α-stable Lévy process. Over a step `h` its solution is
//! `X(h) = e^{-λh} X(0) + Z_h`, where the convolution increment
//! `Z_h = a (1 - e^{-λh})/λ + G + S` is a constant plus independent
//! Gaussian and stable parts:
//!
//! * `G ~ N(0, q (1 - e^{-2λh}) / (2λ))`,
//! * `S ~ SαS` with scale `b ((1 - e^{-αλh}) / (αλ))^{1/α}`.
//!
//! Because increments of `L` are stationary and independent, the increments of
//! successive steps are i.i.d., so stepping is exact with no discretization
//! bias in the linear part.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::noise::{sample_gaussian, sample_sas, RandomStream, StableParams};

/// `(1 - e^{-x}) / x`, continuous at 0.
pub fn phi1(x: f64) -> f64 {
    if x < 1e-4 {
        // Taylor series; the truncation error is below x^4/120 < 1e-18.
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else if x.is_infinite() {
        0.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Exact transition law of one mode over a step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeTransition {
    /// `e^{-λh}`
    pub decay: f64,
    /// `a (1 - e^{-λh}) / λ`
    pub a_shift: f64,
    /// `(1 - e^{-λh}) / λ`, the weight of a frozen drift over the step.
    pub drift_gain: f64,
    pub gauss_std: f64,
    pub stable_scale: f64,
    pub alpha: f64,
    /// `h`; infinite for the stationary law.
    pub step: f64,
}

impl ModeTransition {
    /// Transition of a single mode with the given coefficients.
    pub fn new(lambda: f64, b: f64, q: f64, a: f64, alpha: f64, h: f64) -> Result<Self> {
        if h.is_nan() || h <= 0.0 {
            return Err(Error::Parameter(format!("step must be > 0, got {h}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if h.is_infinite() {
            return Ok(Self {
                decay: 0.0,
                a_shift: a / lambda,
                drift_gain: 1.0 / lambda,
                gauss_std: (q / (2.0 * lambda)).sqrt(),
                stable_scale: b * (alpha * lambda).powf(-1.0 / alpha),
                alpha,
                step: h,
            });
        }
        let drift_gain = h * phi1(lambda * h);
        Ok(Self {
            decay: (-lambda * h).exp(),
            a_shift: a * drift_gain,
            drift_gain,
            gauss_std: (q * h * phi1(2.0 * lambda * h)).sqrt(),
            stable_scale: b * (h * phi1(alpha * lambda * h)).powf(1.0 / alpha),
            alpha,
            step: h,
        })
    }

    /// Closed-form characteristic function of the increment at `theta`.
    pub fn cf(&self, theta: f64) -> (f64, f64) {
        let modulus = (-0.5 * (self.gauss_std * theta).powi(2)
            - (self.stable_scale * theta.abs()).powf(self.alpha))
        .exp();
        let (s, c) = (theta * self.a_shift).sin_cos();
        (modulus * c, modulus * s)
    }

    pub fn stable_params(&self) -> StableParams {
        StableParams::new(self.alpha, self.stable_scale).expect("transition parameters are valid")
    }
}

/// Transition of mode `mode` (0-based) of `model` over a step `h > 0`.
pub fn transition_params(model: &SpectralModel, mode: usize, h: f64) -> Result<ModeTransition> {
    if mode >= model.n_modes() {
        return Err(Error::Usage(format!(
            "mode index {mode} out of range for {} modes",
            model.n_modes()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!(
            "step must be finite and > 0, got {h}"
        )));
    }
    ModeTransition::new(
        model.lambda()[mode],
        model.b()[mode],
        model.q()[mode],
        model.a()[mode],
        model.alpha(),
        h,
    )
}

/// Transitions of every mode over `h`.
pub fn transitions(model: &SpectralModel, h: f64) -> Result<Vec<ModeTransition>> {
    (0..model.n_modes())
        .map(|k| transition_params(model, k, h))
        .collect()
}

/// The `h → ∞` limit: sampling from it draws one coordinate of the invariant
/// law of the linear equation.
pub fn stationary_params(model: &SpectralModel, mode: usize) -> Result<ModeTransition> {
    if mode >= model.n_modes() {
        return Err(Error::Usage(format!(
            "mode index {mode} out of range for {} modes",
            model.n_modes()
        )));
    }
    ModeTransition::new(
        model.lambda()[mode],
        model.b()[mode],
        model.q()[mode],
        model.a()[mode],
        model.alpha(),
        f64::INFINITY,
    )
}

/// One draw of the convolution increment: shift, then Gaussian, then stable.
pub fn sample_convolution_increment(tr: &ModeTransition, stream: &mut RandomStream) -> f64 {
    let g = sample_gaussian(tr.gauss_std, stream).expect("gauss_std is nonnegative");
    let s = sample_sas(tr.stable_params(), stream);
    tr.a_shift + g + s
}

/// One exact step of the linear equation for a single mode.
pub fn propagate(tr: &ModeTransition, x: f64, stream: &mut RandomStream) -> f64 {
    tr.decay * x + sample_convolution_increment(tr, stream)
}
