use super::{check_start, NoisePath, PathConfig, Scheme, SolvedPath, State};
use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::noise::RandomStream;
use crate::propagator::{sample_convolution_increment, transitions, ModeTransition};

/// Exponential Euler: the linear flow and the noise are exact over each step,
/// the drift is frozen at the left endpoint,
/// `x'_k = e^{-λ_k h} x_k + (1 - e^{-λ_k h})/λ_k F(x)_k + ξ_k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpEuler;

/// Advances `x` by one step in place, given this step's increments.
pub(crate) fn advance(
    model: &SpectralModel,
    trans: &[ModeTransition],
    x: &mut [f64],
    increments: &[f64],
    scratch: &mut [f64],
) {
    let drift = model.drift();
    if drift.is_zero() {
        for ((xk, tr), inc) in x.iter_mut().zip(trans).zip(increments) {
            *xk = tr.decay * *xk + inc;
        }
    } else {
        drift.eval(x, scratch);
        for (((xk, tr), inc), f) in x.iter_mut().zip(trans).zip(increments).zip(scratch.iter()) {
            *xk = tr.decay * *xk + inc + tr.drift_gain * f;
        }
    }
}

impl Scheme for ExpEuler {
    fn name(&self) -> &'static str {
        "exp_euler"
    }

    fn integrate(
        &self,
        model: &SpectralModel,
        trans: &[ModeTransition],
        x0: &[f64],
        noise: &NoisePath,
        config: &PathConfig,
    ) -> Result<SolvedPath> {
        check_start(model, x0)?;
        let n = model.n_modes();
        let h = config.step;
        let mut x = x0.to_vec();
        let mut scratch = vec![0.0; n];
        let mut states = Vec::with_capacity(noise.n_steps() + 1);
        states.push(State::new(x.clone(), 0.0));
        for j in 0..noise.n_steps() {
            advance(model, trans, &mut x, noise.increment(j), &mut scratch);
            if let Some(mode) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Blown { step: j + 1, mode });
            }
            states.push(State::new(x.clone(), (j + 1) as f64 * h));
        }
        Ok(SolvedPath {
            states,
            iterations: 1,
            residuals: Vec::new(),
        })
    }
}

/// One exponential-Euler step drawing fresh increments from `streams`
/// (one stream per mode).
pub fn exp_euler_step(
    model: &SpectralModel,
    state: &State,
    h: f64,
    streams: &mut [RandomStream],
) -> Result<State> {
    check_start(model, &state.coords)?;
    if streams.len() != model.n_modes() {
        return Err(Error::Usage("one stream per mode is required".into()));
    }
    let trans = transitions(model, h)?;
    let increments: Vec<f64> = trans
        .iter()
        .zip(streams.iter_mut())
        .map(|(tr, s)| sample_convolution_increment(tr, s))
        .collect();
    let mut x = state.coords.clone();
    let mut scratch = vec![0.0; x.len()];
    advance(model, &trans, &mut x, &increments, &mut scratch);
    if let Some(mode) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Blown { step: 1, mode });
    }
    Ok(State::new(x, state.time + h))
}
