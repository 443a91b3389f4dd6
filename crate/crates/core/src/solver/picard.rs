use super::{check_start, NoisePath, PathConfig, Scheme, SolvedPath, State};
use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::propagator::ModeTransition;

/// Path-conditioned fixed-point solver.
///
/// Given the sampled convolution `Z_A` on the grid, iterates
/// `V(t_j) = S_{t_j} x + Σ_{i<j} h S_{t_j - t_i} F(V(t_i) + Z_A(t_i))`
/// (left-endpoint rectangle rule for the convolution integral) until two
/// successive iterates are closer than `picard_tol` in the sup norm over grid
/// and modes, and returns `X = V + Z_A`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Picard;

impl Scheme for Picard {
    fn name(&self) -> &'static str {
        "picard"
    }

    fn integrate(
        &self,
        model: &SpectralModel,
        trans: &[ModeTransition],
        x0: &[f64],
        noise: &NoisePath,
        config: &PathConfig,
    ) -> Result<SolvedPath> {
        let out = picard_solve(
            model,
            trans,
            x0,
            noise,
            config.picard_tol,
            config.picard_max_iter,
            None,
        )?;
        Ok(out.path)
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub path: SolvedPath,
    /// Final `V` (the solution minus the stochastic convolution).
    pub v: Vec<Vec<f64>>,
}

/// Runs the fixed-point iteration. `initial` overrides the starting iterate
/// `V^0(t_j) = S_{t_j} x` (one row per grid point).
pub fn picard_solve(
    model: &SpectralModel,
    trans: &[ModeTransition],
    x0: &[f64],
    noise: &NoisePath,
    tol: f64,
    max_iter: usize,
    initial: Option<&[Vec<f64>]>,
) -> Result<PicardOutcome> {
    check_start(model, x0)?;
    let n = model.n_modes();
    let steps = noise.n_steps();
    let h = noise.step();
    let z = noise.cumulative(trans);
    let free: Vec<Vec<f64>> = (0..=steps)
        .map(|j| {
            let t = j as f64 * h;
            x0.iter()
                .zip(model.lambda())
                .map(|(x, l)| (-l * t).exp() * x)
                .collect()
        })
        .collect();
    let mut v = match initial {
        Some(rows) => {
            if rows.len() != steps + 1 || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Usage("initial iterate has the wrong shape".into()));
            }
            rows.to_vec()
        }
        None => free.clone(),
    };
    let drift = model.drift();
    let mut residuals = Vec::new();
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut next = vec![vec![0.0; n]; steps + 1];
    for iteration in 1..=max_iter {
        w.fill(0.0);
        next[0].copy_from_slice(&free[0]);
        for j in 0..steps {
            for k in 0..n {
                x[k] = v[j][k] + z[j][k];
            }
            drift.eval(&x, &mut f);
            // W(t_{j+1}) = e^{-λh} (W(t_j) + h F(X(t_j)))
            for k in 0..n {
                w[k] = trans[k].decay * (w[k] + h * f[k]);
                next[j + 1][k] = free[j + 1][k] + w[k];
            }
        }
        let residual = next
            .iter()
            .zip(&v)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        residuals.push(residual);
        std::mem::swap(&mut v, &mut next);
        if residual < tol {
            let mut states = Vec::with_capacity(steps + 1);
            for j in 0..=steps {
                let coords: Vec<f64> = v[j].iter().zip(&z[j]).map(|(a, b)| a + b).collect();
                if let Some(mode) = coords.iter().position(|c| !c.is_finite()) {
                    return Err(Error::Blown { step: j, mode });
                }
                states.push(State::new(coords, j as f64 * h));
            }
            return Ok(PicardOutcome {
                path: SolvedPath {
                    states,
                    iterations: iteration,
                    residuals,
                },
                v,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}
