//! Time stepping of the mild solution
//! `X_t = S_t x + ∫_0^t S_{t-s} F(X_s) ds + Z_A(t)`.
//!
//! Every scheme consumes a pre-sampled [`NoisePath`], so two schemes run on
//! the same streams see exactly the same noise. Schemes are looked up by name
//! in a [`SchemeRegistry`].

mod exp_euler;
mod picard;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exp_euler::{exp_euler_step, ExpEuler};
pub use picard::{picard_solve, Picard, PicardOutcome};

use crate::ensemble::{Ensemble, Provenance};
use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::noise::RandomStream;
use crate::propagator::{sample_convolution_increment, transitions, ModeTransition};

/// Largest supported truncation; stream ids pack `(path, mode)` into 64 bits.
pub const MAX_MODES: usize = 1 << 16;

/// Grid and scheme settings of a single trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub step: f64,
    pub horizon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
}

fn default_scheme() -> String {
    "exp_euler".into()
}

fn default_picard_tol() -> f64 {
    1e-12
}

fn default_picard_max_iter() -> usize {
    200
}

impl PathConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            scheme: default_scheme(),
            picard_tol: default_picard_tol(),
            picard_max_iter: default_picard_max_iter(),
        }
    }

    pub fn with_scheme(mut self, scheme: &str) -> Self {
        self.scheme = scheme.to_string();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Parameter(format!(
                "step must be > 0, got {}",
                self.step
            )));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "horizon {} must be finite and >= step {}",
                self.horizon, self.step
            )));
        }
        if self.picard_tol.is_nan() || self.picard_tol <= 0.0 {
            return Err(Error::Parameter("picard_tol must be > 0".into()));
        }
        Ok(())
    }

    /// Number of steps, `ceil(T / h)`.
    pub fn n_steps(&self) -> usize {
        steps_for(self.horizon, self.step)
    }

    /// Grid index of `t`, rounded down.
    pub fn grid_index(&self, t: f64) -> usize {
        (t / self.step + 1e-9).floor().max(0.0) as usize
    }
}

fn steps_for(t: f64, h: f64) -> usize {
    (t / h - 1e-9).ceil().max(0.0) as usize
}

/// A state on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct State {
    pub coords: Vec<f64>,
    pub time: f64,
}

impl State {
    pub fn new(coords: Vec<f64>, time: f64) -> Self {
        Self { coords, time }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One independent stream per mode of trajectory `path_id`.
pub fn mode_streams(seed: u64, path_id: u64, n_modes: usize) -> Vec<RandomStream> {
    assert!(
        n_modes <= MAX_MODES,
        "at most {MAX_MODES} modes are supported"
    );
    (0..n_modes as u64)
        .map(|k| RandomStream::new(seed, (path_id << 16) | k))
        .collect()
}

/// Per-step convolution increments `Z_A(t_{j+1}) - e^{-λh} Z_A(t_j)` for every
/// mode, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    step: f64,
    n_modes: usize,
    increments: Vec<f64>,
}

impl NoisePath {
    /// Draws `n_steps` increments; step `j` of mode `k` is the `j`-th draw of
    /// `streams[k]`.
    pub fn sample(trans: &[ModeTransition], streams: &mut [RandomStream], n_steps: usize) -> Self {
        let n = trans.len();
        assert_eq!(streams.len(), n, "one stream per mode");
        let mut increments = vec![0.0; n * n_steps];
        for j in 0..n_steps {
            for (k, (tr, s)) in trans.iter().zip(streams.iter_mut()).enumerate() {
                increments[j * n + k] = sample_convolution_increment(tr, s);
            }
        }
        Self {
            step: trans.first().map_or(0.0, |t| t.step),
            n_modes: n,
            increments,
        }
    }

    pub fn from_increments(step: f64, n_modes: usize, increments: Vec<f64>) -> Result<Self> {
        if n_modes == 0 || !increments.len().is_multiple_of(n_modes) {
            return Err(Error::Usage(
                "increments must be a multiple of n_modes".into(),
            ));
        }
        Ok(Self {
            step,
            n_modes,
            increments,
        })
    }

    /// All-zero noise for `n_steps` steps.
    pub fn silent(step: f64, n_modes: usize, n_steps: usize) -> Self {
        Self {
            step,
            n_modes,
            increments: vec![0.0; n_modes * n_steps],
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.n_modes.max(1)
    }

    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[j * self.n_modes..(j + 1) * self.n_modes]
    }

    /// `Z_A(t_j)` on the grid, `j = 0..=n_steps`, from `Z_A(0) = 0`.
    pub fn cumulative(&self, trans: &[ModeTransition]) -> Vec<Vec<f64>> {
        let mut z = vec![vec![0.0; self.n_modes]];
        for j in 0..self.n_steps() {
            let prev = &z[j];
            let next = prev
                .iter()
                .zip(trans)
                .zip(self.increment(j))
                .map(|((p, tr), inc)| tr.decay * p + inc)
                .collect();
            z.push(next);
        }
        z
    }

    /// Noise on a grid `factor` times coarser, exact in law: over two fine
    /// steps the coarse increment is `e^{-λh} ξ_1 + ξ_2`. `fine` are the
    /// transitions of this path's step.
    pub fn coarsen(&self, fine: &[ModeTransition], factor: usize) -> Result<NoisePath> {
        if factor == 0 || !self.n_steps().is_multiple_of(factor) {
            return Err(Error::Usage(format!(
                "cannot coarsen {} steps by a factor {factor}",
                self.n_steps()
            )));
        }
        let n = self.n_modes;
        let coarse_steps = self.n_steps() / factor;
        let mut increments = vec![0.0; n * coarse_steps];
        for c in 0..coarse_steps {
            let acc = &mut increments[c * n..(c + 1) * n];
            for j in c * factor..(c + 1) * factor {
                for ((a, tr), inc) in acc.iter_mut().zip(fine).zip(self.increment(j)) {
                    *a = tr.decay * *a + inc;
                }
            }
        }
        NoisePath::from_increments(self.step * factor as f64, n, increments)
    }
}

/// A solved trajectory on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedPath {
    pub states: Vec<State>,
    /// Picard iterations (1 for explicit schemes).
    pub iterations: usize,
    /// Successive sup-norm differences between Picard iterates.
    pub residuals: Vec<f64>,
}

impl SolvedPath {
    pub fn last(&self) -> &State {
        self.states.last().expect("paths contain the initial state")
    }

    /// `max_j max_k |X_j - Y_j|` over a common grid.
    pub fn sup_distance(&self, other: &SolvedPath) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.coords.iter().zip(&b.coords).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// A time-stepping method for the mild equation.
pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves from `x0` on the grid of `noise`. `trans` are the transitions of
    /// every mode over the grid step.
    fn integrate(
        &self,
        model: &SpectralModel,
        trans: &[ModeTransition],
        x0: &[f64],
        noise: &NoisePath,
        config: &PathConfig,
    ) -> Result<SolvedPath>;
}

/// Name -> scheme table.
#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, Arc<dyn Scheme>>,
}

impl fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.schemes.keys()).finish()
    }
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    /// `exp_euler` and `picard`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ExpEuler));
        r.register(Arc::new(Picard));
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn Scheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn names(&self) -> Vec<&str> {
        self.schemes.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "scheme",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn check_start(model: &SpectralModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.n_modes() {
        return Err(Error::Usage(format!(
            "initial state has {} coordinates, model has {} modes",
            x0.len(),
            model.n_modes()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage("initial state must be finite".into()));
    }
    Ok(())
}

/// Samples the noise of trajectory `path_id` and integrates it with the
/// configured scheme. The same `(seed, path_id)` gives the same noise for
/// every scheme.
pub fn simulate_path(
    model: &SpectralModel,
    x0: &[f64],
    config: &PathConfig,
    seed: u64,
    path_id: u64,
) -> Result<SolvedPath> {
    simulate_path_with(&SchemeRegistry::builtin(), model, x0, config, seed, path_id)
}

pub fn simulate_path_with(
    registry: &SchemeRegistry,
    model: &SpectralModel,
    x0: &[f64],
    config: &PathConfig,
    seed: u64,
    path_id: u64,
) -> Result<SolvedPath> {
    config.validate()?;
    check_start(model, x0)?;
    let scheme = registry.get(&config.scheme)?;
    let trans = transitions(model, config.step)?;
    let mut streams = mode_streams(seed, path_id, model.n_modes());
    let noise = NoisePath::sample(&trans, &mut streams, config.n_steps());
    scheme.integrate(model, &trans, x0, &noise, config)
}

/// Snapshots of an ensemble run plus the number of excluded trajectories.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub snapshots: Vec<Ensemble>,
    pub blown: usize,
}

/// `m_paths` independent trajectories from `x0`; trajectory `i` uses the
/// streams of `(seed, i)`, so the result does not depend on scheduling.
/// Requested times are snapped down to the grid. Trajectories that blow up
/// are dropped from every snapshot and counted.
pub fn simulate_ensemble(
    model: &SpectralModel,
    x0: &[f64],
    config: &PathConfig,
    m_paths: usize,
    seed: u64,
    times: &[f64],
) -> Result<EnsembleRun> {
    simulate_ensemble_with(
        &SchemeRegistry::builtin(),
        model,
        x0,
        config,
        m_paths,
        seed,
        times,
    )
}

pub fn simulate_ensemble_with(
    registry: &SchemeRegistry,
    model: &SpectralModel,
    x0: &[f64],
    config: &PathConfig,
    m_paths: usize,
    seed: u64,
    times: &[f64],
) -> Result<EnsembleRun> {
    if m_paths == 0 {
        return Err(Error::Usage("ensemble needs m_paths >= 1".into()));
    }
    if times.is_empty() {
        return Err(Error::Usage("no snapshot times requested".into()));
    }
    config.validate()?;
    check_start(model, x0)?;
    let scheme = registry.get(&config.scheme)?;
    let indices: Vec<usize> = times
        .iter()
        .map(|&t| {
            if t < 0.0 || !t.is_finite() {
                Err(Error::Usage(format!(
                    "snapshot time {t} must be finite and >= 0"
                )))
            } else {
                Ok(config.grid_index(t))
            }
        })
        .collect::<Result<_>>()?;
    let last = *indices.iter().max().expect("nonempty");
    if last > config.n_steps() {
        return Err(Error::Usage(format!(
            "snapshot time {} lies beyond the horizon {}",
            last as f64 * config.step,
            config.horizon
        )));
    }
    let trans = transitions(model, config.step)?;
    let n = model.n_modes();
    let mut run_config = config.clone();
    run_config.horizon = last.max(1) as f64 * config.step;
    let n_steps = last.max(1);

    let rows: Vec<Result<Option<Vec<f64>>>> = (0..m_paths as u64)
        .into_par_iter()
        .map(|path_id| {
            let mut streams = mode_streams(seed, path_id, n);
            let noise = NoisePath::sample(&trans, &mut streams, n_steps);
            match scheme.integrate(model, &trans, x0, &noise, &run_config) {
                Ok(path) => Ok(Some(
                    indices
                        .iter()
                        .flat_map(|&j| path.states[j].coords.iter().copied())
                        .collect(),
                )),
                Err(Error::Blown { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut kept: Vec<(u64, Vec<f64>)> = Vec::with_capacity(m_paths);
    let mut blown = 0;
    for (id, row) in rows.into_iter().enumerate() {
        match row? {
            Some(r) => kept.push((id as u64, r)),
            None => blown += 1,
        }
    }
    if kept.is_empty() {
        return Err(Error::Blown { step: 0, mode: 0 });
    }
    let provenance = Provenance {
        seed,
        scheme: config.scheme.clone(),
        step: config.step,
        model_hash: model.hash(),
    };
    let ids: Vec<u64> = kept.iter().map(|(id, _)| *id).collect();
    let snapshots = indices
        .iter()
        .enumerate()
        .map(|(s, &j)| {
            let samples = kept
                .iter()
                .flat_map(|(_, r)| r[s * n..(s + 1) * n].iter().copied())
                .collect();
            Ensemble::new(
                j as f64 * config.step,
                n,
                samples,
                ids.clone(),
                provenance.clone(),
            )
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleRun { snapshots, blown })
}
