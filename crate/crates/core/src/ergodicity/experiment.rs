use std::fmt::Write as _;

use serde::Serialize;

use super::moments::{estimate_moment, MomentEstimate};
use super::rate::{fit_rate, RateFit};
use super::tv::{estimate_tv, TVEstimate};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::noise::derive_seed;
use crate::solver::{simulate_ensemble, PathConfig};

/// Projection and binning used by every TV estimate of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvSettings {
    /// 0-based mode indices.
    pub dims: Vec<usize>,
    pub bins: usize,
}

impl Default for TvSettings {
    fn default() -> Self {
        Self {
            dims: vec![0],
            bins: 64,
        }
    }
}

/// Scale `2/√M` at which the plug-in TV of two equal laws concentrates.
pub fn noise_floor(m: usize) -> f64 {
    2.0 / (m as f64).sqrt()
}

/// Bins per dimension of the two-time stationarity diagnostic. Between two
/// samples of one law the plug-in histogram TV averages about
/// `0.5 Σ_i sqrt(4 p_i / (π M))`, roughly `1.4/√M` with 8 cells of a
/// Gaussian but `4.2/√M` with 64, so the `3/√M` threshold is only
/// meaningful with coarse bins.
pub const STATIONARITY_BINS: usize = 8;

/// Stationarity threshold `3/√M` for the two-time diagnostic.
pub fn stationarity_threshold(m: usize) -> f64 {
    3.0 / (m as f64).sqrt()
}

fn config_until(config: &PathConfig, horizon: f64) -> PathConfig {
    let mut c = config.clone();
    if horizon > 0.0 && horizon < c.step {
        c.step = horizon;
    }
    c.horizon = horizon.max(c.step);
    c
}

#[derive(Debug, Clone)]
pub struct InvariantEstimate {
    /// Samples at `t_burn`.
    pub ensemble: Ensemble,
    /// Samples at `2 t_burn` from the same trajectories.
    pub late: Ensemble,
    pub diagnostic: TVEstimate,
    pub threshold: f64,
    pub converged: bool,
    pub blown: usize,
}

/// Runs `m_paths` trajectories from `start` (normally the origin) to
/// `t_burn` and `2 t_burn`. The pair counts as converged when the projected
/// TV between the two snapshots, on `tv.dims` with [`STATIONARITY_BINS`]
/// bins, is below `3/√M`. Steps longer than `t_burn` are shortened to
/// `t_burn`.
pub fn estimate_invariant(
    model: &SpectralModel,
    config: &PathConfig,
    m_paths: usize,
    t_burn: f64,
    seed: u64,
    start: &[f64],
    tv: &TvSettings,
) -> Result<InvariantEstimate> {
    if !(t_burn > 0.0 && t_burn.is_finite()) {
        return Err(Error::Parameter(format!(
            "t_burn must be > 0, got {t_burn}"
        )));
    }
    let cfg = config_until(config, 2.0 * t_burn);
    let mut run = simulate_ensemble(model, start, &cfg, m_paths, seed, &[t_burn, 2.0 * t_burn])?;
    let late = run.snapshots.pop().expect("two snapshots");
    let ensemble = run.snapshots.pop().expect("two snapshots");
    let diagnostic = estimate_tv(&ensemble, &late, &tv.dims, STATIONARITY_BINS)?;
    let threshold = stationarity_threshold(ensemble.len());
    Ok(InvariantEstimate {
        converged: diagnostic.value < threshold,
        ensemble,
        late,
        diagnostic,
        threshold,
        blown: run.blown,
    })
}

/// Inputs of a convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSetup {
    /// Step and scheme; the horizon is set from the time grid.
    pub path: PathConfig,
    pub x_list: Vec<Vec<f64>>,
    pub time_grid: Vec<f64>,
    pub m_paths: usize,
    pub tv: TvSettings,
    /// Exponent of the prefactor `1 + |x|^p`.
    pub p: f64,
    /// Burn-in of the reference ensemble started at the origin.
    pub t_burn: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub tv: f64,
    /// `1/√M`, half the noise floor.
    pub stderr_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XCurve {
    pub x: Vec<f64>,
    pub x_norm: f64,
    pub points: Vec<CurvePoint>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub blown: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub reference_diagnostic: f64,
    pub reference_converged: bool,
    pub noise_floor: f64,
    pub curves: Vec<XCurve>,
    /// Spearman correlation between fitted `C(x)` and `1 + |x|^p`.
    pub prefactor_rank_correlation: Option<f64>,
    pub prefactor_monotone: bool,
    /// `λ_1`, reported next to the fitted rates.
    pub lambda_1: f64,
}

/// Estimates `‖μ_t^x − μ‖` on a time grid for each start `x`, fits an
/// exponential rate per start, and checks that the fitted prefactors are
/// ordered like `1 + |x|^p`.
///
/// The reference `μ` is a burn-in ensemble from the origin drawn with seed
/// `derive_seed(seed, 0)`; start `i` uses `derive_seed(seed, i + 1)`.
pub fn convergence_experiment(
    model: &SpectralModel,
    setup: &ConvergenceSetup,
) -> Result<ConvergenceReport> {
    if setup.x_list.is_empty() || setup.time_grid.is_empty() {
        return Err(Error::Usage("x_list and time_grid must be nonempty".into()));
    }
    let n = model.n_modes();
    let reference = estimate_invariant(
        model,
        &setup.path,
        setup.m_paths,
        setup.t_burn,
        derive_seed(setup.seed, 0),
        &vec![0.0; n],
        &setup.tv,
    )?;
    let t_max = setup.time_grid.iter().cloned().fold(0.0, f64::max);
    let cfg = config_until(&setup.path, t_max);
    let floor = noise_floor(reference.ensemble.len());
    let mut curves = Vec::with_capacity(setup.x_list.len());
    for (i, x) in setup.x_list.iter().enumerate() {
        let run = simulate_ensemble(
            model,
            x,
            &cfg,
            setup.m_paths,
            derive_seed(setup.seed, i as u64 + 1),
            &setup.time_grid,
        )?;
        let points: Vec<CurvePoint> = run
            .snapshots
            .iter()
            .map(|snap| {
                let tv = estimate_tv(snap, &reference.ensemble, &setup.tv.dims, setup.tv.bins)?;
                Ok(CurvePoint {
                    t: snap.time(),
                    tv: tv.value,
                    stderr_proxy: 1.0 / (tv.samples_per_side as f64).sqrt(),
                })
            })
            .collect::<Result<_>>()?;
        let times: Vec<f64> = points.iter().map(|p| p.t).collect();
        let values: Vec<f64> = points.iter().map(|p| p.tv).collect();
        let (fit, fit_error) = match fit_rate(&times, &values, floor) {
            Ok(f) => (Some(f), None),
            Err(e @ Error::InsufficientData { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        curves.push(XCurve {
            x_norm: x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            x: x.clone(),
            points,
            fit,
            fit_error,
            blown: run.blown,
        });
    }
    let pairs: Vec<(f64, f64)> = curves
        .iter()
        .filter_map(|c| c.fit.map(|f| (f.log_c, 1.0 + c.x_norm.powf(setup.p))))
        .collect();
    let prefactor_rank_correlation = if pairs.len() >= 2 {
        spearman(&pairs)
    } else {
        None
    };
    Ok(ConvergenceReport {
        reference_diagnostic: reference.diagnostic.value,
        reference_converged: reference.converged,
        noise_floor: floor,
        curves,
        prefactor_monotone: prefactor_rank_correlation.is_none_or(|c| c >= 0.0),
        prefactor_rank_correlation,
        lambda_1: model.decay_rate(),
    })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(pairs: &[(f64, f64)]) -> Option<f64> {
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ra, rb) = (ranks(&a), ranks(&b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ConvergenceReport {
    /// Rows `x_norm,t,tv,tv_stderr_proxy,beta,log_c,r2`; the fit columns are
    /// empty when the fit had too few points above the noise floor.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("x_norm,t,tv,tv_stderr_proxy,beta,log_c,r2\n");
        for c in &self.curves {
            for p in &c.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.x_norm,
                    p.t,
                    p.tv,
                    p.stderr_proxy,
                    opt(c.fit.map(|f| f.beta)),
                    opt(c.fit.map(|f| f.log_c)),
                    opt(c.fit.map(|f| f.r_squared)),
                );
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "reference two-time TV = {:.5} ({}), noise floor = {:.5}, lambda_1 = {}",
            self.reference_diagnostic,
            if self.reference_converged {
                "converged"
            } else {
                "not converged"
            },
            self.noise_floor,
            self.lambda_1
        );
        for c in &self.curves {
            match (&c.fit, &c.fit_error) {
                (Some(f), _) => {
                    let _ = writeln!(
                        out,
                        "|x| = {:<10} beta = {:.4}  log C = {:.4}  r2 = {:.4}  points = {} (dropped {})",
                        c.x_norm, f.beta, f.log_c, f.r_squared, f.points_used, f.dropped
                    );
                }
                (None, e) => {
                    let _ = writeln!(
                        out,
                        "|x| = {:<10} no fit: {}",
                        c.x_norm,
                        e.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            "prefactor rank correlation = {} ({})",
            self.prefactor_rank_correlation
                .map_or_else(|| "n/a".to_string(), |c| format!("{c:.3}")),
            if self.prefactor_monotone {
                "monotone"
            } else {
                "NOT monotone"
            }
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentPoint {
    pub t: f64,
    pub p: f64,
    pub moment: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSweep {
    pub x: Vec<f64>,
    pub points: Vec<MomentPoint>,
    pub warning: Option<String>,
    pub blown: usize,
}

/// `E|X_t^x|^p` on a time grid from one ensemble run.
pub fn moment_sweep(
    model: &SpectralModel,
    config: &PathConfig,
    x: &[f64],
    times: &[f64],
    m_paths: usize,
    seed: u64,
    p: f64,
) -> Result<MomentSweep> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let cfg = config_until(config, t_max);
    let run = simulate_ensemble(model, x, &cfg, m_paths, seed, times)?;
    let mut warning = None;
    let points = run
        .snapshots
        .iter()
        .map(|snap| {
            let MomentEstimate {
                value,
                stderr,
                warning: w,
                ..
            } = estimate_moment(snap, p, Some(model.alpha()))?;
            if warning.is_none() {
                warning = w;
            }
            Ok(MomentPoint {
                t: snap.time(),
                p,
                moment: value,
                stderr,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MomentSweep {
        x: x.to_vec(),
        points,
        warning,
        blown: run.blown,
    })
}

impl MomentSweep {
    pub fn x_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Fits an exponential decay to the excess `E|X_t^x|^p − E|X_t^0|^p` of
/// two sweeps on the same grid. Points whose excess is not above
/// `k_sigma` combined standard errors are dropped before the fit.
pub fn fit_excess_moment(
    start: &MomentSweep,
    origin: &MomentSweep,
    k_sigma: f64,
) -> Result<RateFit> {
    if start.points.len() != origin.points.len()
        || start
            .points
            .iter()
            .zip(&origin.points)
            .any(|(a, b)| a.t != b.t)
    {
        return Err(Error::Usage(
            "excess moment needs two sweeps on the same time grid".into(),
        ));
    }
    let times: Vec<f64> = start.points.iter().map(|p| p.t).collect();
    let excess: Vec<f64> = start
        .points
        .iter()
        .zip(&origin.points)
        .map(|(a, b)| {
            let e = a.moment - b.moment;
            let se = a.stderr.hypot(b.stderr);
            if e > k_sigma * se {
                e
            } else {
                0.0
            }
        })
        .collect();
    fit_rate(&times, &excess, 0.0)
}

/// Rows `x_norm,t,p,moment,stderr` for several sweeps.
pub fn moments_to_csv(sweeps: &[MomentSweep], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("x_norm,t,p,moment,stderr\n");
    for s in sweeps {
        for p in &s.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.x_norm(),
                p.t,
                p.p,
                p.moment,
                p.stderr
            );
        }
    }
    out
}
