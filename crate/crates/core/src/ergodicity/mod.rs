//! Monte Carlo diagnostics of convergence to the invariant measure: moment
//! estimates, histogram total-variation distances and exponential rate fits.

mod experiment;
mod moments;
mod rate;
mod tv;

pub use experiment::{
    convergence_experiment, estimate_invariant, fit_excess_moment, moment_sweep, moments_to_csv,
    noise_floor, spearman, stationarity_threshold, ConvergenceReport, ConvergenceSetup, CurvePoint,
    InvariantEstimate, MomentPoint, MomentSweep, TvSettings, XCurve, STATIONARITY_BINS,
};
pub use moments::{estimate_moment, jackknife_mean, MomentEstimate};
pub use rate::{fit_rate, RateFit};
pub use tv::{estimate_tv, quantile_sorted, TVEstimate, CLIP_HIGH, CLIP_LOW};
