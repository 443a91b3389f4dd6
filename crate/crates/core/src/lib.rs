//! Spectral simulation of semilinear stochastic evolution equations
//! `dX = (AX + F(X)) dt + dZ` driven by cylindrical stable and Gaussian noise,
//! with exact-in-law sampling of the linear part, executable admissibility
//! checks on the coefficients, and Monte Carlo diagnostics of convergence to
//! the invariant measure in total variation.

pub mod drift;
pub mod ensemble;
pub mod ergodicity;
pub mod error;
pub mod model;
pub mod noise;
pub mod propagator;
pub mod solver;

pub use drift::{Drift, DriftRegistry, DriftSpec};
pub use ensemble::{ensembles_to_csv, Ensemble, Provenance};
pub use error::{Error, Result};
pub use model::{
    build_model, build_model_with_drift, ModelDefinition, ModelSpec, PowerLawSpec, SpectralModel,
};
pub use noise::{RandomStream, StableParams};
pub use solver::{PathConfig, Scheme, SchemeRegistry, State};
