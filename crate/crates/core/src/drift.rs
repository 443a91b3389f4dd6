//! Bounded Lipschitz nonlinearities `F`, registered by name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{sample_gaussian, RandomStream};

/// Declarative description of a drift, as found in model files.
///
/// `params` is kind-specific:
/// * `zero`: empty.
/// * `constant`: the vector `v` (one entry per mode).
/// * `saturating`: `[amplitude, gain]` or `[amplitude, gain, shift]`; the map is
///   `F(x)_k = amplitude * tanh(gain * x_{(k + shift) mod N})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub kind: String,
    #[serde(default)]
    pub c_f: f64,
    #[serde(default)]
    pub lipschitz: f64,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl DriftSpec {
    pub fn zero() -> Self {
        Self {
            kind: "zero".into(),
            c_f: 0.0,
            lipschitz: 0.0,
            params: Vec::new(),
        }
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let c_f = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self {
            kind: "constant".into(),
            c_f,
            lipschitz: 0.0,
            params: v,
        }
    }

    /// Saturating drift with the tightest declared constants for `n_modes`.
    pub fn saturating(amplitude: f64, gain: f64, shift: usize, n_modes: usize) -> Self {
        Self {
            kind: "saturating".into(),
            c_f: amplitude.abs() * (n_modes as f64).sqrt(),
            lipschitz: amplitude.abs() * gain.abs(),
            params: vec![amplitude, gain, shift as f64],
        }
    }
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self::zero()
    }
}

/// A nonlinearity `F: R^N -> R^N` with `sup |F| <= bound()` and Lipschitz
/// constant `<= lipschitz()` in the Euclidean norm.
pub trait Drift: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    fn bound(&self) -> f64;

    fn lipschitz(&self) -> f64;

    /// Schemes skip the drift term entirely when this is true.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn bound(&self) -> f64 {
        0.0
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }
}

#[derive(Debug)]
pub struct ConstantDrift {
    value: Vec<f64>,
    bound: f64,
}

impl Drift for ConstantDrift {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

#[derive(Debug)]
pub struct SaturatingDrift {
    amplitude: f64,
    gain: f64,
    shift: usize,
    bound: f64,
    lipschitz: f64,
}

impl Drift for SaturatingDrift {
    fn name(&self) -> &'static str {
        "saturating"
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.amplitude * (self.gain * x[(k + self.shift) % n]).tanh();
        }
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

pub type DriftBuilder = fn(&DriftSpec, usize) -> Result<Arc<dyn Drift>>;

/// Name -> constructor table for drift kinds.
#[derive(Clone)]
pub struct DriftRegistry {
    builders: BTreeMap<String, DriftBuilder>,
}

impl fmt::Debug for DriftRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl DriftRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// Registry holding `zero`, `constant` and `saturating`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("zero", build_zero);
        r.register("constant", build_constant);
        r.register("saturating", build_saturating);
        r
    }

    pub fn register(&mut self, name: &str, builder: DriftBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    /// Builds the drift and verifies its declared constants on random probes.
    pub fn build(&self, spec: &DriftSpec, n_modes: usize) -> Result<Arc<dyn Drift>> {
        let builder = self
            .builders
            .get(&spec.kind)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "drift",
                name: spec.kind.clone(),
                known: self.names().join(", "),
            })?;
        let drift = builder(spec, n_modes)?;
        verify_declared_constants(drift.as_ref(), n_modes)?;
        Ok(drift)
    }
}

impl Default for DriftRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn check_declared(spec: &DriftSpec) -> Result<()> {
    for (name, v) in [("c_f", spec.c_f), ("lipschitz", spec.lipschitz)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parameter(format!(
                "drift {name} must be finite and >= 0, got {v}"
            )));
        }
    }
    Ok(())
}

fn build_zero(spec: &DriftSpec, _n: usize) -> Result<Arc<dyn Drift>> {
    if !spec.params.is_empty() {
        return Err(Error::Parameter("zero drift takes no params".into()));
    }
    Ok(Arc::new(ZeroDrift))
}

fn build_constant(spec: &DriftSpec, n: usize) -> Result<Arc<dyn Drift>> {
    check_declared(spec)?;
    if spec.params.len() != n {
        return Err(Error::Parameter(format!(
            "constant drift needs {n} params, got {}",
            spec.params.len()
        )));
    }
    if spec.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "constant drift entries must be finite".into(),
        ));
    }
    Ok(Arc::new(ConstantDrift {
        value: spec.params.clone(),
        bound: spec.c_f,
    }))
}

fn build_saturating(spec: &DriftSpec, _n: usize) -> Result<Arc<dyn Drift>> {
    check_declared(spec)?;
    let (amplitude, gain, shift) = match spec.params.as_slice() {
        [a, g] => (*a, *g, 0.0),
        [a, g, s] => (*a, *g, *s),
        other => {
            return Err(Error::Parameter(format!(
                "saturating drift takes [amplitude, gain, shift?], got {} params",
                other.len()
            )))
        }
    };
    if !(amplitude.is_finite() && gain.is_finite()) {
        return Err(Error::Parameter(
            "saturating drift params must be finite".into(),
        ));
    }
    if shift < 0.0 || shift.fract() != 0.0 {
        return Err(Error::Parameter(format!(
            "saturating shift must be a nonnegative integer, got {shift}"
        )));
    }
    Ok(Arc::new(SaturatingDrift {
        amplitude,
        gain,
        shift: shift as usize,
        bound: spec.c_f,
        lipschitz: spec.lipschitz,
    }))
}

const PROBE_SEED: u64 = 0x5eed_d81f;
const PROBES: usize = 256;
const REL_SLACK: f64 = 1e-9;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Probes `F` at random points over several magnitudes and rejects drifts
/// whose declared bound or Lipschitz constant is violated.
pub fn verify_declared_constants(drift: &dyn Drift, n: usize) -> Result<()> {
    let mut stream = RandomStream::new(PROBE_SEED, n as u64);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let (c_f, lip) = (drift.bound(), drift.lipschitz());
    for i in 0..PROBES {
        let magnitude = [0.1, 1.0, 10.0, 1e3][i % 4];
        for v in x.iter_mut() {
            *v = sample_gaussian(magnitude, &mut stream)?;
        }
        let step = [1e-3, 0.1, 1.0][i % 3];
        for (w, v) in y.iter_mut().zip(&x) {
            *w = v + sample_gaussian(step, &mut stream)?;
        }
        drift.eval(&x, &mut fx);
        drift.eval(&y, &mut fy);
        let size = norm(&fx);
        if size > c_f * (1.0 + REL_SLACK) + REL_SLACK {
            return Err(Error::Parameter(format!(
                "{} drift reaches |F| = {size:.6} above declared c_f = {c_f}",
                drift.name()
            )));
        }
        let diff: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let (num, den) = (norm(&diff), norm(&dx));
        if num > lip * den * (1.0 + REL_SLACK) + REL_SLACK * den {
            return Err(Error::Parameter(format!(
                "{} drift has difference quotient {:.6} above declared lipschitz = {lip}",
                drift.name(),
                num / den
            )));
        }
    }
    Ok(())
}
