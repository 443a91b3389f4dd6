//! Truncated diagonal models and their parameter-admissibility checks.
//!
//! A model lives on the first `N` eigenmodes of a selfadjoint negative
//! generator, `A e_k = -λ_k e_k`. Each coordinate carries an independent
//! symmetric stable noise with coefficient `b_k`, an independent Brownian
//! noise with intensity `q_k`, and a constant forcing `a_k`.

mod admissibility;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use admissibility::{
    check_a_316, check_all, check_condition_53, check_delta_312, check_gamma_315, check_hpz4,
    check_strong_feller_h3b1, AdmissibilityReport, ConditionId, ReportEntry, H3B1_DEFAULT_TIME,
};

use crate::drift::{Drift, DriftRegistry, DriftSpec};
use crate::error::{Error, Result};
use crate::noise::validate_alpha;

/// A coefficient sequence: either `scale * k^exponent` or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeffs {
    Power {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Explicit(Vec<f64>),
}

fn one() -> f64 {
    1.0
}

impl Coeffs {
    pub fn power(exponent: f64) -> Self {
        Coeffs::Power {
            exponent,
            scale: 1.0,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            Coeffs::Power { exponent, .. } => Some(*exponent),
            Coeffs::Explicit(_) => None,
        }
    }

    /// Value at mode `k` (1-based).
    pub fn value(&self, k: usize) -> Option<f64> {
        match self {
            Coeffs::Power { exponent, scale } => Some(scale * (k as f64).powf(*exponent)),
            Coeffs::Explicit(v) => v.get(k - 1).copied(),
        }
    }

    fn materialize(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        if let Coeffs::Explicit(v) = self {
            if v.len() != n {
                return Err(Error::Structural(format!(
                    "{what} has {} entries, expected n_modes = {n}",
                    v.len()
                )));
            }
        }
        let out: Vec<f64> = (1..=n).map(|k| self.value(k).unwrap()).collect();
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::Structural(format!(
                "{what} contains non-finite entry {bad}"
            )));
        }
        Ok(out)
    }
}

/// Power-law model family: `λ_k = k^lambda_exponent`, `b_k = k^gamma` on the
/// mask `{k : k ≡ 0 mod mask_period}`, `q_k = k^delta`, and `a_k` from `a_rule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawSpec {
    pub lambda_exponent: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default = "default_mask_period")]
    pub mask_period: usize,
    pub a_rule: Coeffs,
    pub alpha: f64,
}

fn default_mask_period() -> usize {
    1
}

impl PowerLawSpec {
    /// Stochastic heat equation on (0, π) with Dirichlet boundary: `λ_k = k^2`.
    pub fn heat_equation(alpha: f64, gamma: f64, delta: f64) -> Self {
        Self {
            lambda_exponent: 2.0,
            gamma,
            delta,
            mask_period: 1,
            a_rule: Coeffs::power(-1.0),
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mask_period == 0 {
            return Err(Error::Parameter("mask_period must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Parameter(format!(
                "power-law family needs alpha in (0, 2), got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("lambda_exponent", self.lambda_exponent),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn definition(&self, n_modes: usize, drift: DriftSpec) -> ModelDefinition {
        ModelDefinition {
            n_modes,
            alpha: self.alpha,
            lambda: Coeffs::power(self.lambda_exponent),
            b: Some(Coeffs::power(self.gamma)),
            mask_period: self.mask_period,
            q: Some(Coeffs::power(self.delta)),
            a: Some(self.a_rule.clone()),
            drift,
        }
    }
}

/// Resolved model description; every coefficient is a rule or a list.
///
/// `None` for `b`, `q` or `a` means that component is switched off (all
/// zeros) and its conditions are not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDefinition {
    pub n_modes: usize,
    pub alpha: f64,
    pub lambda: Coeffs,
    pub b: Option<Coeffs>,
    pub mask_period: usize,
    pub q: Option<Coeffs>,
    pub a: Option<Coeffs>,
    pub drift: DriftSpec,
}

impl ModelDefinition {
    /// Power-law view of the definition when every coefficient is a power law.
    pub fn power_law(&self) -> Option<PowerLawSpec> {
        Some(PowerLawSpec {
            lambda_exponent: self.lambda_exponent()?,
            gamma: self.b.as_ref()?.exponent()?,
            delta: self.q.as_ref()?.exponent()?,
            mask_period: self.mask_period,
            a_rule: self.a.clone()?,
            alpha: self.alpha,
        })
    }

    pub(crate) fn lambda_exponent(&self) -> Option<f64> {
        match self.lambda {
            Coeffs::Power {
                exponent,
                scale: 1.0,
            } => Some(exponent),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<SpectralModel> {
        self.build_with(&DriftRegistry::builtin())
    }

    /// Materializes the coefficient lists and attaches the admissibility
    /// report. Only structural problems are errors; failed conditions are
    /// recorded in the report.
    pub fn build_with(&self, drifts: &DriftRegistry) -> Result<SpectralModel> {
        let n = self.n_modes;
        if n == 0 {
            return Err(Error::Structural("n_modes must be >= 1".into()));
        }
        if self.mask_period == 0 {
            return Err(Error::Structural("mask_period must be >= 1".into()));
        }
        validate_alpha(self.alpha)?;
        let lambda = self.lambda.materialize(n, "lambda")?;
        if lambda[0] <= 0.0 {
            return Err(Error::Structural(format!(
                "eigenvalues must be positive, lambda_1 = {}",
                lambda[0]
            )));
        }
        if let Some(k) = lambda.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Structural(format!(
                "eigenvalues must be nondecreasing, lambda_{} > lambda_{}",
                k + 1,
                k + 2
            )));
        }
        let zeros = || vec![0.0; n];
        let mut b = match &self.b {
            Some(c) => c.materialize(n, "b")?,
            None => zeros(),
        };
        for (k, bk) in b.iter_mut().enumerate() {
            if (k + 1) % self.mask_period != 0 {
                *bk = 0.0;
            }
        }
        let q = match &self.q {
            Some(c) => c.materialize(n, "q")?,
            None => zeros(),
        };
        let a = match &self.a {
            Some(c) => c.materialize(n, "a")?,
            None => zeros(),
        };
        if b.iter().chain(&q).any(|v| *v < 0.0) {
            return Err(Error::Structural(
                "noise coefficients b and q must be >= 0".into(),
            ));
        }
        let drift = drifts.build(&self.drift, n)?;
        let report = check_all(self, H3B1_DEFAULT_TIME)?;
        Ok(SpectralModel {
            definition: self.clone(),
            lambda,
            b,
            q,
            a,
            drift,
            report,
        })
    }
}

/// Model file format. Each coefficient is given either by an exponent
/// (`lambda_exponent`, `gamma`, `delta`, `a_rule`) or by an explicit list
/// (`lambda`, `b`, `q`, `a`), never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_modes: usize,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_rule: Option<Coeffs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default = "default_mask_period")]
    pub mask_period: usize,
    #[serde(default)]
    pub drift: DriftSpec,
}

fn pick(name: &str, rule: &Option<f64>, list: &Option<Vec<f64>>) -> Result<Option<Coeffs>> {
    match (rule, list) {
        (Some(_), Some(_)) => Err(Error::Usage(format!(
            "{name}: give either the exponent or the explicit list, not both"
        ))),
        (Some(e), None) => Ok(Some(Coeffs::power(*e))),
        (None, Some(v)) => Ok(Some(Coeffs::Explicit(v.clone()))),
        (None, None) => Ok(None),
    }
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<ModelDefinition> {
        let lambda = pick("lambda", &self.lambda_exponent, &self.lambda)?.ok_or_else(|| {
            Error::Usage("lambda: one of lambda_exponent or lambda is required".into())
        })?;
        let a = match (&self.a_rule, &self.a) {
            (Some(_), Some(_)) => {
                return Err(Error::Usage(
                    "a: give either a_rule or the explicit list, not both".into(),
                ))
            }
            (Some(r), None) => Some(r.clone()),
            (None, Some(v)) => Some(Coeffs::Explicit(v.clone())),
            (None, None) => None,
        };
        Ok(ModelDefinition {
            n_modes: self.n_modes,
            alpha: self.alpha,
            lambda,
            b: pick("gamma/b", &self.gamma, &self.b)?,
            mask_period: self.mask_period,
            q: pick("delta/q", &self.delta, &self.q)?,
            a,
            drift: self.drift.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("model spec: {e}")))
    }
}

/// Builds an `n_modes` truncation of a power-law family with zero drift.
pub fn build_model(spec: &PowerLawSpec, n_modes: usize) -> Result<SpectralModel> {
    build_model_with_drift(spec, n_modes, DriftSpec::zero())
}

pub fn build_model_with_drift(
    spec: &PowerLawSpec,
    n_modes: usize,
    drift: DriftSpec,
) -> Result<SpectralModel> {
    spec.validate()?;
    spec.definition(n_modes, drift).build()
}

/// Materialized, immutable N-mode model.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    definition: ModelDefinition,
    lambda: Vec<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    a: Vec<f64>,
    drift: Arc<dyn Drift>,
    report: AdmissibilityReport,
}

impl SpectralModel {
    /// Model from explicit coefficient lists.
    pub fn from_lists(
        alpha: f64,
        lambda: Vec<f64>,
        b: Vec<f64>,
        q: Vec<f64>,
        a: Vec<f64>,
        drift: DriftSpec,
    ) -> Result<Self> {
        ModelDefinition {
            n_modes: lambda.len(),
            alpha,
            lambda: Coeffs::Explicit(lambda),
            b: Some(Coeffs::Explicit(b)),
            mask_period: 1,
            q: Some(Coeffs::Explicit(q)),
            a: Some(Coeffs::Explicit(a)),
            drift,
        }
        .build()
    }

    pub fn n_modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn alpha(&self) -> f64 {
        self.definition.alpha
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn drift(&self) -> &dyn Drift {
        self.drift.as_ref()
    }

    pub fn definition(&self) -> &ModelDefinition {
        &self.definition
    }

    pub fn report(&self) -> &AdmissibilityReport {
        &self.report
    }

    /// Exponential stability rate of the semigroup, `‖S_t‖ = e^{-λ_1 t}`.
    pub fn decay_rate(&self) -> f64 {
        self.lambda[0]
    }

    /// SHA-256 of the canonical JSON form of the definition.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.definition).expect("definition serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_equation_coefficients() {
        let spec = PowerLawSpec::heat_equation(1.5, 0.3, 0.5);
        let m = build_model(&spec, 4).unwrap();
        assert_eq!(m.lambda(), &[1.0, 4.0, 9.0, 16.0]);
        let b = [1.0, 1.231144413344916, 1.390389170, 1.515716566510398];
        for (x, y) in m.b().iter().zip(b) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        let q = [1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0];
        for (x, y) in m.q().iter().zip(q) {
            assert!((x - y).abs() < 1e-12);
        }
        let a = [1.0, 0.5, 1.0 / 3.0, 0.25];
        for (x, y) in m.a().iter().zip(a) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(m.report().passed());
    }

    #[test]
    fn inadmissible_model_still_builds() {
        let spec = PowerLawSpec::heat_equation(1.5, 1.0, 0.5);
        let m = build_model(&spec, 8).unwrap();
        let e = m.report().entry(ConditionId::Eq53).unwrap();
        assert!(!e.pass);
        assert!(!m.report().passed());
    }

    #[test]
    fn single_mode_model() {
        let m = build_model(&PowerLawSpec::heat_equation(1.5, 0.3, 0.5), 1).unwrap();
        assert_eq!(m.n_modes(), 1);
        assert_eq!(m.lambda(), &[1.0]);
    }

    #[test]
    fn structural_errors() {
        let spec = PowerLawSpec::heat_equation(1.5, 0.3, 0.5);
        assert!(matches!(build_model(&spec, 0), Err(Error::Structural(_))));
        let bad = SpectralModel::from_lists(
            1.5,
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            DriftSpec::zero(),
        );
        assert!(matches!(bad, Err(Error::Structural(_))));
        let short = SpectralModel::from_lists(
            1.5,
            vec![1.0, 2.0],
            vec![1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            DriftSpec::zero(),
        );
        assert!(matches!(short, Err(Error::Structural(_))));
    }

    #[test]
    fn mask_zeroes_off_mask_modes() {
        let mut spec = PowerLawSpec::heat_equation(1.5, 0.3, 0.5);
        spec.mask_period = 2;
        let m = build_model(&spec, 4).unwrap();
        assert_eq!(m.b()[0], 0.0);
        assert_eq!(m.b()[2], 0.0);
        assert!(m.b()[1] > 0.0 && m.b()[3] > 0.0);
    }

    #[test]
    fn model_spec_json_forms() {
        let text = r#"{"n_modes": 3, "alpha": 1.5, "lambda_exponent": 2, "gamma": 0.3,
            "delta": 0.5, "a_rule": {"exponent": -1}, "mask_period": 1,
            "drift": {"kind": "saturating", "c_f": 1.0, "lipschitz": 1.0, "params": [0.5773502691896258, 1.0]}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        let def = spec.resolve().unwrap();
        assert!(def.power_law().is_some());
        let m = def.build().unwrap();
        assert_eq!(m.drift().name(), "saturating");

        let both = r#"{"n_modes": 1, "alpha": 1.5, "lambda_exponent": 2, "lambda": [1]}"#;
        assert!(ModelSpec::from_json(both).unwrap().resolve().is_err());
        let unknown = r#"{"n_modes": 1, "alpha": 1.5, "lambda_exponent": 2, "colour": 1}"#;
        assert!(ModelSpec::from_json(unknown).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = build_model(&PowerLawSpec::heat_equation(1.5, 0.3, 0.5), 3).unwrap();
        let b = build_model(&PowerLawSpec::heat_equation(1.5, 0.3, 0.5), 3).unwrap();
        let c = build_model(&PowerLawSpec::heat_equation(1.5, 0.3, 0.5), 4).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
