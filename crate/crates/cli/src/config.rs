use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spde_ergo::{Error, ModelSpec, PathConfig, Result, SpectralModel};

pub const SCHEMA_VERSION: u32 = 1;

/// An initial condition: an explicit coordinate vector, or a norm placed
/// along the first mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Norm(f64),
    Vector(Vec<f64>),
}

impl InitialCondition {
    pub fn coords(&self, n_modes: usize) -> Result<Vec<f64>> {
        match self {
            Self::Norm(r) => {
                let mut x = vec![0.0; n_modes];
                x[0] = *r;
                Ok(x)
            }
            Self::Vector(v) if v.len() == n_modes => Ok(v.clone()),
            Self::Vector(v) => Err(Error::Usage(format!(
                "x_list: vector of length {} for a {n_modes}-mode model",
                v.len()
            ))),
        }
    }
}

/// Experiment file. Exactly one of `model` (inline) and `model_file`
/// (resolved relative to the config file) must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_moment: Option<f64>,
    /// 1-based mode indices of the TV projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_list: Option<Vec<InitialCondition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_burn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_max_iter: Option<usize>,
}

/// A config with every default filled in and the model inlined; its JSON
/// form is what output files embed as provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub seed: Option<u64>,
    pub scheme: String,
    pub step: f64,
    pub horizon: Option<f64>,
    pub time_grid: Option<Vec<f64>>,
    pub m_paths: usize,
    pub p_moment: f64,
    pub dims: Vec<usize>,
    pub bins: usize,
    pub x_list: Vec<InitialCondition>,
    pub t_burn: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_M_PATHS: usize = 1000;
pub const DEFAULT_BINS: usize = 64;

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Usage(format!("config field '{path}': {}", e.inner()))
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

impl ExperimentConfig {
    /// Fills defaults, inlines the model and applies command-line overrides.
    /// `base` is the directory relative to which `model_file` is read.
    pub fn resolve(
        &self,
        base: &Path,
        seed: Option<u64>,
        scheme: Option<&str>,
    ) -> Result<(Resolved, SpectralModel)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Usage(format!(
                "config field 'schema_version': expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        let model = match (&self.model, &self.model_file) {
            (Some(m), None) => m.clone(),
            (None, Some(p)) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Usage(format!(
                        "config field 'model_file': {}: {e}",
                        path.display()
                    ))
                })?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| {
                    Error::Usage(format!("model file field '{}': {}", e.path(), e.inner()))
                })?
            }
            (Some(_), Some(_)) => {
                return Err(Error::Usage(
                    "config: give either 'model' or 'model_file', not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Usage(
                    "config: one of 'model' or 'model_file' is required".into(),
                ))
            }
        };
        let built = model.resolve()?.build()?;
        let n = built.n_modes();
        let dims = self.dims.clone().unwrap_or_else(|| vec![1]);
        if let Some(d) = dims.iter().find(|&&d| d == 0 || d > n) {
            return Err(Error::Usage(format!(
                "config field 'dims': mode {d} outside 1..={n}"
            )));
        }
        let x_list = self
            .x_list
            .clone()
            .unwrap_or_else(|| vec![InitialCondition::Norm(0.0)]);
        for x in &x_list {
            x.coords(n)?;
        }
        let resolved = Resolved {
            schema_version: self.schema_version,
            model,
            seed: seed.or(self.seed),
            scheme: scheme
                .map(str::to_string)
                .or_else(|| self.scheme.clone())
                .unwrap_or_else(|| "exp_euler".into()),
            step: self.step.unwrap_or(DEFAULT_STEP),
            horizon: self.horizon,
            time_grid: self.time_grid.clone(),
            m_paths: self.m_paths.unwrap_or(DEFAULT_M_PATHS),
            p_moment: self.p_moment.unwrap_or(built.alpha() / 2.0),
            dims,
            bins: self.bins.unwrap_or(DEFAULT_BINS),
            x_list,
            t_burn: self.t_burn.unwrap_or(20.0 / built.decay_rate()),
            picard_tol: self.picard_tol.unwrap_or(1e-12),
            picard_max_iter: self.picard_max_iter.unwrap_or(200),
        };
        Ok((resolved, built))
    }
}

impl Resolved {
    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::Usage("a seed is required: set 'seed' in the config or pass --seed".into())
        })
    }

    /// Snapshot times: the explicit grid, else the horizon alone.
    pub fn times(&self) -> Result<Vec<f64>> {
        match (&self.time_grid, self.horizon) {
            (Some(g), _) if !g.is_empty() => Ok(g.clone()),
            (_, Some(t)) => Ok(vec![t]),
            _ => Err(Error::Usage(
                "config: 'time_grid' or 'horizon' is required for this command".into(),
            )),
        }
    }

    pub fn path_config(&self, horizon: f64) -> PathConfig {
        let mut c = PathConfig::new(self.step, horizon).with_scheme(&self.scheme);
        c.picard_tol = self.picard_tol;
        c.picard_max_iter = self.picard_max_iter;
        c
    }

    pub fn dims0(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d - 1).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "model": {"n_modes": 3, "alpha": 1.5, "lambda_exponent": 2, "gamma": 0.3, "delta": 0.5}
    }"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = parse(MINIMAL).unwrap();
        let (r, model) = cfg.resolve(Path::new("."), Some(7), None).unwrap();
        assert_eq!(r.seed().unwrap(), 7);
        assert_eq!(r.scheme, "exp_euler");
        assert_eq!(r.p_moment, 0.75);
        assert_eq!(r.dims0(), vec![0]);
        assert_eq!(r.t_burn, 20.0);
        assert_eq!(model.n_modes(), 3);
    }

    #[test]
    fn unknown_fields_report_their_path() {
        let text = MINIMAL.replace("\"delta\"", "\"delt\"");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
        let err = parse(r#"{"schema_version": 1, "sede": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sede"), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let (r, _) = parse(MINIMAL)
            .unwrap()
            .resolve(Path::new("."), None, None)
            .unwrap();
        assert!(r.seed().is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(parse(&text)
            .unwrap()
            .resolve(Path::new("."), Some(1), None)
            .is_err());
    }

    #[test]
    fn initial_conditions() {
        assert_eq!(
            InitialCondition::Norm(5.0).coords(3).unwrap(),
            vec![5.0, 0.0, 0.0]
        );
        assert!(InitialCondition::Vector(vec![1.0]).coords(3).is_err());
    }
}
