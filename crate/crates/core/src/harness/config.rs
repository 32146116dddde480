//! Experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coupling::{Coupling, ResyncKind, ResyncSchedule, SynceArParams};
use crate::density::{GaussianSpec, ParamVector};
use crate::estimator::Level0Sampler;
use crate::linalg::{cholesky_psd, Matrix};
use crate::models::ModelKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Coarse,
    Independent,
    Maximal,
    Synce,
    SynceA,
    SynceAr,
}

impl CouplingKind {
    fn allowed_params(self) -> &'static [&'static str] {
        const ADAPTIVE: &[&str] = &[
            "omega",
            "resync_kind",
            "resync_cov",
            "t_sub",
            "target_alpha",
            "initial_scale",
            "initial_sigma",
            "warm_start",
        ];
        match self {
            CouplingKind::Coarse => &["proposal_cov", "t_sub"],
            CouplingKind::Independent => &["imh_mean", "imh_cov"],
            CouplingKind::Maximal | CouplingKind::Synce => &["proposal_cov"],
            CouplingKind::SynceA => &["target_alpha", "initial_scale", "initial_sigma", "warm_start"],
            CouplingKind::SynceAr => ADAPTIVE,
        }
    }

    fn required_params(self) -> &'static [&'static str] {
        match self {
            CouplingKind::Coarse | CouplingKind::Maximal | CouplingKind::Synce => &["proposal_cov"],
            CouplingKind::Independent => &["imh_mean", "imh_cov"],
            CouplingKind::SynceA | CouplingKind::SynceAr => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptedTag {
    Adapted,
}

/// Resync proposal covariance: the averaged adapted covariances, or a fixed matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResyncCov {
    Adapted(AdaptedTag),
    Fixed(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sub: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imh_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imh_cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resync_kind: Option<ResyncKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resync_cov: Option<ResyncCov>,
    /// Target acceptance of the coupled levels; defaults to the top-level value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sigma: Option<Vec<Vec<f64>>>,
    /// Carry each level's final fine-chain adaptation into the next level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level0Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_cov: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_true")]
    pub adapt: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_scale: Option<f64>,
}

fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    0.44
}
fn default_gamma() -> f64 {
    0.7
}
fn default_replicates() -> usize {
    1
}
fn default_stall() -> Option<usize> {
    Some(1000)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(rename = "L")]
    pub max_level: usize,
    pub n_samples: Vec<usize>,
    pub burn_in: Vec<usize>,
    pub coupling: CouplingKind,
    #[serde(default)]
    pub coupling_params: CouplingParams,
    #[serde(default)]
    pub level0: Level0Params,
    #[serde(default = "default_alpha")]
    pub target_alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma_exponent: f64,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    pub output_dir: PathBuf,
    /// Consecutive rejections before a run aborts; `null` disables the check.
    #[serde(default = "default_stall")]
    pub stall_limit: Option<usize>,
}

const TOP_KEYS: &[&str] = &[
    "model",
    "L",
    "n_samples",
    "burn_in",
    "coupling",
    "coupling_params",
    "level0",
    "target_alpha",
    "gamma_exponent",
    "seed",
    "n_replicates",
    "output_dir",
    "stall_limit",
];
const REQUIRED_KEYS: &[&str] = &["model", "L", "n_samples", "burn_in", "coupling", "seed", "output_dir"];
const LEVEL0_KEYS: &[&str] = &["proposal_cov", "adapt", "initial_scale"];

fn object_keys(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_object).map(|m| m.keys().cloned().collect()).unwrap_or_default()
}

/// Key-level checks that serde reports one at a time: all unknown and all missing keys.
fn precheck(raw: &Value) -> Result<(), ConfigError> {
    let obj = raw.as_object().ok_or_else(|| invalid("<root>", "expected a JSON object"))?;
    let mut unknown: Vec<String> = obj.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())).cloned().collect();
    unknown.extend(
        object_keys(obj.get("level0"))
            .into_iter()
            .filter(|k| !LEVEL0_KEYS.contains(&k.as_str()))
            .map(|k| format!("level0.{k}")),
    );
    let coupling: Option<CouplingKind> = obj.get("coupling").and_then(|c| serde_json::from_value(c.clone()).ok());
    let params = object_keys(obj.get("coupling_params"));
    if let Some(kind) = coupling {
        unknown.extend(
            params
                .iter()
                .filter(|k| !kind.allowed_params().contains(&k.as_str()))
                .map(|k| format!("coupling_params.{k}")),
        );
    }
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let mut missing: Vec<String> = REQUIRED_KEYS.iter().filter(|k| !obj.contains_key(**k)).map(|k| k.to_string()).collect();
    if let Some(kind) = coupling {
        missing.extend(
            kind.required_params()
                .iter()
                .filter(|k| !params.iter().any(|p| p == *k))
                .map(|k| format!("coupling_params.{k}")),
        );
    }
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    Ok(())
}

fn matrix(field: &str, rows: &[Vec<f64>], d: usize) -> Result<Matrix<f64>, ConfigError> {
    let m = Matrix::from_rows(rows).map_err(|e| invalid(field, e.to_string()))?;
    if m.dim() != d {
        return Err(invalid(field, format!("expected a {d}x{d} matrix, got {0}x{0}", m.dim())));
    }
    cholesky_psd(&m).map_err(|e| invalid(field, e.to_string()))?;
    Ok(m)
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: Value = serde_json::from_str(text)?;
        precheck(&raw)?;
        let mut cfg: ExperimentConfig = serde_json::from_value(raw)?;
        cfg.validate()?;
        cfg.resolve_defaults();
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let levels = self.max_level + 1;
        let d = self.dim();
        if self.n_samples.len() != levels {
            return Err(invalid("n_samples", format!("expected {levels} entries (L + 1), got {}", self.n_samples.len())));
        }
        if self.burn_in.len() != levels {
            return Err(invalid("burn_in", format!("expected {levels} entries (L + 1), got {}", self.burn_in.len())));
        }
        for (l, (&n, &b)) in self.n_samples.iter().zip(&self.burn_in).enumerate() {
            if n <= b {
                return Err(invalid("n_samples", format!("level {l}: {n} samples do not exceed burn-in {b}")));
            }
        }
        if !(self.target_alpha > 0.0 && self.target_alpha < 1.0) {
            return Err(invalid("target_alpha", "must lie in (0, 1)"));
        }
        if !(self.gamma_exponent > 0.5 && self.gamma_exponent <= 1.0) {
            return Err(invalid("gamma_exponent", "must lie in (0.5, 1]"));
        }
        if self.n_replicates == 0 {
            return Err(invalid("n_replicates", "must be at least 1"));
        }
        if self.stall_limit == Some(0) {
            return Err(invalid("stall_limit", "must be positive or null"));
        }
        if let Some(c) = &self.level0.proposal_cov {
            matrix("level0.proposal_cov", c, d)?;
        }
        if let Some(s) = self.level0.initial_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("level0.initial_scale", "must be positive"));
            }
        }
        let p = &self.coupling_params;
        if let Some(c) = &p.proposal_cov {
            matrix("coupling_params.proposal_cov", c, d)?;
        }
        if let Some(c) = &p.imh_cov {
            matrix("coupling_params.imh_cov", c, d)?;
        }
        if let Some(c) = &p.initial_sigma {
            matrix("coupling_params.initial_sigma", c, d)?;
        }
        if let Some(ResyncCov::Fixed(c)) = &p.resync_cov {
            matrix("coupling_params.resync_cov", c, d)?;
        }
        if let Some(m) = &p.imh_mean {
            if m.len() != d || m.iter().any(|v| !v.is_finite()) {
                return Err(invalid("coupling_params.imh_mean", format!("expected {d} finite entries")));
            }
        }
        if let Some(w) = &p.omega {
            if w.len() != self.max_level {
                return Err(invalid("coupling_params.omega", format!("expected {} entries (one per level 1..L), got {}", self.max_level, w.len())));
            }
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid("coupling_params.omega", "weights must lie in [0, 1]"));
            }
        }
        if p.t_sub == Some(0) {
            return Err(invalid("coupling_params.t_sub", "must be at least 1"));
        }
        if let Some(a) = p.target_alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid("coupling_params.target_alpha", "must lie in (0, 1)"));
            }
        }
        if let Some(s) = p.initial_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("coupling_params.initial_scale", "must be positive"));
            }
        }
        Ok(())
    }

    /// Fills every defaulted setting so the echoed config is complete.
    fn resolve_defaults(&mut self) {
        let d = self.dim();
        let identity = || (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        if self.level0.proposal_cov.is_none() {
            self.level0.proposal_cov = Some(identity());
        }
        let adaptive = matches!(self.coupling, CouplingKind::SynceA | CouplingKind::SynceAr);
        let p = &mut self.coupling_params;
        if adaptive {
            p.target_alpha.get_or_insert(self.target_alpha);
            p.initial_sigma.get_or_insert_with(identity);
            p.warm_start.get_or_insert(false);
        }
        if self.coupling == CouplingKind::SynceAr {
            if p.omega.is_none() {
                p.omega = Some(ResyncSchedule::<f64>::default_for(self.max_level).weights);
            }
            p.resync_kind.get_or_insert(ResyncKind::Independent);
            p.resync_cov.get_or_insert(ResyncCov::Adapted(AdaptedTag::Adapted));
        }
    }

    /// Warnings about settings that are legal but unusual.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(om) = &self.coupling_params.omega {
            if om.windows(2).any(|p| p[0] > p[1]) {
                w.push("resync weights decrease with level".to_string());
            }
        }
        w
    }

    pub fn level0_sampler(&self) -> Level0Sampler<f64> {
        let d = self.dim();
        let cov = self.level0.proposal_cov.as_ref().map(|c| Matrix::from_rows(c).expect("validated")).unwrap_or_else(|| Matrix::identity(d));
        Level0Sampler {
            proposal_cov: cov,
            adapt: self.level0.adapt,
            target_alpha: self.target_alpha,
            gamma_exponent: self.gamma_exponent,
            initial_scale: self.level0.initial_scale,
        }
    }

    pub fn build_coupling(&self) -> Result<Coupling<f64>, ConfigError> {
        let p = &self.coupling_params;
        let mat = |m: &Option<Vec<Vec<f64>>>, field: &str| -> Result<Matrix<f64>, ConfigError> {
            let rows = m.as_ref().ok_or_else(|| ConfigError::MissingKeys(vec![format!("coupling_params.{field}")]))?;
            matrix(&format!("coupling_params.{field}"), rows, self.dim())
        };
        Ok(match self.coupling {
            CouplingKind::Coarse => Coupling::CoarseProposal {
                proposal_cov: mat(&p.proposal_cov, "proposal_cov")?,
                t_sub: p.t_sub,
            },
            CouplingKind::Independent => {
                let mean = ParamVector::new(p.imh_mean.clone().unwrap_or_default()).map_err(|e| invalid("coupling_params.imh_mean", e.to_string()))?;
                let imh = GaussianSpec::new(mean, mat(&p.imh_cov, "imh_cov")?).map_err(|e| invalid("coupling_params.imh_cov", e.to_string()))?;
                Coupling::Independent { imh }
            }
            CouplingKind::Maximal => Coupling::Maximal {
                proposal_cov: mat(&p.proposal_cov, "proposal_cov")?,
            },
            CouplingKind::Synce => Coupling::Synce {
                proposal_cov: mat(&p.proposal_cov, "proposal_cov")?,
            },
            CouplingKind::SynceA | CouplingKind::SynceAr => {
                let weights = match self.coupling {
                    CouplingKind::SynceA => vec![0.0; self.max_level],
                    _ => p.omega.clone().unwrap_or_else(|| ResyncSchedule::<f64>::default_for(self.max_level).weights),
                };
                let kind = p.resync_kind.unwrap_or(ResyncKind::Independent);
                let schedule = ResyncSchedule::new(weights, kind).map_err(|e| invalid("coupling_params.omega", e.to_string()))?;
                let resync_cov = match &p.resync_cov {
                    Some(ResyncCov::Fixed(rows)) => Some(matrix("coupling_params.resync_cov", rows, self.dim())?),
                    _ => None,
                };
                let initial_sigma = match &p.initial_sigma {
                    Some(rows) => Some(matrix("coupling_params.initial_sigma", rows, self.dim())?),
                    None => None,
                };
                Coupling::SynceAr(SynceArParams {
                    schedule,
                    resync_cov,
                    t_sub: p.t_sub,
                    target_alpha: p.target_alpha.unwrap_or(self.target_alpha),
                    gamma_exponent: self.gamma_exponent,
                    initial_scale: p.initial_scale,
                    initial_sigma,
                    warm_start: p.warm_start.unwrap_or(false),
                })
            }
        })
    }

    /// Canonical JSON of the resolved config.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "model": "shifting", "L": 2, "n_samples": [100, 100, 100], "burn_in": [10, 10, 10],
        "coupling": "synce", "coupling_params": {"proposal_cov": [[3.0]]},
        "seed": 1, "output_dir": "out"
    }"#;

    fn with(patch: &str) -> String {
        let mut v: Value = serde_json::from_str(BASE).unwrap();
        let p: Value = serde_json::from_str(patch).unwrap();
        for (k, val) in p.as_object().unwrap() {
            if val.is_null() {
                v.as_object_mut().unwrap().remove(k);
            } else {
                v[k] = val.clone();
            }
        }
        v.to_string()
    }

    #[test]
    fn parses_and_resolves_defaults() {
        let c = ExperimentConfig::from_json_str(BASE).unwrap();
        assert_eq!(c.max_level, 2);
        assert_eq!(c.target_alpha, 0.44);
        assert_eq!(c.n_replicates, 1);
        assert_eq!(c.stall_limit, Some(1000));
        assert_eq!(c.level0.proposal_cov, Some(vec![vec![1.0]]));
        let echoed = ExperimentConfig::from_json_str(&c.to_json_pretty()).unwrap();
        assert_eq!(echoed, c);
    }

    #[test]
    fn wrong_list_length_names_the_field() {
        let e = ExperimentConfig::from_json_str(&with(r#"{"n_samples": [100, 100]}"#)).unwrap_err();
        assert!(matches!(&e, ConfigError::Invalid { field, .. } if field == "n_samples"), "{e}");
    }

    #[test]
    fn unknown_keys_are_all_reported() {
        let e = ExperimentConfig::from_json_str(&with(r#"{"sede": 3, "levels": 2}"#)).unwrap_err();
        match e {
            ConfigError::UnknownKeys(k) => assert_eq!(k, vec!["levels".to_string(), "sede".to_string()]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn parameters_foreign_to_the_coupling_are_rejected() {
        let e = ExperimentConfig::from_json_str(&with(r#"{"coupling_params": {"proposal_cov": [[3.0]], "omega": [0.1, 0.2]}}"#)).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKeys(ref k) if k == &vec!["coupling_params.omega".to_string()]));
    }

    #[test]
    fn missing_keys_are_listed_together() {
        let e = ExperimentConfig::from_json_str(&with(r#"{"seed": null, "output_dir": null, "coupling_params": {}}"#)).unwrap_err();
        match e {
            ConfigError::MissingKeys(k) => {
                assert_eq!(k, vec!["seed".to_string(), "output_dir".to_string(), "coupling_params.proposal_cov".to_string()])
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn synce_ar_defaults_schedule() {
        let c = ExperimentConfig::from_json_str(&with(r#"{"coupling": "synce_ar", "coupling_params": {}}"#)).unwrap();
        assert_eq!(c.coupling_params.omega, Some(vec![0.0, 0.5]));
        assert_eq!(c.coupling_params.resync_cov, Some(ResyncCov::Adapted(AdaptedTag::Adapted)));
        assert!(matches!(c.build_coupling().unwrap(), Coupling::SynceAr(_)));
    }

    #[test]
    fn resync_cov_accepts_matrix() {
        let c = ExperimentConfig::from_json_str(&with(r#"{"coupling": "synce_ar", "coupling_params": {"omega": [0.0, 0.5], "resync_cov": [[3.0]]}}"#)).unwrap();
        match c.build_coupling().unwrap() {
            Coupling::SynceAr(p) => assert_eq!(p.resync_cov, Some(Matrix::identity(1).scale(3.0))),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bad_matrix_and_ranges_rejected() {
        assert!(ExperimentConfig::from_json_str(&with(r#"{"coupling_params": {"proposal_cov": [[-1.0]]}}"#)).is_err());
        assert!(ExperimentConfig::from_json_str(&with(r#"{"coupling_params": {"proposal_cov": [[1.0, 0.0], [0.0, 1.0]]}}"#)).is_err());
        assert!(ExperimentConfig::from_json_str(&with(r#"{"gamma_exponent": 0.4}"#)).is_err());
        assert!(ExperimentConfig::from_json_str(&with(r#"{"burn_in": [10, 100, 10]}"#)).is_err());
        assert!(ExperimentConfig::from_json_str("[1, 2]").is_err());
        assert!(ExperimentConfig::from_json_str("{").is_err());
    }

    #[test]
    fn stall_limit_null_disables() {
        let c = ExperimentConfig::from_json_str(&with(r#"{"stall_limit": "__null__"}"#).replace("\"__null__\"", "null")).unwrap();
        assert_eq!(c.stall_limit, None);
    }
}
