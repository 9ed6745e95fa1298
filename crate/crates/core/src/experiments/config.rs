//! JSON configuration for models and simulation scenarios.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::betting::Strategy;
use crate::error::{Error, Result};
use crate::models::{
    BoundScale, GaussianModel, GibbsSettings, IntractableModel, Model, OperatorNorm, RbmModel, ScoreModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormSpec {
    #[default]
    Frobenius,
    Spectral,
}

impl From<NormSpec> for OperatorNorm {
    fn from(n: NormSpec) -> Self {
        match n {
            NormSpec::Frobenius => OperatorNorm::Frobenius,
            NormSpec::Spectral => OperatorNorm::Spectral,
        }
    }
}

fn default_per_hidden() -> usize {
    5
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Model description as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        #[serde(alias = "theta")]
        mean: Vec<f64>,
    },
    Intractable {
        theta: [f64; 2],
    },
    /// Explicit parameters; `weights` is given as `d` rows of length `dh`.
    Rbm {
        #[serde(alias = "B")]
        weights: Vec<Vec<f64>>,
        #[serde(alias = "b")]
        visible_bias: Vec<f64>,
        #[serde(alias = "c")]
        hidden_bias: Vec<f64>,
        #[serde(default, skip_serializing_if = "is_default")]
        operator_norm: NormSpec,
    },
    /// Block-wired RBM: `c = 0`, every hidden unit wired with weight 1 to
    /// `per_hidden` visible units, then every weight shifted by
    /// `weight_shift` and the visible bias set to `visible_bias`.
    RbmBlocks {
        visible: usize,
        hidden: usize,
        #[serde(default = "default_per_hidden")]
        per_hidden: usize,
        #[serde(default)]
        weight_shift: f64,
        #[serde(default)]
        visible_bias: f64,
        #[serde(default, skip_serializing_if = "is_default")]
        operator_norm: NormSpec,
    },
}

impl ModelSpec {
    pub fn gaussian(mean: f64) -> Self {
        ModelSpec::Gaussian { mean: vec![mean] }
    }

    pub fn rbm_blocks(visible: usize, hidden: usize, weight_shift: f64, visible_bias: f64) -> Self {
        ModelSpec::RbmBlocks {
            visible,
            hidden,
            per_hidden: 5,
            weight_shift,
            visible_bias,
            operator_norm: NormSpec::Frobenius,
        }
    }

    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Gaussian { mean } => GaussianModel::new(mean.clone())?.into(),
            ModelSpec::Intractable { theta } => IntractableModel::try_new(*theta)?.into(),
            ModelSpec::Rbm {
                weights,
                visible_bias,
                hidden_bias,
                operator_norm,
            } => {
                let dh = hidden_bias.len();
                if weights.len() != visible_bias.len() || weights.iter().any(|r| r.len() != dh) {
                    return Err(Error::config(
                        "weights",
                        format!("expected {} rows of length {dh}", visible_bias.len()),
                    ));
                }
                let flat = weights.iter().flatten().copied().collect();
                RbmModel::with_norm(flat, visible_bias.clone(), hidden_bias.clone(), (*operator_norm).into())?.into()
            }
            ModelSpec::RbmBlocks {
                visible,
                hidden,
                per_hidden,
                weight_shift,
                visible_bias,
                operator_norm,
            } => {
                let mut m = RbmModel::block_structured(*visible, *hidden, *per_hidden)?;
                if *weight_shift != 0.0 {
                    m = m.shifted_weights(*weight_shift)?;
                }
                if *visible_bias != 0.0 {
                    m = m.with_visible_bias(*visible_bias)?;
                }
                m.with_operator_norm((*operator_norm).into()).into()
            }
        })
    }

    /// Parses the short CLI form: `gaussian[:m1,m2,..]`, `intractable:t1,t2`,
    /// `rbm:d,dh[,shift[,bias]]`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            a.map(|a| {
                a.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Usage(format!("bad number `{v}` in `{s}`")))
                    })
                    .collect()
            })
            .unwrap_or_else(|| Ok(Vec::new()))
        };
        let v = nums(args)?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(ModelSpec::Gaussian {
                mean: if v.is_empty() { vec![0.0] } else { v },
            }),
            "intractable" => match v.as_slice() {
                [] => Ok(ModelSpec::Intractable { theta: [0.0, 0.0] }),
                [a, b] => Ok(ModelSpec::Intractable { theta: [*a, *b] }),
                _ => Err(Error::Usage("intractable takes two parameters".into())),
            },
            "rbm" => match v.as_slice() {
                [d, dh, rest @ ..] if rest.len() <= 2 && *d >= 1.0 && *dh >= 1.0 => Ok(ModelSpec::rbm_blocks(
                    *d as usize,
                    *dh as usize,
                    rest.first().copied().unwrap_or(0.0),
                    rest.get(1).copied().unwrap_or(0.0),
                )),
                _ => Err(Error::Usage("rbm takes d,dh[,shift[,bias]]".into())),
            },
            other => Err(Error::Usage(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Data-generating model plus sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
}

fn default_burn_in() -> usize {
    1000
}

fn default_thin() -> usize {
    1
}

impl DataSpec {
    pub fn new(model: ModelSpec) -> Self {
        DataSpec {
            model,
            burn_in: default_burn_in(),
            thin: default_thin(),
        }
    }

    pub fn gibbs(&self) -> GibbsSettings {
        GibbsSettings {
            burn_in: self.burn_in,
            thin: self.thin,
        }
    }
}

fn default_bound_scale() -> f64 {
    1.0
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Simple null. Ignored when `composite` is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_model: Option<ModelSpec>,
    /// Finite composite null.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Vec<ModelSpec>>,
    pub data: DataSpec,
    pub strategy: Strategy,
    pub alpha: f64,
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_bound_scale")]
    pub bound_scale: f64,
    /// Stop each replication at its first rejection.
    #[serde(default)]
    pub stop_on_reject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A validated scenario with models instantiated.
#[derive(Clone)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub nulls: Vec<Arc<dyn ScoreModel>>,
    pub composite: bool,
    pub data: Model,
    pub gibbs: GibbsSettings,
    pub scale: BoundScale,
}

impl ScenarioConfig {
    pub fn simple(name: &str, null: ModelSpec, data: ModelSpec, strategy: Strategy) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            null_model: Some(null),
            composite: None,
            data: DataSpec::new(data),
            strategy,
            alpha: 0.05,
            horizon: 100,
            replications: 1000,
            seed: 0,
            bound_scale: 1.0,
            stop_on_reject: false,
            output: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Short stable identifier of the configuration contents.
    pub fn scenario_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.replications < 1 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.data.thin < 1 {
            return Err(Error::config("data.thin", "must be at least 1"));
        }
        let scale = BoundScale::new(self.bound_scale).map_err(|e| Error::config("bound_scale", e.to_string()))?;
        self.strategy
            .validate()
            .map_err(|e| Error::config("strategy", e.to_string()))?;
        let (specs, composite) = match (&self.composite, &self.null_model) {
            (Some(family), _) if family.is_empty() => return Err(Error::config("composite", "must not be empty")),
            (Some(family), _) => (family.clone(), true),
            (None, Some(null)) => (vec![null.clone()], false),
            (None, None) => {
                return Err(Error::config(
                    "null_model",
                    "either null_model or composite is required",
                ))
            }
        };
        let data = self
            .data
            .model
            .build()
            .map_err(|e| Error::config("data", e.to_string()))?;
        let mut nulls: Vec<Arc<dyn ScoreModel>> = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let field = if composite {
                format!("composite[{i}]")
            } else {
                "null_model".into()
            };
            let m = spec.build().map_err(|e| Error::config(field.clone(), e.to_string()))?;
            if m.dim() != data.dim() {
                return Err(Error::config(
                    field,
                    format!("dimension {} does not match data dimension {}", m.dim(), data.dim()),
                ));
            }
            nulls.push(Arc::new(m));
        }
        Ok(ResolvedScenario {
            config: self.clone(),
            nulls,
            composite,
            data,
            gibbs: self.data.gibbs(),
            scale,
        })
    }
}
