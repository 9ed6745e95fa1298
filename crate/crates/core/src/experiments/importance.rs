//! Importance-sampling estimate of the probability that the test ever
//! rejects under the null.

use serde::{Deserialize, Serialize};

use super::config::{ModelSpec, ScenarioConfig};
use super::harness::{par_map, run_stream};
use super::stats::{mean, std_error};
use crate::error::{Error, Result};
use crate::models::{GaussianModel, Model};
use crate::rng::replication_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub rejections: usize,
    pub replications: usize,
    pub horizon: usize,
}

fn gaussian(spec: &ModelSpec, field: &str) -> Result<GaussianModel> {
    match spec.build()? {
        Model::Gaussian(g) => Ok(g),
        other => Err(Error::Unsupported(format!(
            "importance weights need closed-form densities; {field} is {}",
            other.kind()
        ))),
    }
}

/// Streams are drawn from the proposal `cfg.data` and tested against the
/// null `cfg.null_model`; each replication contributes the likelihood ratio
/// of its observed prefix if it rejected by `cfg.horizon`, otherwise 0.
///
/// The estimate targets the probability of rejecting within the horizon,
/// which approaches the ever-reject probability as the horizon grows.
pub fn importance_type1(cfg: &ScenarioConfig) -> Result<ImportanceEstimate> {
    if cfg.composite.is_some() {
        return Err(Error::Unsupported("importance sampling for composite nulls".into()));
    }
    let null_spec = cfg
        .null_model
        .as_ref()
        .ok_or_else(|| Error::config("null_model", "required"))?;
    let p = gaussian(null_spec, "null_model")?;
    let q = gaussian(&cfg.data.model, "data")?;
    let mut cfg = cfg.clone();
    cfg.stop_on_reject = true;
    let sc = cfg.resolve()?;

    let weights = par_map(cfg.replications, |i| -> Result<f64> {
        let mut rng = replication_rng(cfg.seed, i as u64);
        let mut log_ratio = 0.0;
        let (_, tau) = run_stream(&sc, &mut rng, |x| log_ratio += p.log_density(x) - q.log_density(x))?;
        Ok(if tau.is_some() { log_ratio.exp() } else { 0.0 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceEstimate {
        estimate: mean(&weights),
        std_error: std_error(&weights),
        rejections: weights.iter().filter(|w| **w > 0.0).count(),
        replications: cfg.replications,
        horizon: cfg.horizon,
    })
}
