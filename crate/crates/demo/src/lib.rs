//! wasm-bindgen exports used by `www/index.html`.
//!
//! Models are passed as short specs (`gaussian:0`, `intractable:1,1`,
//! `rbm:20,5,0.5`); numeric results come back as flat `Float64Array`s.

use wasm_bindgen::prelude::*;

use sksd::experiments::{estimate_r_star, run_scenario, ModelSpec, ScenarioConfig};
use sksd::models::{BoundScale, GibbsSettings, Model};
use sksd::rng::seeded;
use sksd::{stein_eval, ScoreModel, Strategy};

fn js(e: sksd::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn model(spec: &str) -> Result<Model, JsError> {
    ModelSpec::parse_short(spec).and_then(|s| s.build()).map_err(js)
}

/// `h(x, anchor)` for `x` moving along the first axis over `[lo, hi]`; the
/// anchor is `(a, 0, ..., 0)`. The last entry is `-M(anchor)`.
#[wasm_bindgen]
pub fn kernel_profile(spec: &str, anchor: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let m = model(spec)?;
    if n < 2 || lo.is_nan() || hi.is_nan() || hi <= lo {
        return Err(JsError::new("need n >= 2 and hi > lo"));
    }
    let mut y = vec![0.0; m.dim()];
    y[0] = anchor;
    let mut x = vec![0.0; m.dim()];
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        x[0] = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        out.push(stein_eval(&m, &x, &y).map_err(js)?);
    }
    out.push(-m.payoff_bound(&y, BoundScale::ONE).map_err(js)?);
    Ok(out)
}

/// Replicated wealth paths. Returns `horizon` rows of
/// `[mean log-wealth, 2.5% quantile, 97.5% quantile, rejection proportion]`.
#[wasm_bindgen]
pub fn wealth_band(
    null: &str,
    data: &str,
    strategy: &str,
    alpha: f64,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let strategy: Strategy = strategy.parse().map_err(js)?;
    let mut cfg = ScenarioConfig::simple(
        "demo",
        ModelSpec::parse_short(null).map_err(js)?,
        ModelSpec::parse_short(data).map_err(js)?,
        strategy,
    );
    cfg.alpha = alpha;
    cfg.horizon = horizon;
    cfg.replications = replications;
    cfg.seed = seed;
    cfg.data.burn_in = 200;
    let outcome = run_scenario(&cfg).map_err(js)?;
    Ok(outcome
        .summary
        .iter()
        .flat_map(|r| [r.mean_log_wealth, r.q025_log_wealth, r.q975_log_wealth, r.reject_prop])
        .collect())
}

/// `[r*, mean g*, mean g*^2, se(r*)]`.
#[wasm_bindgen]
pub fn r_star(null: &str, data: &str, outer: usize, inner: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let p = model(null)?;
    let q = model(data)?;
    let gibbs = GibbsSettings { burn_in: 200, thin: 1 };
    let est = estimate_r_star(&p, &q, gibbs, outer, inner, BoundScale::ONE, &mut seeded(seed)).map_err(js)?;
    Ok(vec![est.r_star, est.mean_g, est.mean_g2, est.se_r_star])
}
