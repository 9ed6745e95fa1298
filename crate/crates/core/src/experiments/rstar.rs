//! Monte Carlo estimate of the asymptotic log-wealth growth rate and the
//! stopping-time bound it implies.

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::harness::{par_map, run_replication};
use super::stats::{mean, quantile_sorted, std_error};
use crate::error::{Error, Result};
use crate::kernel::stein_from_scores;
use crate::models::{BoundScale, GibbsSettings, Model, PointStream, ScoreModel};
use crate::rng::SimRng;

/// Smallest accepted outer and inner sample size.
pub const MIN_RSTAR_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStarEstimate {
    pub mean_g: f64,
    pub mean_g2: f64,
    pub se_g: f64,
    pub se_g2: f64,
    pub r_star: f64,
    /// Delta-method standard error of `r_star`; zero when `mean_g <= 0`.
    pub se_r_star: f64,
    /// False when `mean_g <= 0`, i.e. no exponential growth is predicted.
    pub positive: bool,
    pub n_outer: usize,
    pub n_inner: usize,
}

/// `mean_g^2 / 2 / (mean_g + mean_g2)` when `mean_g > 0`, else 0.
pub fn r_star_from_moments(mean_g: f64, mean_g2: f64) -> f64 {
    if mean_g > 0.0 {
        mean_g * mean_g / 2.0 / (mean_g + mean_g2)
    } else {
        0.0
    }
}

struct Sample {
    dim: usize,
    points: Vec<f64>,
    scores: Vec<f64>,
}

fn draw_scored(
    null: &dyn ScoreModel,
    data: &Model,
    gibbs: GibbsSettings,
    n: usize,
    rng: &mut SimRng,
    mut on_point: impl FnMut(&[f64], &[f64]),
) -> Result<Sample> {
    let dim = null.dim();
    let mut stream = PointStream::new(data, gibbs, rng)?;
    let mut s = Sample {
        dim,
        points: Vec::with_capacity(n * dim),
        scores: Vec::with_capacity(n * dim),
    };
    for _ in 0..n {
        let x = stream.next_point(rng)?;
        let sx = null.score(&x)?;
        on_point(&x, &sx);
        s.points.extend_from_slice(&x);
        s.scores.extend_from_slice(&sx);
    }
    Ok(s)
}

/// Nested Monte Carlo estimate of `r*` for testing `null` on data from
/// `data`.
///
/// One inner sample of size `n_inner` estimates `E[h(X, x)]` and `E[M(X)]`
/// for every outer point; `n_outer` fresh points average `g*` and `g*^2`.
pub fn estimate_r_star(
    null: &dyn ScoreModel,
    data: &Model,
    gibbs: GibbsSettings,
    n_outer: usize,
    n_inner: usize,
    scale: BoundScale,
    rng: &mut SimRng,
) -> Result<RStarEstimate> {
    if n_outer < MIN_RSTAR_DRAWS || n_inner < MIN_RSTAR_DRAWS {
        return Err(Error::Usage(format!(
            "r* needs at least {MIN_RSTAR_DRAWS} outer and inner draws, got {n_outer} and {n_inner}"
        )));
    }
    if null.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: null.dim(),
            got: data.dim(),
        });
    }
    let mut m_sum = 0.0;
    let inner = draw_scored(null, data, gibbs, n_inner, rng, |x, sx| {
        m_sum += null.bound_given_score(x, sx);
    })?;
    let m_mean = scale.get() * m_sum / n_inner as f64;
    let outer = draw_scored(null, data, gibbs, n_outer, rng, |_, _| {})?;

    let d = inner.dim;
    let g: Vec<f64> = par_map(n_outer, |i| {
        let x = &outer.points[i * d..(i + 1) * d];
        let sx = &outer.scores[i * d..(i + 1) * d];
        let h: f64 = inner
            .points
            .chunks_exact(d)
            .zip(inner.scores.chunks_exact(d))
            .map(|(xj, sj)| stein_from_scores(xj, sj, x, sx))
            .sum();
        h / n_inner as f64 / m_mean
    });
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("g*"));
    }
    let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
    let (mean_g, mean_g2) = (mean(&g), mean(&g2));
    let r_star = r_star_from_moments(mean_g, mean_g2);
    let se_r_star = if mean_g > 0.0 {
        // gradient of r* in (mean_g, mean_g2), applied to per-draw values
        let denom = 2.0 * (mean_g + mean_g2).powi(2);
        let dm = (mean_g * mean_g + 2.0 * mean_g * mean_g2) / denom;
        let ds = -mean_g * mean_g / denom;
        let lin: Vec<f64> = g.iter().zip(&g2).map(|(a, b)| dm * a + ds * b).collect();
        std_error(&lin)
    } else {
        0.0
    };
    Ok(RStarEstimate {
        mean_g,
        mean_g2,
        se_g: std_error(&g),
        se_g2: std_error(&g2),
        r_star,
        se_r_star,
        positive: mean_g > 0.0,
        n_outer,
        n_inner,
    })
}

/// Empirical stopping times against `log(1/alpha) / r*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingBoundRow {
    pub scenario: String,
    pub method: String,
    pub r_star: f64,
    pub bound: f64,
    /// Censored replications count as the horizon.
    pub mean_tau: f64,
    pub q025_tau: f64,
    pub q975_tau: f64,
    pub censored: usize,
    pub replications: usize,
    pub horizon: usize,
}

/// Runs every replication until rejection or `cfg.horizon`.
pub fn stopping_bound_check(cfg: &ScenarioConfig, r_star: f64) -> Result<StoppingBoundRow> {
    if !(r_star > 0.0 && r_star.is_finite()) {
        return Err(Error::Usage(format!("stopping bound needs r* > 0, got {r_star}")));
    }
    let mut cfg = cfg.clone();
    cfg.stop_on_reject = true;
    let sc = cfg.resolve()?;
    let reps = par_map(cfg.replications, |i| run_replication(&sc, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut taus: Vec<f64> = reps
        .iter()
        .map(|r| r.stopping_time.unwrap_or(cfg.horizon) as f64)
        .collect();
    let censored = reps.iter().filter(|r| r.stopping_time.is_none()).count();
    let mean_tau = mean(&taus);
    taus.sort_by(|a, b| a.total_cmp(b));
    Ok(StoppingBoundRow {
        scenario: cfg.name.clone(),
        method: cfg.strategy.name().to_string(),
        r_star,
        bound: (1.0 / cfg.alpha).ln() / r_star,
        mean_tau,
        q025_tau: quantile_sorted(&taus, 0.025),
        q975_tau: quantile_sorted(&taus, 0.975),
        censored,
        replications: cfg.replications,
        horizon: cfg.horizon,
    })
}
