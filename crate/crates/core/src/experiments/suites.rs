//! Named experiment suites; each writes the CSV bundle behind one figure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ModelSpec, ScenarioConfig};
use super::harness::{par_map, run_scenario, write_csv, write_outcome, ScenarioOutcome, SummaryRow};
use super::importance::importance_type1;
use super::rstar::{estimate_r_star, stopping_bound_check};
use crate::batch::{sequentialized_batch, SteinGram, DEFAULT_BOOTSTRAP_DRAWS};
use crate::betting::Strategy;
use crate::error::{Error, Result};
use crate::models::{BoundScale, Model};
use crate::rng::{replication_rng, seeded};

pub const SUITES: [&str; 10] = [
    "gaussian_alt",
    "intractable_alt",
    "rbm_shiftB",
    "rbm_bias",
    "type1",
    "batch_vs_seq",
    "composite",
    "bound_tightness",
    "ons_compare",
    "stopping_bound",
];

pub const BATCH_THETAS: [f64; 6] = [0.40, 0.42, 0.44, 0.46, 0.48, 0.50];
pub const BATCH_SIZES: [usize; 5] = [20, 50, 100, 200, 400];

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub alpha: f64,
    /// Overrides every scenario's replication count.
    pub replications: Option<usize>,
    /// Overrides every scenario's horizon.
    pub horizon: Option<usize>,
    /// Full-size RBMs (`d = 50`, `d_h = 10`) and larger r* budgets.
    pub full: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            out_dir: PathBuf::from("results"),
            seed: 0,
            alpha: 0.05,
            replications: None,
            horizon: None,
            full: false,
        }
    }
}

impl SuiteOptions {
    fn rbm_size(&self) -> (usize, usize) {
        if self.full {
            (50, 10)
        } else {
            (20, 5)
        }
    }

    fn rbm(&self, shift: f64, bias: f64) -> ModelSpec {
        let (d, dh) = self.rbm_size();
        ModelSpec::rbm_blocks(d, dh, shift, bias)
    }

    fn scenario(
        &self,
        name: &str,
        null: ModelSpec,
        data: ModelSpec,
        strategy: Strategy,
        reps: usize,
        horizon: usize,
    ) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::simple(name, null, data, strategy);
        cfg.alpha = self.alpha;
        cfg.seed = self.seed;
        cfg.replications = self.replications.unwrap_or(reps);
        cfg.horizon = self.horizon.unwrap_or(horizon);
        cfg
    }
}

/// Mean log-wealth growth per round between round `from` and the last round.
pub fn mean_log_wealth_slope(summary: &[SummaryRow], from: usize) -> f64 {
    let last = summary.last().expect("non-empty summary");
    let start = &summary[from - 1];
    (last.mean_log_wealth - start.mean_log_wealth) / (last.t - start.t) as f64
}

/// Batch-test rejection rate at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub scenario: String,
    pub method: String,
    pub theta: f64,
    pub n: usize,
    pub reject_prop: f64,
    pub replications: usize,
}

/// Rejection rates of the bootstrap test on prefixes of `N(theta, 1)`
/// streams; replication `i` sees the same stream as replication `i` of a
/// scenario with the same seed.
pub fn batch_rejection_rates(
    theta: f64,
    sizes: &[usize],
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<BatchRow>> {
    let null = ModelSpec::gaussian(0.0).build()?;
    let data = ModelSpec::gaussian(theta).build()?;
    let n_max = sizes.iter().copied().max().unwrap_or(0);
    let hits = par_map(replications, |i| -> Result<Vec<bool>> {
        let mut rng = replication_rng(seed, i as u64);
        let sample = data.sample(&mut rng, n_max, Default::default())?;
        let gram = SteinGram::new(&null, &sample)?;
        Ok(sizes
            .iter()
            .map(|&n| gram.test_prefix(n, alpha, DEFAULT_BOOTSTRAP_DRAWS, &mut rng).reject)
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| BatchRow {
            scenario: format!("batch_theta{theta:.2}"),
            method: "batch".into(),
            theta,
            n,
            reject_prop: hits.iter().filter(|h| h[k]).count() as f64 / replications as f64,
            replications,
        })
        .collect())
}

/// Per-round rejection proportion of a test re-run after every observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentializedRow {
    pub scenario: String,
    pub method: String,
    pub t: usize,
    pub reject_prop: f64,
}

/// Repeated batch testing on growing prefixes of null data.
pub fn sequentialized_batch_rates(
    null: &Model,
    data: &Model,
    replications: usize,
    horizon: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<SequentializedRow>> {
    let taus = par_map(replications, |i| -> Result<Option<usize>> {
        let mut rng = replication_rng(seed, i as u64);
        let stream = data.sample(&mut rng, horizon, Default::default())?;
        sequentialized_batch(null, &stream, alpha, DEFAULT_BOOTSTRAP_DRAWS, horizon, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((1..=horizon)
        .map(|t| SequentializedRow {
            scenario: "sequentialized_batch".into(),
            method: "batch".into(),
            t,
            reject_prop: taus.iter().filter(|tau| tau.is_some_and(|v| v <= t)).count() as f64 / replications as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub scenario: String,
    pub theta: f64,
    pub bound_scale: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStarRow {
    pub scenario: String,
    pub theta: f64,
    pub mean_g: f64,
    pub mean_g2: f64,
    pub se_g: f64,
    pub se_g2: f64,
    pub r_star: f64,
    pub se_r_star: f64,
    pub n_outer: usize,
    pub n_inner: usize,
}

struct Bundle<'a> {
    opts: &'a SuiteOptions,
    files: Vec<PathBuf>,
}

impl Bundle<'_> {
    fn dir(&self) -> &Path {
        &self.opts.out_dir
    }

    fn scenario(&mut self, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
        let outcome = run_scenario(cfg)?;
        let f = write_outcome(&outcome, self.dir())?;
        self.files.extend([f.config, f.trajectories, f.summary, f.stopping]);
        Ok(outcome)
    }

    fn table<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let path = self.dir().join(name);
        write_csv(&path, rows)?;
        self.files.push(path);
        Ok(())
    }

    fn strategies(&mut self, base: &str, null: ModelSpec, data: ModelSpec, strategies: &[Strategy]) -> Result<()> {
        for &s in strategies {
            let cfg = self.opts.scenario(
                &format!("{base}_{}", s.name()),
                null.clone(),
                data.clone(),
                s,
                1000,
                100,
            );
            self.scenario(&cfg)?;
        }
        Ok(())
    }
}

const BOTH: [Strategy; 2] = [Strategy::Agrapa, Strategy::Lbow];

/// Runs a named suite and returns the files it wrote.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<PathBuf>> {
    let mut b = Bundle {
        opts,
        files: Vec::new(),
    };
    let g = ModelSpec::gaussian;
    match name {
        "gaussian_alt" => b.strategies("gaussian_alt", g(0.0), g(1.0), &BOTH)?,
        "intractable_alt" => b.strategies(
            "intractable_alt",
            ModelSpec::Intractable { theta: [0.0, 0.0] },
            ModelSpec::Intractable { theta: [1.0, 1.0] },
            &BOTH,
        )?,
        "rbm_shiftB" => b.strategies("rbm_shiftB", opts.rbm(0.0, 0.0), opts.rbm(0.5, 0.0), &BOTH)?,
        "rbm_bias" => b.strategies("rbm_bias", opts.rbm(0.0, 0.0), opts.rbm(0.0, 1.0), &BOTH)?,
        "ons_compare" => b.strategies(
            "ons_compare",
            g(0.0),
            g(1.0),
            &[Strategy::Agrapa, Strategy::Lbow, Strategy::Ons],
        )?,
        "type1" => {
            b.strategies("type1_gaussian", g(0.0), g(0.0), &BOTH)?;
            let it = ModelSpec::Intractable { theta: [0.0, 0.0] };
            b.strategies("type1_intractable", it.clone(), it, &BOTH)?;
            b.strategies("type1_rbm", opts.rbm(0.0, 0.0), opts.rbm(0.0, 0.0), &BOTH)?;
            let mut cfg = opts.scenario("type1_importance", g(0.0), g(0.5), Strategy::Agrapa, 1000, 500);
            cfg.alpha = 0.1;
            let est = importance_type1(&cfg)?;
            b.table("type1_importance.csv", [est])?;
        }
        "batch_vs_seq" => {
            let reps = opts.replications.unwrap_or(500);
            let mut rows = Vec::new();
            for theta in BATCH_THETAS {
                rows.extend(batch_rejection_rates(theta, &BATCH_SIZES, reps, opts.alpha, opts.seed)?);
                let cfg = opts.scenario(
                    &format!("batch_vs_seq_theta{theta:.2}"),
                    g(0.0),
                    g(theta),
                    Strategy::Agrapa,
                    reps,
                    400,
                );
                b.scenario(&cfg)?;
            }
            b.table("batch_vs_seq_batch.csv", rows)?;
            let null = g(0.0).build()?;
            let seq_reps = opts.replications.unwrap_or(100);
            let seq_t = opts.horizon.unwrap_or(100);
            let rows = sequentialized_batch_rates(&null, &null, seq_reps, seq_t, opts.alpha, opts.seed)?;
            b.table("batch_vs_seq_sequentialized.csv", rows)?;
            let cfg = opts.scenario("batch_vs_seq_null", g(0.0), g(0.0), Strategy::Agrapa, seq_reps, seq_t);
            b.scenario(&cfg)?;
        }
        "composite" => {
            let q = opts.rbm(0.0, 0.0);
            let shifted = opts.rbm(0.5, 0.0);
            let biased = opts.rbm(0.0, 1.0);
            for (case, family) in [
                ("composite_valid", vec![q.clone(), shifted.clone()]),
                ("composite_power", vec![shifted, biased]),
            ] {
                let mut cfg = opts.scenario(case, q.clone(), q.clone(), Strategy::Agrapa, 1000, 100);
                cfg.null_model = None;
                cfg.composite = Some(family);
                b.scenario(&cfg)?;
            }
        }
        "bound_tightness" => {
            let mut rows = Vec::new();
            for theta in [0.5, 0.75, 1.0] {
                for k in [1.0, 2.0, 3.0, 4.0] {
                    let mut cfg = opts.scenario(
                        &format!("bound_tightness_theta{theta:.2}_k{k}"),
                        g(0.0),
                        g(theta),
                        Strategy::Agrapa,
                        1000,
                        100,
                    );
                    cfg.bound_scale = k;
                    let outcome = b.scenario(&cfg)?;
                    rows.push(SlopeRow {
                        scenario: cfg.name.clone(),
                        theta,
                        bound_scale: k,
                        slope: mean_log_wealth_slope(&outcome.summary, 20.min(cfg.horizon)),
                    });
                }
            }
            b.table("bound_tightness_slopes.csv", rows)?;
        }
        "stopping_bound" => {
            let (n_outer, n_inner) = if opts.full { (100_000, 10_000) } else { (10_000, 2_000) };
            let null = g(0.0).build()?;
            let mut rstar_rows = Vec::new();
            let mut rows = Vec::new();
            for (k, theta) in [0.5, 0.75, 1.0, 1.25, 1.5].into_iter().enumerate() {
                let data = g(theta).build()?;
                let mut rng = seeded(opts.seed.wrapping_add(k as u64));
                let est = estimate_r_star(
                    &null,
                    &data,
                    Default::default(),
                    n_outer,
                    n_inner,
                    BoundScale::ONE,
                    &mut rng,
                )?;
                let scenario = format!("stopping_bound_theta{theta:.2}");
                rstar_rows.push(RStarRow {
                    scenario: scenario.clone(),
                    theta,
                    mean_g: est.mean_g,
                    mean_g2: est.mean_g2,
                    se_g: est.se_g,
                    se_g2: est.se_g2,
                    r_star: est.r_star,
                    se_r_star: est.se_r_star,
                    n_outer,
                    n_inner,
                });
                for s in BOTH {
                    let cfg = opts.scenario(&scenario, g(0.0), g(theta), s, 500, 2000);
                    rows.push(stopping_bound_check(&cfg, est.r_star)?);
                }
            }
            b.table("stopping_bound_rstar.csv", rstar_rows)?;
            b.table("stopping_bound.csv", rows)?;
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown suite {other:?}; expected one of {}",
                SUITES.join(", ")
            )))
        }
    }
    Ok(b.files)
}
