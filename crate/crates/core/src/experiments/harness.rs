//! Replicated simulation of a configured test and its CSV persistence.
//!
//! Replication `i` draws all of its randomness from
//! `replication_rng(seed, i)`, so serial and parallel runs agree and any
//! replication can be replayed on its own from the seed ledger.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ResolvedScenario, ScenarioConfig};
use super::stats::{mean, quantile_sorted};
use crate::betting::{CompositeTest, SequentialTest, TrajectoryRecord};
use crate::error::Result;
use crate::models::PointStream;
use crate::rng::{replication_rng, SimRng};

/// Runs `f(0..n)` and returns the results in index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub base_seed: u64,
    pub records: Vec<TrajectoryRecord>,
    pub stopping_time: Option<usize>,
}

impl Replication {
    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("horizon >= 1")
    }

    /// Record at round `t`, or the final one if the run stopped earlier.
    pub fn at(&self, t: usize) -> &TrajectoryRecord {
        self.records.get(t - 1).unwrap_or_else(|| self.last())
    }
}

enum Tester {
    Simple(SequentialTest),
    Composite(CompositeTest),
}

impl Tester {
    fn new(sc: &ResolvedScenario) -> Result<Self> {
        let cfg = &sc.config;
        Ok(if sc.composite {
            Tester::Composite(CompositeTest::new(sc.nulls.clone(), cfg.strategy, cfg.alpha, sc.scale)?)
        } else {
            Tester::Simple(SequentialTest::with_scale(
                sc.nulls[0].clone(),
                cfg.strategy,
                cfg.alpha,
                sc.scale,
            )?)
        })
    }

    fn step(&mut self, x: &[f64]) -> Result<TrajectoryRecord> {
        match self {
            Tester::Simple(t) => t.step(x),
            Tester::Composite(t) => Ok(t.step(x)?.record),
        }
    }

    fn stopping_time(&self) -> Option<usize> {
        match self {
            Tester::Simple(t) => t.stopping_time(),
            Tester::Composite(t) => t.stopping_time(),
        }
    }
}

/// Runs the test over a fresh data stream, observing each point through
/// `observe` before it is tested.
pub(crate) fn run_stream(
    sc: &ResolvedScenario,
    rng: &mut SimRng,
    mut observe: impl FnMut(&[f64]),
) -> Result<(Vec<TrajectoryRecord>, Option<usize>)> {
    let cfg = &sc.config;
    let mut tester = Tester::new(sc)?;
    let mut stream = PointStream::new(&sc.data, sc.gibbs, rng)?;
    let mut records = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let x = stream.next_point(rng)?;
        observe(&x);
        let rec = tester.step(&x)?;
        records.push(rec);
        if cfg.stop_on_reject && rec.rejected {
            break;
        }
    }
    Ok((records, tester.stopping_time()))
}

pub fn run_replication(sc: &ResolvedScenario, index: usize) -> Result<Replication> {
    let mut rng = replication_rng(sc.config.seed, index as u64);
    let (records, stopping_time) = run_stream(sc, &mut rng, |_| {})?;
    Ok(Replication {
        index,
        base_seed: sc.config.seed,
        records,
        stopping_time,
    })
}

/// Per-round cross-replication summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: usize,
    pub replications: usize,
    pub mean_log_wealth: f64,
    pub q025_log_wealth: f64,
    pub q975_log_wealth: f64,
    pub mean_wealth: f64,
    pub q025_wealth: f64,
    pub q975_wealth: f64,
    /// Fraction of replications with `tau <= t`.
    pub reject_prop: f64,
}

/// Summaries over rounds `1..=horizon`; replications that stopped early
/// contribute their final (stopped) state.
pub fn summarize(reps: &[Replication], horizon: usize) -> Vec<SummaryRow> {
    let n = reps.len();
    let mut logs = vec![0.0; n];
    let mut wealths = vec![0.0; n];
    (1..=horizon)
        .map(|t| {
            for (i, r) in reps.iter().enumerate() {
                let rec = r.at(t);
                logs[i] = rec.log_wealth;
                wealths[i] = rec.wealth;
            }
            let rejected = reps
                .iter()
                .filter(|r| r.stopping_time.is_some_and(|tau| tau <= t))
                .count();
            let mean_log = mean(&logs);
            let mean_w = mean(&wealths);
            logs.sort_by(|a, b| a.total_cmp(b));
            wealths.sort_by(|a, b| a.total_cmp(b));
            SummaryRow {
                t,
                replications: n,
                mean_log_wealth: mean_log,
                q025_log_wealth: quantile_sorted(&logs, 0.025),
                q975_log_wealth: quantile_sorted(&logs, 0.975),
                mean_wealth: mean_w,
                q025_wealth: quantile_sorted(&wealths, 0.025),
                q975_wealth: quantile_sorted(&wealths, 0.975),
                reject_prop: rejected as f64 / n as f64,
            }
        })
        .collect()
}

pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub hash: String,
    pub replications: Vec<Replication>,
    pub summary: Vec<SummaryRow>,
}

impl ScenarioOutcome {
    pub fn final_summary(&self) -> &SummaryRow {
        self.summary.last().expect("horizon >= 1")
    }

    pub fn stopping_times(&self) -> Vec<Option<usize>> {
        self.replications.iter().map(|r| r.stopping_time).collect()
    }

    pub fn terminal_log_wealth(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.last().log_wealth).collect()
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let sc = cfg.resolve()?;
    let replications = par_map(cfg.replications, |i| run_replication(&sc, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&replications, cfg.horizon);
    Ok(ScenarioOutcome {
        config: cfg.clone(),
        hash: cfg.scenario_hash(),
        replications,
        summary,
    })
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub scenario: String,
    pub method: String,
    pub replication: usize,
    pub t: usize,
    pub g: f64,
    pub lambda: f64,
    pub wealth: f64,
    pub log_wealth: f64,
    pub rejected: u8,
}

/// Seed ledger and stopping time of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingRow {
    pub replication: usize,
    pub base_seed: u64,
    pub stream: u64,
    pub rounds: usize,
    pub tau: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ScenarioFiles {
    pub config: PathBuf,
    pub trajectories: PathBuf,
    pub summary: PathBuf,
    pub stopping: PathBuf,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn trajectory_rows(outcome: &ScenarioOutcome) -> impl Iterator<Item = TrajectoryRow> + '_ {
    let method = outcome.config.strategy.name().to_string();
    let scenario = outcome.config.name.clone();
    outcome.replications.iter().flat_map(move |r| {
        let method = method.clone();
        let scenario = scenario.clone();
        r.records.iter().map(move |rec| TrajectoryRow {
            scenario: scenario.clone(),
            method: method.clone(),
            replication: r.index,
            t: rec.t,
            g: rec.g,
            lambda: rec.lambda,
            wealth: rec.wealth,
            log_wealth: rec.log_wealth,
            rejected: rec.rejected as u8,
        })
    })
}

/// Writes `<name>_config.json`, `<name>_trajectories.csv`,
/// `<name>_summary_<hash>.csv` and `<name>_stopping.csv` into `dir`.
pub fn write_outcome(outcome: &ScenarioOutcome, dir: &Path) -> Result<ScenarioFiles> {
    fs::create_dir_all(dir)?;
    let name = &outcome.config.name;
    let files = ScenarioFiles {
        config: dir.join(format!("{name}_config.json")),
        trajectories: dir.join(format!("{name}_trajectories.csv")),
        summary: dir.join(format!("{name}_summary_{}.csv", outcome.hash)),
        stopping: dir.join(format!("{name}_stopping.csv")),
    };
    fs::write(&files.config, serde_json::to_string_pretty(&outcome.config)?)?;
    write_csv(&files.trajectories, trajectory_rows(outcome))?;
    write_csv(&files.summary, &outcome.summary)?;
    write_csv(
        &files.stopping,
        outcome.replications.iter().map(|r| StoppingRow {
            replication: r.index,
            base_seed: r.base_seed,
            stream: r.index as u64,
            rounds: r.records.len(),
            tau: r.stopping_time,
        }),
    )?;
    Ok(files)
}

/// Rebuilds per-round summaries from a trajectory file.
pub fn summarize_rows(rows: &[TrajectoryRow], horizon: usize) -> Vec<SummaryRow> {
    let mut by_rep: std::collections::BTreeMap<usize, Vec<TrajectoryRecord>> = Default::default();
    for r in rows {
        by_rep.entry(r.replication).or_default().push(TrajectoryRecord {
            t: r.t,
            g: r.g,
            lambda: r.lambda,
            wealth: r.wealth,
            log_wealth: r.log_wealth,
            rejected: r.rejected != 0,
        });
    }
    let reps: Vec<Replication> = by_rep
        .into_iter()
        .map(|(index, mut records)| {
            records.sort_by_key(|r| r.t);
            let stopping_time = records.iter().find(|r| r.rejected).map(|r| r.t);
            Replication {
                index,
                base_seed: 0,
                records,
                stopping_time,
            }
        })
        .collect();
    summarize(&reps, horizon)
}
