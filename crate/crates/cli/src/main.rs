use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sksd::batch::{batch_ksd_test, DEFAULT_BOOTSTRAP_DRAWS};
use sksd::experiments::harness::write_csv;
use sksd::experiments::io::read_points;
use sksd::experiments::{
    estimate_r_star, importance_type1, run_scenario, run_suite, write_outcome, ModelSpec, ScenarioConfig, SuiteOptions,
};
use sksd::models::GibbsSettings;
use sksd::rng::seeded;
use sksd::{BoundScale, Error, ScoreModel, SequentialTest, Strategy};

#[derive(Parser)]
#[command(
    name = "sksd",
    version,
    about = "Anytime-valid goodness-of-fit tests for unnormalized densities via Stein kernels and betting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// agrapa, lbow, ons, const or const:<lambda>
    #[arg(long, default_value = "agrapa")]
    strategy: Strategy,
    #[arg(long = "bound-scale", default_value_t = 1.0)]
    bound_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stream a data file through a sequential test.
    Test {
        /// Null model, e.g. `gaussian:0`, `intractable:0,0`, `rbm:20,5`.
        #[arg(long)]
        model: Option<String>,
        /// Scenario config whose null model is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV (one point per row) or JSON-lines file.
        #[arg(long)]
        data: PathBuf,
        /// Keep going after the first rejection.
        #[arg(long)]
        no_stop: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a replicated scenario.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        /// Data-generating model when no config is given.
        #[arg(long = "data-model")]
        data_model: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named experiment suite.
    Suite {
        name: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Full-size RBMs (d = 50, d_h = 10) and larger r* budgets.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the asymptotic growth rate r*.
    Rstar {
        #[arg(long)]
        model: String,
        #[arg(long = "data-model")]
        data_model: String,
        #[arg(long, default_value_t = 10_000)]
        outer: usize,
        #[arg(long, default_value_t = 2_000)]
        inner: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Importance-sampling estimate of the type-I error (Gaussian pairs).
    #[command(name = "type1-is")]
    Type1Is {
        #[arg(long, default_value = "gaussian:0")]
        model: String,
        #[arg(long, default_value = "gaussian:0.5")]
        proposal: String,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fixed-sample KSD test with a wild bootstrap.
    Batch {
        #[arg(long)]
        model: String,
        /// Data file; otherwise `--n` points are drawn from `--data-model`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "data-model")]
        data_model: Option<String>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_DRAWS)]
        draws: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn emit<T: Serialize>(out: Option<&Path>, file: &str, rows: Vec<T>) -> sksd::Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(file);
            write_csv(&path, rows)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stdout());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn build(spec: &str) -> sksd::Result<sksd::Model> {
    ModelSpec::parse_short(spec)?.build()
}

fn need<T>(v: Option<T>, flag: &str) -> sksd::Result<T> {
    v.ok_or_else(|| Error::Usage(format!("missing --{flag}")))
}

#[derive(Serialize)]
struct BatchRow {
    method: &'static str,
    n: usize,
    statistic: f64,
    p_value: f64,
    bootstrap_draws: usize,
    reject: bool,
}

fn run(cli: Cli) -> sksd::Result<()> {
    match cli.command {
        Command::Test {
            model,
            config,
            data,
            no_stop,
            common,
        } => {
            let null = match (model, config) {
                (Some(m), _) => build(&m)?,
                (None, Some(path)) => {
                    let cfg = ScenarioConfig::load(&path)?;
                    need(cfg.null_model, "config null_model")?.build()?
                }
                (None, None) => return Err(Error::Usage("one of --model or --config is required".into())),
            };
            let points = read_points(&data)?;
            let scale = BoundScale::new(common.bound_scale)?;
            let mut test = SequentialTest::with_scale(Arc::new(null), common.strategy, common.alpha, scale)?;
            let records = test.run(points.iter().map(|p| p.coords()), !no_stop)?;
            if let Some(dir) = &common.out {
                write_csv(&dir.join("test_trajectory.csv"), &records)?;
            }
            match test.stopping_time() {
                Some(tau) => println!("reject tau={tau} wealth={:.6e}", test.wealth()),
                None => println!(
                    "no rejection after {} observations, wealth={:.6e}",
                    records.len(),
                    test.wealth()
                ),
            }
        }
        Command::Simulate {
            config,
            model,
            data_model,
            reps,
            horizon,
            common,
        } => {
            let mut cfg = match config {
                Some(path) => ScenarioConfig::load(&path)?,
                None => {
                    let mut cfg = ScenarioConfig::simple(
                        "simulate",
                        ModelSpec::parse_short(&need(model, "model")?)?,
                        ModelSpec::parse_short(&need(data_model, "data-model")?)?,
                        common.strategy,
                    );
                    cfg.alpha = common.alpha;
                    cfg.bound_scale = common.bound_scale;
                    cfg.seed = common.seed;
                    cfg
                }
            };
            cfg.replications = reps.unwrap_or(cfg.replications);
            cfg.horizon = horizon.unwrap_or(cfg.horizon);
            let out = common
                .out
                .or(cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            let outcome = run_scenario(&cfg)?;
            let files = write_outcome(&outcome, &out)?;
            let last = outcome.final_summary();
            println!(
                "{}: reject_prop={} mean_log_wealth={:.4} at t={}",
                cfg.name, last.reject_prop, last.mean_log_wealth, last.t
            );
            println!("{}", files.summary.display());
        }
        Command::Suite {
            name,
            reps,
            horizon,
            full,
            common,
        } => {
            let opts = SuiteOptions {
                out_dir: common.out.unwrap_or_else(|| PathBuf::from("results")),
                seed: common.seed,
                alpha: common.alpha,
                replications: reps,
                horizon,
                full,
            };
            for f in run_suite(&name, &opts)? {
                println!("{}", f.display());
            }
        }
        Command::Rstar {
            model,
            data_model,
            outer,
            inner,
            common,
        } => {
            let null = build(&model)?;
            let data = build(&data_model)?;
            let scale = BoundScale::new(common.bound_scale)?;
            let est = estimate_r_star(
                &null,
                &data,
                GibbsSettings::default(),
                outer,
                inner,
                scale,
                &mut seeded(common.seed),
            )?;
            emit(common.out.as_deref(), "rstar.csv", vec![est])?;
        }
        Command::Type1Is {
            model,
            proposal,
            reps,
            horizon,
            common,
        } => {
            let mut cfg = ScenarioConfig::simple(
                "type1_is",
                ModelSpec::parse_short(&model)?,
                ModelSpec::parse_short(&proposal)?,
                common.strategy,
            );
            cfg.alpha = common.alpha;
            cfg.bound_scale = common.bound_scale;
            cfg.seed = common.seed;
            cfg.replications = reps;
            cfg.horizon = horizon;
            let est = importance_type1(&cfg)?;
            emit(common.out.as_deref(), "type1_importance.csv", vec![est])?;
        }
        Command::Batch {
            model,
            data,
            data_model,
            n,
            draws,
            common,
        } => {
            let null = build(&model)?;
            let mut rng = seeded(common.seed);
            let points = match (data, data_model) {
                (Some(path), _) => read_points(&path)?,
                (None, Some(spec)) => build(&spec)?.sample(&mut rng, n, GibbsSettings::default())?,
                (None, None) => return Err(Error::Usage("one of --data or --data-model is required".into())),
            };
            if points.first().is_some_and(|p| p.dim() != null.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: null.dim(),
                    got: points[0].dim(),
                });
            }
            let r = batch_ksd_test(&null, &points, common.alpha, draws, &mut rng)?;
            let row = BatchRow {
                method: "batch",
                n: r.n,
                statistic: r.statistic,
                p_value: r.p_value,
                bootstrap_draws: r.bootstrap_draws,
                reject: r.reject,
            };
            emit(common.out.as_deref(), "batch.csv", vec![row])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } | Error::Unsupported(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
