//! Property checks shared by the `properties` and `acceptance` targets.
//! Each check drives its own proptest runner and reports the first
//! minimal failure as a string.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use sksd::betting::{next_bet, ons_bet, BettingAccumulators, OnsState, ONS_MAX_BET};
use sksd::experiments::{run_replication, run_scenario, ModelSpec, ScenarioConfig};
use sksd::models::{GaussianModel, IntractableModel, Model, RbmModel};
use sksd::{stein_eval, BoundScale, CompositeTest, ImqKernel, ScoreModel, SequentialTest, Strategy as Betting};

pub type Check = fn() -> Result<(), String>;

pub const CHECKS: [(&str, Check); 10] = [
    ("kernel symmetry", kernel_symmetry),
    ("kernel PSD", kernel_psd),
    ("gradient vs finite difference", gradient_fd),
    (
        "score vs finite difference (RBM enumeration oracle, d_h = 3)",
        rbm_score_fd,
    ),
    ("bet clamps", bet_clamps),
    ("composite domination", composite_domination),
    ("payoff scale equivariance", scale_equivariance),
    ("bet predictability", predictability),
    ("seed determinism", seed_determinism),
    ("parallel equals serial", parallel_equals_serial),
];

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn coords(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

/// Random model of one of the three families, with matching dimension.
fn any_model() -> impl Strategy<Value = Model> {
    prop_oneof![
        (1usize..4)
            .prop_flat_map(|d| coords(d, 2.0))
            .prop_map(|m| Model::Gaussian(GaussianModel::new(m).unwrap())),
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Model::Intractable(IntractableModel::new([a, b]))),
        (1usize..5, 1usize..4)
            .prop_flat_map(|(d, dh)| rbm(d, dh))
            .prop_map(Model::Rbm),
    ]
}

pub fn rbm(d: usize, dh: usize) -> impl Strategy<Value = RbmModel> {
    (coords(d * dh, 1.0), coords(d, 1.0), coords(dh, 1.0)).prop_map(|(w, b, c)| RbmModel::new(w, b, c).unwrap())
}

fn model_with_points(n: std::ops::Range<usize>) -> impl Strategy<Value = (Model, Vec<Vec<f64>>)> {
    any_model().prop_flat_map(move |m| {
        let d = m.dim();
        (Just(m), prop::collection::vec(coords(d, 3.0), n.clone()))
    })
}

fn kernel_symmetry() -> Result<(), String> {
    run(200, model_with_points(2..3), |(m, pts)| {
        let a = stein_eval(&m, &pts[0], &pts[1]).unwrap();
        let b = stein_eval(&m, &pts[1], &pts[0]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        Ok(())
    })
}

fn min_eigenvalue(n: usize, f: impl Fn(usize, usize) -> f64) -> (f64, f64) {
    let g = DMatrix::from_fn(n, n, f);
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (g.symmetric_eigenvalues().min(), scale)
}

fn kernel_psd() -> Result<(), String> {
    run(200, model_with_points(2..9), |(m, pts)| {
        let n = pts.len();
        let (lo, scale) = min_eigenvalue(n, |i, j| stein_eval(&m, &pts[i], &pts[j]).unwrap());
        prop_assert!(lo >= -1e-9 * scale.max(1.0), "Stein Gram eigenvalue {lo}");
        let k = ImqKernel;
        let (lo, _) = min_eigenvalue(n, |i, j| k.eval(&pts[i], &pts[j]).unwrap());
        prop_assert!(lo >= -1e-12, "IMQ Gram eigenvalue {lo}");
        Ok(())
    })
}

fn gradient_fd() -> Result<(), String> {
    let pair = (1usize..5).prop_flat_map(|d| (coords(d, 3.0), coords(d, 3.0)));
    run(300, pair, |(x, y)| {
        let k = ImqKernel;
        let g = k.grad_x(&x, &y).unwrap();
        let eps = 1e-6;
        for i in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += eps;
            b[i] -= eps;
            let fd = (k.eval(&a, &y).unwrap() - k.eval(&b, &y).unwrap()) / (2.0 * eps);
            prop_assert!((fd - g[i]).abs() <= 1e-6, "coordinate {i}: {} vs {fd}", g[i]);
        }
        Ok(())
    })
}

/// `log sum_h exp(E(x, h))` over all `2^dh` hidden states.
pub fn rbm_log_density_enumerated(m: &RbmModel, x: &[f64]) -> f64 {
    let (d, dh) = (m.visible_dim(), m.hidden_dim());
    let w = m.weights();
    let base: f64 = x
        .iter()
        .zip(m.visible_bias())
        .map(|(xi, bi)| bi * xi - xi * xi / 2.0)
        .sum();
    let energies: Vec<f64> = (0..1usize << dh)
        .map(|mask| {
            let h: Vec<f64> = (0..dh).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let mut e = base;
            for j in 0..dh {
                let bx: f64 = (0..d).map(|i| x[i] * w[i * dh + j]).sum();
                e += h[j] * (bx / 2.0 + m.hidden_bias()[j]);
            }
            e
        })
        .collect();
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + energies.iter().map(|e| (e - top).exp()).sum::<f64>().ln()
}

fn rbm_score_fd() -> Result<(), String> {
    let case = (1usize..6).prop_flat_map(|d| (rbm(d, 3), coords(d, 3.0)));
    run(200, case, |(m, x)| {
        let s = m.score(&x).unwrap();
        let eps = 1e-5;
        for i in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += eps;
            b[i] -= eps;
            let fd = (rbm_log_density_enumerated(&m, &a) - rbm_log_density_enumerated(&m, &b)) / (2.0 * eps);
            prop_assert!(
                (fd - s[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "coordinate {i}: {} vs {fd}",
                s[i]
            );
        }
        Ok(())
    })
}

fn bet_clamps() -> Result<(), String> {
    let payoffs = prop::collection::vec(prop_oneof![-1.0..0.0f64, 0.0..1.0f64, 0.0..50.0f64], 1..40);
    run(500, payoffs, |gs| {
        let acc = BettingAccumulators::from_payoffs(&gs);
        for s in [Betting::Agrapa, Betting::Lbow, Betting::Constant(0.3)] {
            let lam = next_bet(s, &acc);
            prop_assert!((0.0..=1.0).contains(&lam), "{s:?} bet {lam}");
            prop_assert!(1.0 - lam >= 0.0);
        }
        let mut ons = OnsState::default();
        for &g in &gs {
            let lam = ons_bet(&mut ons, g);
            prop_assert!((0.0..=ONS_MAX_BET).contains(&lam), "ONS bet {lam}");
        }
        Ok(())
    })
}

fn stream(d: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(coords(d, 4.0), n)
}

fn composite_domination() -> Result<(), String> {
    let case = (prop::collection::vec(-2.0..2.0f64, 1..4), stream(1, 2..30));
    run(100, case, |(means, xs)| {
        let members: Vec<Arc<dyn ScoreModel>> = means
            .iter()
            .map(|&m| Arc::new(GaussianModel::new(vec![m]).unwrap()) as Arc<dyn ScoreModel>)
            .collect();
        let mut comp = CompositeTest::new(members, Betting::Agrapa, 0.05, BoundScale::ONE).unwrap();
        for x in &xs {
            let rec = comp.step(x).unwrap();
            let min = rec.member_log_wealth.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(rec.record.log_wealth, min);
            prop_assert_eq!(rec.member_log_wealth[rec.argmin], min);
            if let Some(tau) = comp.stopping_time() {
                prop_assert!(comp
                    .members()
                    .iter()
                    .all(|m| m.stopping_time().is_some_and(|s| s <= tau)));
            }
        }
        Ok(())
    })
}

fn scale_equivariance() -> Result<(), String> {
    let case = (model_with_points(2..12), 1.0..10.0f64);
    run(200, case, |((m, pts), k)| {
        let m: Arc<dyn ScoreModel> = Arc::new(m);
        let mut plain = SequentialTest::new(m.clone(), Betting::Agrapa, 0.05).unwrap();
        let mut scaled = SequentialTest::with_scale(m, Betting::Agrapa, 0.05, BoundScale::new(k).unwrap()).unwrap();
        let (last, history) = pts.split_last().unwrap();
        for x in history {
            let a = plain.step(x).unwrap();
            let b = scaled.step(x).unwrap();
            prop_assert!(
                (a.g - k * b.g).abs() <= 1e-12 * (1.0 + a.g.abs()),
                "{} vs {}",
                a.g,
                k * b.g
            );
        }
        let a = plain.payoff_eval(last).unwrap();
        let b = scaled.payoff_eval(last).unwrap();
        prop_assert!((a - k * b).abs() <= 1e-12 * (1.0 + a.abs()));
        Ok(())
    })
}

fn predictability() -> Result<(), String> {
    let case = (stream(1, 2..20), coords(1, 5.0), coords(1, 5.0));
    run(200, case, |(xs, a, b)| {
        for s in [Betting::Agrapa, Betting::Lbow, Betting::Ons] {
            let m: Arc<dyn ScoreModel> = Arc::new(GaussianModel::standard(1));
            let mut t = SequentialTest::new(m, s, 0.05).unwrap();
            for x in &xs {
                t.step(x).unwrap();
            }
            let announced = t.next_bet();
            let mut fork = t.clone();
            let ra = t.step(&a).unwrap();
            let rb = fork.step(&b).unwrap();
            prop_assert_eq!(ra.lambda, rb.lambda);
            prop_assert_eq!(ra.lambda, announced);
        }
        Ok(())
    })
}

fn small_config(seed: u64, strategy: Betting, data: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::simple("prop", ModelSpec::gaussian(0.0), ModelSpec::gaussian(data), strategy);
    cfg.seed = seed;
    cfg.replications = 3;
    cfg.horizon = 25;
    cfg
}

fn seed_determinism() -> Result<(), String> {
    let case = (any::<u64>(), 0usize..1000, -1.0..1.0f64);
    run(30, case, |(seed, idx, theta)| {
        let sc = small_config(seed, Betting::Agrapa, theta).resolve().unwrap();
        let a = run_replication(&sc, idx).unwrap();
        let b = run_replication(&sc, idx).unwrap();
        prop_assert_eq!(&a, &b);
        if idx > 0 {
            prop_assert_ne!(a.records, run_replication(&sc, idx - 1).unwrap().records);
        }
        Ok(())
    })
}

fn parallel_equals_serial() -> Result<(), String> {
    run(10, (any::<u64>(), -1.0..1.0f64), |(seed, theta)| {
        let cfg = small_config(seed, Betting::Lbow, theta);
        let outcome = run_scenario(&cfg).unwrap();
        let sc = cfg.resolve().unwrap();
        for r in &outcome.replications {
            prop_assert_eq!(r, &run_replication(&sc, r.index).unwrap());
        }
        Ok(())
    })
}
