//! Wealth-process test martingales driven by Stein-kernel payoffs.
//!
//! At round `t >= 2` the payoff of a new point `x` is
//!
//! ```text
//! g_t(x) = sum_{i<t} h(X_i, x) / sum_{i<t} M(X_i)
//! ```
//!
//! which is at least `-1` whenever `M` is a valid bound, so
//! `K_t = K_{t-1} (1 + lambda_t g_t(X_t))` stays nonnegative for any
//! predictable `lambda_t ∈ [0, 1]`. The null is rejected the first time
//! `K_t >= 1/alpha`. Round 1 has no history: its payoff is recorded as 0
//! and no money is bet.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::stein_from_scores;
use crate::models::{BoundScale, ScoreModel};

/// Rule mapping past payoffs to the next betting fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// `clamp(mean(g) / mean(g^2), 0, 1)`.
    Agrapa,
    /// `max(0, mean(g) / (mean(g) + mean(g^2)))`.
    Lbow,
    /// Online Newton step on the log-wealth, projected to `[0, 1/2]`.
    Ons,
    /// Fixed fraction in `[0, 1]`.
    Constant(f64),
}

impl Strategy {
    pub fn validate(self) -> Result<Self> {
        match self {
            Strategy::Constant(l) if !(0.0..=1.0).contains(&l) => {
                Err(Error::Usage(format!("constant bet must lie in [0, 1], got {l}")))
            }
            s => Ok(s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Agrapa => "agrapa",
            Strategy::Lbow => "lbow",
            Strategy::Ons => "ons",
            Strategy::Constant(_) => "const",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Constant(l) => write!(f, "const:{l}"),
            s => f.write_str(s.name()),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// `agrapa`, `lbow`, `ons`, `const` (0.5) or `const:<lambda>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let strategy = match lower.as_str() {
            "agrapa" => Strategy::Agrapa,
            "lbow" => Strategy::Lbow,
            "ons" => Strategy::Ons,
            "const" => Strategy::Constant(0.5),
            other => match other.strip_prefix("const:") {
                Some(v) => Strategy::Constant(
                    v.parse()
                        .map_err(|_| Error::Usage(format!("invalid constant bet `{v}`")))?,
                ),
                None => return Err(Error::Usage(format!("unknown strategy `{s}`"))),
            },
        };
        strategy.validate()
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

/// Online Newton step state: current fraction and `A = 1 + sum z_i^2`.
///
/// With `z = g / (1 + lambda g)` the update is
/// `lambda <- clamp(lambda + 2 / (2 - ln 3) * z / A, 0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsState {
    pub lambda: f64,
    pub curvature: f64,
}

impl Default for OnsState {
    fn default() -> Self {
        OnsState {
            lambda: 0.0,
            curvature: 1.0,
        }
    }
}

pub const ONS_MAX_BET: f64 = 0.5;

/// Advances `state` with the payoff just observed and returns the next bet.
pub fn ons_bet(state: &mut OnsState, last_payoff: f64) -> f64 {
    let z = last_payoff / (1.0 + state.lambda * last_payoff);
    state.curvature += z * z;
    let step = 2.0 / (2.0 - 3f64.ln()) * z / state.curvature;
    state.lambda = (state.lambda + step).clamp(0.0, ONS_MAX_BET);
    state.lambda
}

/// Running moments of the payoffs realised so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BettingAccumulators {
    pub g_sum: f64,
    pub g2_sum: f64,
    pub count: usize,
    pub ons: OnsState,
}

impl BettingAccumulators {
    pub fn from_payoffs(payoffs: &[f64]) -> Self {
        let mut acc = BettingAccumulators::default();
        for &g in payoffs {
            acc.record(g);
        }
        acc
    }

    pub fn record(&mut self, g: f64) {
        self.g_sum += g;
        self.g2_sum += g * g;
        self.count += 1;
        ons_bet(&mut self.ons, g);
    }
}

/// Betting fraction for the coming round from the payoffs of earlier rounds.
pub fn next_bet(strategy: Strategy, acc: &BettingAccumulators) -> f64 {
    if let Strategy::Constant(l) = strategy {
        return l;
    }
    if let Strategy::Ons = strategy {
        return acc.ons.lambda;
    }
    if acc.count == 0 {
        return 0.0;
    }
    let n = acc.count as f64;
    let mean = acc.g_sum / n;
    let mean_sq = acc.g2_sum / n;
    if mean <= 0.0 || mean_sq <= 0.0 {
        return 0.0;
    }
    let bet = match strategy {
        Strategy::Agrapa => mean / mean_sq,
        _ => mean / (mean + mean_sq),
    };
    if bet.is_finite() {
        bet.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Observed history with cached scores and the running bound sum.
#[derive(Debug, Clone)]
pub struct PayoffState {
    dim: usize,
    points: Vec<f64>,
    scores: Vec<f64>,
    m_sum: f64,
    count: usize,
}

impl PayoffState {
    pub fn new(dim: usize) -> Self {
        PayoffState {
            dim,
            points: Vec::new(),
            scores: Vec::new(),
            m_sum: 0.0,
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn m_sum(&self) -> f64 {
        self.m_sum
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn push(&mut self, x: &[f64], score: &[f64], bound: f64) {
        self.points.extend_from_slice(x);
        self.scores.extend_from_slice(score);
        self.m_sum += bound;
        self.count += 1;
    }

    // sum_i h(X_i, x), summed in history order
    fn kernel_sum(&self, x: &[f64], sx: &[f64]) -> f64 {
        self.points
            .chunks_exact(self.dim)
            .zip(self.scores.chunks_exact(self.dim))
            .map(|(xi, si)| stein_from_scores(xi, si, x, sx))
            .sum()
    }
}

/// Per-round log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub g: f64,
    pub lambda: f64,
    pub wealth: f64,
    pub log_wealth: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestStatus {
    Running,
    Rejected { at: usize },
}

fn validate_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::Usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Online test of a single hypothesised model.
#[derive(Clone)]
pub struct SequentialTest {
    model: Arc<dyn ScoreModel>,
    scale: BoundScale,
    payoff: PayoffState,
    acc: BettingAccumulators,
    strategy: Strategy,
    wealth: f64,
    log_wealth: f64,
    bet: f64,
    alpha: f64,
    log_threshold: f64,
    status: TestStatus,
    round: usize,
    score_buf: Vec<f64>,
}

impl SequentialTest {
    pub fn new(model: Arc<dyn ScoreModel>, strategy: Strategy, alpha: f64) -> Result<Self> {
        Self::with_scale(model, strategy, alpha, BoundScale::ONE)
    }

    pub fn with_scale(model: Arc<dyn ScoreModel>, strategy: Strategy, alpha: f64, scale: BoundScale) -> Result<Self> {
        let alpha = validate_alpha(alpha)?;
        let strategy = strategy.validate()?;
        let dim = model.dim();
        Ok(SequentialTest {
            model,
            scale,
            payoff: PayoffState::new(dim),
            acc: BettingAccumulators::default(),
            strategy,
            wealth: 1.0,
            log_wealth: 0.0,
            bet: 0.0,
            alpha,
            log_threshold: -alpha.ln(),
            status: TestStatus::Running,
            round: 0,
            score_buf: vec![0.0; dim],
        })
    }

    pub fn model(&self) -> &Arc<dyn ScoreModel> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.payoff.dim
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn log_wealth(&self) -> f64 {
        self.log_wealth
    }

    /// Fraction used in the most recent round.
    pub fn bet(&self) -> f64 {
        self.bet
    }

    /// Fraction that the next round will use.
    pub fn next_bet(&self) -> f64 {
        if self.payoff.count == 0 {
            0.0
        } else {
            next_bet(self.strategy, &self.acc)
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn status(&self) -> TestStatus {
        self.status
    }

    pub fn stopping_time(&self) -> Option<usize> {
        match self.status {
            TestStatus::Rejected { at } => Some(at),
            TestStatus::Running => None,
        }
    }

    pub fn payoff_state(&self) -> &PayoffState {
        &self.payoff
    }

    pub fn accumulators(&self) -> &BettingAccumulators {
        &self.acc
    }

    /// `g_t(x)` against the current history. Fails on an empty history.
    pub fn payoff_eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if self.payoff.count == 0 {
            return Err(Error::Usage("payoff is undefined before the first observation".into()));
        }
        let sx = self.model.score(x)?;
        Ok(self.payoff.kernel_sum(x, &sx) / (self.scale.get() * self.payoff.m_sum))
    }

    /// Processes one observation.
    pub fn step(&mut self, x: &[f64]) -> Result<TrajectoryRecord> {
        check_dim(self.dim(), x.len())?;
        let t = self.round + 1;
        let mut sx = std::mem::take(&mut self.score_buf);
        self.model.score_into(x, &mut sx);
        if !sx.iter().all(|v| v.is_finite()) {
            self.score_buf = sx;
            return Err(Error::Engine {
                round: t,
                message: "non-finite score".into(),
            });
        }

        let (g, lambda) = if self.payoff.count == 0 {
            (0.0, 0.0)
        } else {
            // decided before the round-t payoff is seen
            let lambda = next_bet(self.strategy, &self.acc);
            let g = self.payoff.kernel_sum(x, &sx) / (self.scale.get() * self.payoff.m_sum);
            if !g.is_finite() {
                self.score_buf = sx;
                return Err(Error::Engine {
                    round: t,
                    message: format!("non-finite payoff {g}"),
                });
            }
            let factor = (1.0 + lambda * g).max(0.0);
            self.log_wealth += factor.ln();
            self.wealth = self.log_wealth.exp();
            self.acc.record(g);
            (g, lambda)
        };

        let bound = self.model.bound_given_score(x, &sx);
        self.payoff.push(x, &sx, bound);
        self.score_buf = sx;
        self.bet = lambda;
        self.round = t;
        if self.status == TestStatus::Running && self.log_wealth >= self.log_threshold {
            self.status = TestStatus::Rejected { at: t };
        }
        Ok(TrajectoryRecord {
            t,
            g,
            lambda,
            wealth: self.wealth,
            log_wealth: self.log_wealth,
            rejected: self.status != TestStatus::Running,
        })
    }

    /// Steps through `points`, optionally stopping at the first rejection.
    pub fn run<'p, I>(&mut self, points: I, stop_on_reject: bool) -> Result<Vec<TrajectoryRecord>>
    where
        I: IntoIterator<Item = &'p [f64]>,
    {
        let mut out = Vec::new();
        for x in points {
            let rec = self.step(x)?;
            out.push(rec);
            if stop_on_reject && rec.rejected {
                break;
            }
        }
        Ok(out)
    }
}

/// Composite null over a finite family; wealth is the minimum member wealth.
#[derive(Clone)]
pub struct CompositeTest {
    members: Vec<SequentialTest>,
    alpha: f64,
    log_threshold: f64,
    status: TestStatus,
    round: usize,
}

/// One composite round: the family-level record plus every member's log-wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRecord {
    /// `g` and `lambda` are those of the minimising member.
    pub record: TrajectoryRecord,
    pub argmin: usize,
    pub member_log_wealth: Vec<f64>,
}

impl CompositeTest {
    pub fn new(models: Vec<Arc<dyn ScoreModel>>, strategy: Strategy, alpha: f64, scale: BoundScale) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Usage("composite null needs at least one candidate model".into()));
        }
        let dim = models[0].dim();
        if let Some(m) = models.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
        let members = models
            .into_iter()
            .map(|m| SequentialTest::with_scale(m, strategy, alpha, scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompositeTest {
            members,
            alpha,
            log_threshold: -alpha.ln(),
            status: TestStatus::Running,
            round: 0,
        })
    }

    pub fn members(&self) -> &[SequentialTest] {
        &self.members
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn status(&self) -> TestStatus {
        self.status
    }

    pub fn stopping_time(&self) -> Option<usize> {
        match self.status {
            TestStatus::Rejected { at } => Some(at),
            TestStatus::Running => None,
        }
    }

    pub fn log_wealth(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.log_wealth())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn step(&mut self, x: &[f64]) -> Result<CompositeRecord> {
        let records = self.members.iter_mut().map(|m| m.step(x)).collect::<Result<Vec<_>>>()?;
        self.round += 1;
        let (argmin, min_rec) = records
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.log_wealth.total_cmp(&b.1.log_wealth))
            .expect("non-empty family");
        if self.status == TestStatus::Running && min_rec.log_wealth >= self.log_threshold {
            self.status = TestStatus::Rejected { at: self.round };
        }
        Ok(CompositeRecord {
            record: TrajectoryRecord {
                t: self.round,
                g: min_rec.g,
                lambda: min_rec.lambda,
                wealth: min_rec.wealth,
                log_wealth: min_rec.log_wealth,
                rejected: self.status != TestStatus::Running,
            },
            argmin,
            member_log_wealth: records.iter().map(|r| r.log_wealth).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianModel;
    use crate::rng::seeded;

    fn gaussian() -> Arc<dyn ScoreModel> {
        Arc::new(GaussianModel::standard(1))
    }

    #[test]
    fn payoff_examples() {
        let mut t = SequentialTest::new(gaussian(), Strategy::Agrapa, 0.05).unwrap();
        assert!(t.payoff_eval(&[0.0]).is_err());
        t.step(&[1.0]).unwrap();
        let g = t.payoff_eval(&[0.0]).unwrap();
        let h = -(2f64.powf(-1.5)) - 1.0 / (4.0 * 2f64.sqrt());
        assert!((g - h / 5.0).abs() < 1e-15);
        assert!((g + 0.106066).abs() < 1e-6);

        let mut t = SequentialTest::new(gaussian(), Strategy::Agrapa, 0.05).unwrap();
        t.step(&[0.0]).unwrap();
        assert!((t.payoff_eval(&[0.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bet_examples() {
        let acc = BettingAccumulators::from_payoffs(&[0.5, -0.2, 0.3]);
        assert_eq!(next_bet(Strategy::Agrapa, &acc), 1.0);
        let lbow = next_bet(Strategy::Lbow, &acc);
        assert!((lbow - 0.2 / (0.2 + 0.38 / 3.0)).abs() < 1e-12);
        assert!((lbow - 0.612245).abs() < 1e-6);

        let neg = BettingAccumulators::from_payoffs(&[-0.5, 0.1]);
        assert_eq!(next_bet(Strategy::Agrapa, &neg), 0.0);
        assert_eq!(next_bet(Strategy::Lbow, &neg), 0.0);
        let empty = BettingAccumulators::default();
        assert_eq!(next_bet(Strategy::Agrapa, &empty), 0.0);
        assert_eq!(next_bet(Strategy::Lbow, &empty), 0.0);
        let zeros = BettingAccumulators::from_payoffs(&[0.0, 0.0]);
        assert_eq!(next_bet(Strategy::Agrapa, &zeros), 0.0);
        assert_eq!(next_bet(Strategy::Lbow, &zeros), 0.0);
    }

    #[test]
    fn ons_examples() {
        let mut s = OnsState::default();
        for _ in 0..10 {
            assert_eq!(ons_bet(&mut s, 0.0), 0.0);
        }
        let mut s = OnsState {
            lambda: 0.1,
            curvature: 1.0,
        };
        assert!(ons_bet(&mut s, 3.0) > 0.1);
        let mut s = OnsState::default();
        for g in [5.0, 5.0, -1.0, 10.0, -0.9, 100.0] {
            let l = ons_bet(&mut s, g);
            assert!((0.0..=ONS_MAX_BET).contains(&l));
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("aGRAPA".parse::<Strategy>().unwrap(), Strategy::Agrapa);
        assert_eq!("const:0.25".parse::<Strategy>().unwrap(), Strategy::Constant(0.25));
        assert!("const:1.5".parse::<Strategy>().is_err());
        assert!("kelly".parse::<Strategy>().is_err());
        let json = serde_json::to_string(&Strategy::Constant(0.3)).unwrap();
        assert_eq!(
            serde_json::from_str::<Strategy>(&json).unwrap(),
            Strategy::Constant(0.3)
        );
    }

    #[test]
    fn wealth_update_examples() {
        // K = 2, lambda = 0.5, g = 0.4 -> 2.4
        let k: f64 = 2.0;
        let log_k = k.ln() + (1.0 + 0.5 * 0.4f64).ln();
        assert!((log_k.exp() - 2.4).abs() < 1e-12);

        let mut t = SequentialTest::new(gaussian(), Strategy::Constant(0.0), 0.05).unwrap();
        for x in [0.3, -2.0, 4.0, 1.0] {
            let r = t.step(&[x]).unwrap();
            assert_eq!(r.wealth, 1.0);
        }
    }

    // zero score, bound chosen so that h(0, 1) / M(0) is exactly -1
    struct FlatModel;

    impl ScoreModel for FlatModel {
        fn dim(&self) -> usize {
            1
        }
        fn score_into(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn bound_given_score(&self, _x: &[f64], _s: &[f64]) -> f64 {
            -stein_from_scores(&[0.0], &[0.0], &[1.0], &[0.0])
        }
        fn log_unnormalized_density(&self, _x: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn total_loss_is_absorbing() {
        let mut t = SequentialTest::new(Arc::new(FlatModel), Strategy::Constant(1.0), 0.05).unwrap();
        t.step(&[0.0]).unwrap();
        let r = t.step(&[1.0]).unwrap();
        assert_eq!(r.g, -1.0);
        assert_eq!(r.wealth, 0.0);
        for x in [0.5, 1.0, -0.2, 0.0] {
            let r = t.step(&[x]).unwrap();
            assert_eq!(r.wealth, 0.0);
            assert_eq!(r.log_wealth, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn round_one_bets_nothing() {
        let mut t = SequentialTest::new(gaussian(), Strategy::Agrapa, 0.05).unwrap();
        let r = t.step(&[3.0]).unwrap();
        assert_eq!((r.t, r.g, r.lambda, r.wealth, r.log_wealth), (1, 0.0, 0.0, 1.0, 0.0));
        assert_eq!(t.accumulators().count, 0);
        assert_eq!(t.payoff_state().count(), 1);
        assert_eq!(t.payoff_state().m_sum(), 3.0 * 4.0 + 3.0);
        assert!(t.step(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn rejection_time_is_sticky() {
        let mut t = SequentialTest::new(Arc::new(GaussianModel::standard(1)), Strategy::Agrapa, 0.5).unwrap();
        let data = GaussianModel::new(vec![3.0]).unwrap().sample(&mut seeded(1), 200);
        let recs = t.run(data.iter().map(|p| p.coords()), false).unwrap();
        let tau = t.stopping_time().expect("strong alternative rejects");
        assert!(recs[tau - 1].rejected && (tau < 2 || !recs[tau - 2].rejected));
        assert!(recs[tau - 1].log_wealth >= -(0.5f64).ln());
        assert!(recs[tau..].iter().all(|r| r.rejected));
        assert_eq!(t.stopping_time(), Some(tau));
    }

    #[test]
    fn bound_scale_divides_payoff() {
        let xs = [0.4, -1.3, 2.2, 0.0];
        let base = {
            let mut t = SequentialTest::new(gaussian(), Strategy::Lbow, 0.05).unwrap();
            for x in xs {
                t.step(&[x]).unwrap();
            }
            t.payoff_eval(&[0.7]).unwrap()
        };
        let mut t =
            SequentialTest::with_scale(gaussian(), Strategy::Lbow, 0.05, BoundScale::new(3.0).unwrap()).unwrap();
        for x in xs {
            t.step(&[x]).unwrap();
        }
        assert!((t.payoff_eval(&[0.7]).unwrap() - base / 3.0).abs() < 1e-15);
    }

    #[test]
    fn composite_examples() {
        assert!(CompositeTest::new(vec![], Strategy::Agrapa, 0.05, BoundScale::ONE).is_err());
        let data = GaussianModel::new(vec![0.8]).unwrap().sample(&mut seeded(2), 60);
        let mut single = SequentialTest::new(gaussian(), Strategy::Agrapa, 0.05).unwrap();
        let mut family = CompositeTest::new(vec![gaussian()], Strategy::Agrapa, 0.05, BoundScale::ONE).unwrap();
        for p in &data {
            let a = single.step(p).unwrap();
            let b = family.step(p).unwrap();
            assert_eq!(a, b.record);
        }

        let models: Vec<Arc<dyn ScoreModel>> = vec![
            gaussian(),
            Arc::new(GaussianModel::new(vec![1.0]).unwrap()),
            Arc::new(GaussianModel::new(vec![-0.5]).unwrap()),
        ];
        let mut family = CompositeTest::new(models, Strategy::Agrapa, 0.05, BoundScale::ONE).unwrap();
        for p in &data {
            let r = family.step(p).unwrap();
            let min = r.member_log_wealth.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(r.record.log_wealth, min);
            assert!(r.member_log_wealth.iter().all(|&w| r.record.log_wealth <= w));
            assert_eq!(r.record.log_wealth, r.member_log_wealth[r.argmin]);
        }
    }
}
