//! Fixed-sample KSD test: V-statistic calibrated by a Rademacher wild
//! bootstrap. Used as the classical baseline, including the invalid practice
//! of re-running it after every new observation.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{stein_from_scores, Point};
use crate::models::ScoreModel;
use crate::rng::SimRng;

pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 300;
pub const MIN_BOOTSTRAP_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchResult {
    pub n: usize,
    /// `n * V`, with `V = n^-2 sum_ij h(X_i, X_j)`.
    pub statistic: f64,
    pub p_value: f64,
    pub bootstrap_draws: usize,
    pub reject: bool,
}

/// Symmetric Stein Gram matrix, row-major `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinGram {
    n: usize,
    entries: Vec<f64>,
}

impl SteinGram {
    pub fn new(model: &dyn ScoreModel, data: &[Point]) -> Result<Self> {
        let d = model.dim();
        let n = data.len();
        let mut scores = Vec::with_capacity(n);
        for p in data {
            check_dim(d, p.dim())?;
            scores.push(model.score(p)?);
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = stein_from_scores(&data[i], &scores[i], &data[j], &scores[j]);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Ok(SteinGram { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `m * V` over the leading `m x m` block.
    pub fn statistic(&self, m: usize) -> f64 {
        let total: f64 = (0..m)
            .map(|i| self.entries[i * self.n..i * self.n + m].iter().sum::<f64>())
            .sum();
        total / m as f64
    }

    /// `m^-1 eps^T H eps` over the leading `m x m` block.
    pub fn bootstrap_statistic(&self, m: usize, signs: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &ei) in signs[..m].iter().enumerate() {
            let row = &self.entries[i * self.n..i * self.n + m];
            total += ei * row.iter().zip(signs).map(|(h, e)| h * e).sum::<f64>();
        }
        total / m as f64
    }

    /// Wild-bootstrap test over the leading `m x m` block.
    pub fn test_prefix(&self, m: usize, alpha: f64, draws: usize, rng: &mut SimRng) -> BatchResult {
        let stat = self.statistic(m);
        let mut signs = vec![0.0; m];
        let mut exceed = 0usize;
        for _ in 0..draws {
            for s in signs.iter_mut() {
                *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            if self.bootstrap_statistic(m, &signs) >= stat {
                exceed += 1;
            }
        }
        let p_value = (1 + exceed) as f64 / (1 + draws) as f64;
        BatchResult {
            n: m,
            statistic: stat,
            p_value,
            bootstrap_draws: draws,
            reject: p_value <= alpha,
        }
    }
}

fn check_args(alpha: f64, draws: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if draws < MIN_BOOTSTRAP_DRAWS {
        return Err(Error::Usage(format!(
            "need at least {MIN_BOOTSTRAP_DRAWS} bootstrap draws, got {draws}"
        )));
    }
    Ok(())
}

/// Batch KSD test at level `alpha` with `draws` wild-bootstrap replicates.
pub fn batch_ksd_test(
    model: &dyn ScoreModel,
    data: &[Point],
    alpha: f64,
    draws: usize,
    rng: &mut SimRng,
) -> Result<BatchResult> {
    check_args(alpha, draws)?;
    if data.len() < 2 {
        return Err(Error::Usage(format!("batch test needs n >= 2, got {}", data.len())));
    }
    let gram = SteinGram::new(model, data)?;
    Ok(gram.test_prefix(data.len(), alpha, draws, rng))
}

/// Re-runs the batch test on `X_1..X_t` for `t = 2..=horizon` and returns the
/// first `t` at which it rejects. Not a valid sequential procedure.
pub fn sequentialized_batch(
    model: &dyn ScoreModel,
    stream: &[Point],
    alpha: f64,
    draws: usize,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<Option<usize>> {
    check_args(alpha, draws)?;
    if horizon < 2 {
        return Err(Error::Usage(format!("horizon must be at least 2, got {horizon}")));
    }
    if stream.len() < horizon {
        return Err(Error::Usage(format!(
            "stream has {} points, horizon is {horizon}",
            stream.len()
        )));
    }
    let gram = SteinGram::new(model, &stream[..horizon])?;
    for t in 2..=horizon {
        if gram.test_prefix(t, alpha, draws, rng).reject {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
