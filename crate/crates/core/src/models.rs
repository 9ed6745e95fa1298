//! Target models known up to normalisation: score functions, payoff bounds
//! and samplers.
//!
//! Every model provides a bound `M(x~)` with `h(x, x~) >= -M(x~)` for all `x`,
//! which is what keeps the betting payoff above `-1`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{norm, Point};
use crate::rng::SimRng;

/// Multiplier `k >= 1` applied to a model's payoff bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundScale(f64);

impl BoundScale {
    pub const ONE: BoundScale = BoundScale(1.0);

    pub fn new(multiplier: f64) -> Result<Self> {
        if multiplier.is_finite() && multiplier >= 1.0 {
            Ok(BoundScale(multiplier))
        } else {
            Err(Error::Usage(format!(
                "bound scale must be a finite value >= 1, got {multiplier}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for BoundScale {
    fn default() -> Self {
        BoundScale::ONE
    }
}

/// A density `p` on `R^d` known up to its normalising constant.
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `grad log p(x)` into `out`. Inputs are assumed dimension-checked.
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    /// `M(x~)` given the already computed score at `x~`.
    fn bound_given_score(&self, x: &[f64], score: &[f64]) -> f64;

    /// `log p~(x)` for some fixed normalisation convention.
    fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64>;

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.score_into(x, &mut out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Model("score evaluated to a non-finite value".into()))
        }
    }

    /// `scale * M(x~)`.
    fn payoff_bound(&self, x: &[f64], scale: BoundScale) -> Result<f64> {
        let s = self.score(x)?;
        Ok(scale.get() * self.bound_given_score(x, &s))
    }
}

/// `N(mean, I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Usage("gaussian mean must have at least one coordinate".into()));
        }
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(Error::NonFinite("gaussian mean"));
        }
        Ok(GaussianModel { mean })
    }

    pub fn standard(d: usize) -> Self {
        GaussianModel {
            mean: vec![0.0; d.max(1)],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Normalised log density, used for likelihood ratios between Gaussians.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let q: f64 = x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        -0.5 * q - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn sample(&self, rng: &mut SimRng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(self.draw(rng)).expect("finite normal draw"))
            .collect()
    }

    pub(crate) fn draw(&self, rng: &mut SimRng) -> Vec<f64> {
        self.mean
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

impl ScoreModel for GaussianModel {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), m) in out.iter_mut().zip(x).zip(&self.mean) {
            *o = -(a - m);
        }
    }

    fn bound_given_score(&self, _x: &[f64], score: &[f64]) -> f64 {
        // |s(x~)| = |x~ - mean|
        let r = norm(score);
        r * (1.0 + r) + 3.0
    }

    fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(-0.5 * x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
    }
}

/// `p(x) ∝ exp(t1 tanh x1 + t2 tanh x2 - |x|^2 / 2)` on `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntractableModel {
    theta: [f64; 2],
}

/// Proposals allowed per accepted draw before the rejection sampler gives up.
pub const MAX_PROPOSALS_PER_DRAW: usize = 1_000_000;

impl IntractableModel {
    pub const DIM: usize = 3;

    pub fn new(theta: [f64; 2]) -> Self {
        IntractableModel { theta }
    }

    pub fn try_new(theta: [f64; 2]) -> Result<Self> {
        if theta.iter().all(|t| t.is_finite()) {
            Ok(IntractableModel { theta })
        } else {
            Err(Error::NonFinite("intractable model theta"))
        }
    }

    pub fn theta(&self) -> [f64; 2] {
        self.theta
    }

    fn theta_norm(&self) -> f64 {
        self.theta[0].hypot(self.theta[1])
    }

    /// Exact draws by rejection from `N(0, I_3)` with envelope
    /// `exp(|t1| + |t2|)`.
    pub fn sample(&self, rng: &mut SimRng, n: usize) -> Result<Vec<Point>> {
        (0..n).map(|_| Point::new(self.draw(rng)?.to_vec())).collect()
    }

    pub(crate) fn draw(&self, rng: &mut SimRng) -> Result<[f64; 3]> {
        let [t1, t2] = self.theta;
        let envelope = t1.abs() + t2.abs();
        for _ in 0..MAX_PROPOSALS_PER_DRAW {
            let x: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let log_ratio = t1 * x[0].tanh() + t2 * x[1].tanh() - envelope;
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                return Ok(x);
            }
        }
        Err(Error::Sampler(format!(
            "rejection sampler exceeded {MAX_PROPOSALS_PER_DRAW} proposals"
        )))
    }
}

impl ScoreModel for IntractableModel {
    fn dim(&self) -> usize {
        Self::DIM
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let t0 = x[0].tanh();
        let t1 = x[1].tanh();
        out[0] = self.theta[0] * (1.0 - t0 * t0) - x[0];
        out[1] = self.theta[1] * (1.0 - t1 * t1) - x[1];
        out[2] = -x[2];
    }

    fn bound_given_score(&self, _x: &[f64], score: &[f64]) -> f64 {
        let tn = self.theta_norm();
        let s = norm(score);
        (tn + s + 1.0) * s + tn + 1.0
    }

    fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(Self::DIM, x.len())?;
        Ok(self.theta[0] * x[0].tanh() + self.theta[1] * x[1].tanh() - 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
    }
}

/// How the RBM bound controls `|B|_op`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorNorm {
    /// `|B|_F >= |B|_op`.
    #[default]
    Frobenius,
    /// Largest singular value.
    Spectral,
}

/// Gaussian-Bernoulli restricted Boltzmann machine with joint
/// `p(x, h) ∝ exp(x^T B h / 2 + b^T x + c^T h - |x|^2 / 2)`, `h ∈ {-1, 1}^dh`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    /// Row-major `d x dh`.
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    norm_kind: OperatorNorm,
    // |B| * sqrt(dh), fixed at construction
    coupling: f64,
}

impl RbmModel {
    pub fn new(weights: Vec<f64>, visible_bias: Vec<f64>, hidden_bias: Vec<f64>) -> Result<Self> {
        Self::with_norm(weights, visible_bias, hidden_bias, OperatorNorm::Frobenius)
    }

    pub fn with_norm(
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
        norm_kind: OperatorNorm,
    ) -> Result<Self> {
        let d = visible_bias.len();
        let dh = hidden_bias.len();
        if d == 0 || dh == 0 {
            return Err(Error::Usage(
                "rbm needs at least one visible and one hidden unit".into(),
            ));
        }
        if weights.len() != d * dh {
            return Err(Error::Usage(format!(
                "rbm weight matrix has {} entries, expected {d} x {dh}",
                weights.len()
            )));
        }
        if !weights
            .iter()
            .chain(&visible_bias)
            .chain(&hidden_bias)
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("rbm parameters"));
        }
        let mut model = RbmModel {
            weights,
            visible_bias,
            hidden_bias,
            norm_kind,
            coupling: 0.0,
        };
        model.coupling = model.weight_norm(norm_kind) * (dh as f64).sqrt();
        Ok(model)
    }

    /// `b = 0`, `c = 0`, and `B_ij = 1` when hidden unit `j` is wired to
    /// visible unit `i`; hidden unit `j` is wired to the `per_hidden`
    /// consecutive visible units starting at `j * per_hidden` (mod `d`).
    pub fn block_structured(d: usize, dh: usize, per_hidden: usize) -> Result<Self> {
        if d == 0 || dh == 0 {
            return Err(Error::Usage(
                "rbm needs at least one visible and one hidden unit".into(),
            ));
        }
        let mut weights = vec![0.0; d * dh];
        for j in 0..dh {
            for k in 0..per_hidden.min(d) {
                let i = (j * per_hidden + k) % d;
                weights[i * dh + j] = 1.0;
            }
        }
        Self::new(weights, vec![0.0; d], vec![0.0; dh])
    }

    /// Adds `shift` to every weight entry, zeros included.
    pub fn shifted_weights(&self, shift: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w + shift).collect();
        Self::with_norm(
            weights,
            self.visible_bias.clone(),
            self.hidden_bias.clone(),
            self.norm_kind,
        )
    }

    /// Replaces the visible bias with the constant vector `value`.
    pub fn with_visible_bias(&self, value: f64) -> Result<Self> {
        let b = vec![value; self.visible_dim()];
        Self::with_norm(self.weights.clone(), b, self.hidden_bias.clone(), self.norm_kind)
    }

    pub fn with_operator_norm(&self, norm_kind: OperatorNorm) -> Self {
        Self::with_norm(
            self.weights.clone(),
            self.visible_bias.clone(),
            self.hidden_bias.clone(),
            norm_kind,
        )
        .expect("parameters already validated")
    }

    pub fn visible_dim(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn operator_norm(&self) -> OperatorNorm {
        self.norm_kind
    }

    pub fn weight_norm(&self, kind: OperatorNorm) -> f64 {
        match kind {
            OperatorNorm::Frobenius => norm(&self.weights),
            OperatorNorm::Spectral => {
                let m = DMatrix::from_row_slice(self.visible_dim(), self.hidden_dim(), &self.weights);
                m.singular_values().max()
            }
        }
    }

    // B^T x / 2 + c
    fn hidden_field(&self, x: &[f64], out: &mut [f64]) {
        let dh = self.hidden_dim();
        out.copy_from_slice(&self.hidden_bias);
        for (i, xi) in x.iter().enumerate() {
            let row = &self.weights[i * dh..(i + 1) * dh];
            for (o, w) in out.iter_mut().zip(row) {
                *o += 0.5 * w * xi;
            }
        }
    }

    /// Two-block Gibbs sampler. Starts from uniform hidden units, discards
    /// `burn_in` sweeps, then keeps every `thin`-th visible state.
    pub fn sample_gibbs(&self, rng: &mut SimRng, n: usize, burn_in: usize, thin: usize) -> Result<Vec<Point>> {
        if thin == 0 {
            return Err(Error::Usage("thin must be at least 1".into()));
        }
        let mut chain = GibbsChain::new(self, rng);
        for _ in 0..burn_in {
            chain.sweep(rng);
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            for _ in 0..thin {
                chain.sweep(rng);
            }
            out.push(Point::new(chain.visible().to_vec())?);
        }
        Ok(out)
    }
}

/// State of an RBM Gibbs chain.
pub struct GibbsChain<'a> {
    model: &'a RbmModel,
    x: Vec<f64>,
    h: Vec<f64>,
    field: Vec<f64>,
}

impl<'a> GibbsChain<'a> {
    pub fn new(model: &'a RbmModel, rng: &mut SimRng) -> Self {
        let h = (0..model.hidden_dim())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        GibbsChain {
            model,
            x: vec![0.0; model.visible_dim()],
            h,
            field: vec![0.0; model.hidden_dim()],
        }
    }

    /// `x | h ~ N(b + B h / 2, I)`, then `P(h_j = 1 | x) = sigmoid(2 a_j)`
    /// with `a = B^T x / 2 + c`.
    pub fn sweep(&mut self, rng: &mut SimRng) {
        let m = self.model;
        let dh = m.hidden_dim();
        for i in 0..m.visible_dim() {
            let row = &m.weights[i * dh..(i + 1) * dh];
            let mean = m.visible_bias[i] + 0.5 * row.iter().zip(&self.h).map(|(w, h)| w * h).sum::<f64>();
            self.x[i] = mean + rng.sample::<f64, _>(StandardNormal);
        }
        m.hidden_field(&self.x, &mut self.field);
        for (h, a) in self.h.iter_mut().zip(&self.field) {
            let p_up = 1.0 / (1.0 + (-2.0 * a).exp());
            *h = if rng.random::<f64>() < p_up { 1.0 } else { -1.0 };
        }
    }

    pub fn visible(&self) -> &[f64] {
        &self.x
    }
}

// log(2 cosh a) without overflow
fn log_two_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p()
}

impl ScoreModel for RbmModel {
    fn dim(&self) -> usize {
        self.visible_dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let dh = self.hidden_dim();
        let mut field = vec![0.0; dh];
        self.hidden_field(x, &mut field);
        for a in field.iter_mut() {
            *a = a.tanh();
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weights[i * dh..(i + 1) * dh];
            *o = self.visible_bias[i] - x[i] + 0.5 * row.iter().zip(&field).map(|(w, t)| w * t).sum::<f64>();
        }
    }

    fn bound_given_score(&self, _x: &[f64], score: &[f64]) -> f64 {
        let s = norm(score);
        // div_x div_y k >= min(d - 3, 0); nonnegative from d = 3 on
        let low_dim = (3.0 - self.visible_dim() as f64).max(0.0);
        (s + 1.0 + self.coupling) * s + self.coupling + 1.0 + low_dim
    }

    /// Closed form `b^T x - |x|^2/2 + sum_j log(2 cosh a_j)`, i.e. the sum
    /// over hidden configurations carried out analytically.
    fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut field = vec![0.0; self.hidden_dim()];
        self.hidden_field(x, &mut field);
        let lin: f64 = x.iter().zip(&self.visible_bias).map(|(a, b)| a * b - 0.5 * a * a).sum();
        Ok(lin + field.iter().map(|&a| log_two_cosh(a)).sum::<f64>())
    }
}

/// Any of the shipped model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gaussian(GaussianModel),
    Intractable(IntractableModel),
    Rbm(RbmModel),
}

/// Sampler settings for models without an exact sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsSettings {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        GibbsSettings { burn_in: 1000, thin: 1 }
    }
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gaussian(_) => "gaussian",
            Model::Intractable(_) => "intractable",
            Model::Rbm(_) => "rbm",
        }
    }

    fn inner(&self) -> &dyn ScoreModel {
        match self {
            Model::Gaussian(m) => m,
            Model::Intractable(m) => m,
            Model::Rbm(m) => m,
        }
    }

    /// `n` draws; exact for the Gaussian and intractable families, a single
    /// Gibbs chain for the RBM.
    pub fn sample(&self, rng: &mut SimRng, n: usize, gibbs: GibbsSettings) -> Result<Vec<Point>> {
        let mut stream = PointStream::new(self, gibbs, rng)?;
        (0..n).map(|_| Point::new(stream.next_point(rng)?)).collect()
    }
}

/// Lazily drawn data stream; for the RBM the chain state persists between
/// draws, so consecutive points follow one chain.
pub enum PointStream<'a> {
    Gaussian(&'a GaussianModel),
    Intractable(&'a IntractableModel),
    Gibbs { chain: GibbsChain<'a>, thin: usize },
}

impl<'a> PointStream<'a> {
    /// Burn-in for the RBM chain happens here.
    pub fn new(model: &'a Model, gibbs: GibbsSettings, rng: &mut SimRng) -> Result<Self> {
        Ok(match model {
            Model::Gaussian(m) => PointStream::Gaussian(m),
            Model::Intractable(m) => PointStream::Intractable(m),
            Model::Rbm(m) => {
                if gibbs.thin == 0 {
                    return Err(Error::Usage("thin must be at least 1".into()));
                }
                let mut chain = GibbsChain::new(m, rng);
                for _ in 0..gibbs.burn_in {
                    chain.sweep(rng);
                }
                PointStream::Gibbs {
                    chain,
                    thin: gibbs.thin,
                }
            }
        })
    }

    pub fn next_point(&mut self, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            PointStream::Gaussian(m) => Ok(m.draw(rng)),
            PointStream::Intractable(m) => Ok(m.draw(rng)?.to_vec()),
            PointStream::Gibbs { chain, thin } => {
                for _ in 0..*thin {
                    chain.sweep(rng);
                }
                Ok(chain.visible().to_vec())
            }
        }
    }
}

impl ScoreModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner().score_into(x, out)
    }

    fn bound_given_score(&self, x: &[f64], score: &[f64]) -> f64 {
        self.inner().bound_given_score(x, score)
    }

    fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        self.inner().log_unnormalized_density(x)
    }
}

impl From<GaussianModel> for Model {
    fn from(m: GaussianModel) -> Self {
        Model::Gaussian(m)
    }
}

impl From<IntractableModel> for Model {
    fn from(m: IntractableModel) -> Self {
        Model::Intractable(m)
    }
}

impl From<RbmModel> for Model {
    fn from(m: RbmModel) -> Self {
        Model::Rbm(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::stein_from_scores;
    use crate::rng::seeded;

    fn random_rbm(rng: &mut SimRng, d: usize, dh: usize) -> RbmModel {
        let w = (0..d * dh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = (0..dh).map(|_| rng.random_range(-1.0..1.0)).collect();
        RbmModel::new(w, b, c).unwrap()
    }

    fn fd_score(m: &dyn ScoreModel, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (m.log_unnormalized_density(&xp).unwrap() - m.log_unnormalized_density(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    // brute force sum over the 2^dh hidden states
    fn rbm_log_density_enumerated(m: &RbmModel, x: &[f64]) -> f64 {
        let dh = m.hidden_dim();
        let d = m.visible_dim();
        let mut terms = Vec::new();
        for mask in 0..(1usize << dh) {
            let h: Vec<f64> = (0..dh).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let mut e = 0.0;
            for i in 0..d {
                for j in 0..dh {
                    e += 0.5 * x[i] * m.weights()[i * dh + j] * h[j];
                }
                e += m.visible_bias()[i] * x[i] - 0.5 * x[i] * x[i];
            }
            e += m.hidden_bias().iter().zip(&h).map(|(c, h)| c * h).sum::<f64>();
            terms.push(e);
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    }

    #[test]
    fn score_examples() {
        let g = GaussianModel::standard(1);
        assert_eq!(g.score(&[2.0]).unwrap(), vec![-2.0]);
        let it = IntractableModel::new([0.0, 0.0]);
        assert_eq!(it.score(&[0.5, -1.0, 2.0]).unwrap(), vec![-0.5, 1.0, -2.0]);
        let rbm = RbmModel::new(vec![0.0; 6], vec![0.0; 3], vec![0.3, -2.0]).unwrap();
        assert_eq!(rbm.score(&[1.0, -0.5, 4.0]).unwrap(), vec![-1.0, 0.5, -4.0]);
        assert!(g.score(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn bound_examples() {
        let g = GaussianModel::standard(1);
        assert_eq!(g.payoff_bound(&[1.0], BoundScale::ONE).unwrap(), 5.0);
        assert_eq!(g.payoff_bound(&[0.0], BoundScale::ONE).unwrap(), 3.0);
        assert_eq!(g.payoff_bound(&[1.0], BoundScale::new(3.0).unwrap()).unwrap(), 15.0);
        let rbm = RbmModel::new(vec![0.0; 9], vec![0.0; 3], vec![0.0; 3]).unwrap();
        let v = rbm.payoff_bound(&[2.0, 0.0, 0.0], BoundScale::ONE).unwrap();
        assert!((v - 7.0).abs() < 1e-12);
        assert!(BoundScale::new(0.5).is_err());
        assert!(BoundScale::new(f64::NAN).is_err());
    }

    #[test]
    fn log_density_examples() {
        let g = GaussianModel::standard(1);
        assert_eq!(g.log_unnormalized_density(&[2.0]).unwrap(), -2.0);
        let it = IntractableModel::new([1.0, 1.0]);
        assert_eq!(it.log_unnormalized_density(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rbm_closed_form_matches_enumeration() {
        let mut rng = seeded(11);
        let m = random_rbm(&mut rng, 3, 4);
        let x = [0.2, -1.0, 0.7];
        let y = [1.5, 0.3, -0.4];
        // both conventions differ by the same additive constant
        let dx = m.log_unnormalized_density(&x).unwrap() - rbm_log_density_enumerated(&m, &x);
        let dy = m.log_unnormalized_density(&y).unwrap() - rbm_log_density_enumerated(&m, &y);
        assert!((dx - dy).abs() < 1e-10);
    }

    #[test]
    fn scores_match_finite_differences() {
        let mut rng = seeded(3);
        let models: Vec<Model> = vec![
            GaussianModel::new(vec![0.5, -1.0]).unwrap().into(),
            IntractableModel::new([1.0, -0.5]).into(),
            random_rbm(&mut rng, 4, 3).into(),
        ];
        for m in &models {
            for _ in 0..100 {
                let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let s = m.score(&x).unwrap();
                for (a, b) in s.iter().zip(fd_score(m, &x)) {
                    assert!((a - b).abs() <= 1e-4 * (1.0 + a.abs()), "{} {a} vs {b}", m.kind());
                }
            }
        }
    }

    #[test]
    fn frobenius_dominates_spectral() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let m = random_rbm(&mut rng, 6, 3);
            let spectral = m.with_operator_norm(OperatorNorm::Spectral);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fro = m.payoff_bound(&x, BoundScale::ONE).unwrap();
            let op = spectral.payoff_bound(&x, BoundScale::ONE).unwrap();
            assert!(fro >= op - 1e-12);
            assert!(m.weight_norm(OperatorNorm::Frobenius) >= m.weight_norm(OperatorNorm::Spectral) - 1e-12);
        }
    }

    #[test]
    fn bounds_hold_on_probe_points() {
        let mut rng = seeded(9);
        let models: Vec<Model> = vec![
            GaussianModel::standard(1).into(),
            GaussianModel::new(vec![0.3, 0.0]).unwrap().into(),
            IntractableModel::new([1.0, 1.0]).into(),
            random_rbm(&mut rng, 2, 2).into(),
            random_rbm(&mut rng, 5, 2).into(),
        ];
        for m in &models {
            let d = m.dim();
            for _ in 0..10 {
                let xt: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let st = m.score(&xt).unwrap();
                let bound = m.bound_given_score(&xt, &st);
                for _ in 0..2000 {
                    let radius = rng.random_range(0.0..10.0);
                    let x: Vec<f64> = xt
                        .iter()
                        .map(|v| v + radius * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let sx = m.score(&x).unwrap();
                    assert!(stein_from_scores(&x, &sx, &xt, &st) >= -bound - 1e-9);
                }
            }
        }
    }

    #[test]
    fn gaussian_sampler_moments_and_determinism() {
        let g = GaussianModel::new(vec![0.7]).unwrap();
        let n = 1_000_000;
        let xs = g.sample(&mut seeded(1), n);
        let mean = xs.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let var = xs.iter().map(|p| (p[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.7).abs() < 4.0 / (n as f64).sqrt());
        // sd of the sample variance is sqrt(2/n)
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        assert_eq!(g.sample(&mut seeded(2), 10), g.sample(&mut seeded(2), 10));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn intractable_sampler_matches_quadrature() {
        let m = IntractableModel::new([1.0, 1.0]);
        let dens = |x: f64| (x.tanh() - 0.5 * x * x).exp();
        let z = simpson(dens, -12.0, 12.0, 20_000);
        let expected = simpson(|x| x.tanh() * dens(x), -12.0, 12.0, 20_000) / z;
        let n = 1_000_000;
        let xs = m.sample(&mut seeded(4), n).unwrap();
        let got = xs.iter().map(|p| p[0].tanh()).sum::<f64>() / n as f64;
        assert!((got - expected).abs() < 1e-2, "{got} vs {expected}");
        assert_eq!(
            m.sample(&mut seeded(6), 5).unwrap(),
            m.sample(&mut seeded(6), 5).unwrap()
        );
    }

    #[test]
    fn intractable_at_zero_is_standard_normal() {
        let m = IntractableModel::new([0.0, 0.0]);
        let g = GaussianModel::standard(3);
        // log acceptance ratio is exactly 0, so no uniform is drawn and proposals pass through
        let mut r1 = seeded(8);
        let a = m.sample(&mut r1, 50).unwrap();
        let mut r2 = seeded(8);
        let b: Vec<Point> = (0..50).map(|_| Point::new(g.draw(&mut r2)).unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn gibbs_first_moment_matches_enumeration() {
        let w = vec![1.2, -0.8];
        let b = vec![0.3, -0.2];
        let c = vec![0.4];
        let m = RbmModel::new(w.clone(), b.clone(), c.clone()).unwrap();
        // p(h) ∝ exp(c h + |mu_h|^2 / 2), x | h ~ N(mu_h, I), mu_h = b + B h / 2
        let mut weights = Vec::new();
        let mut means = Vec::new();
        for h in [-1.0, 1.0] {
            let mu: Vec<f64> = (0..2).map(|i| b[i] + 0.5 * w[i] * h).collect();
            weights.push((c[0] * h + 0.5 * (mu[0] * mu[0] + mu[1] * mu[1])).exp());
            means.push(mu);
        }
        let z: f64 = weights.iter().sum();
        let exact: Vec<f64> = (0..2)
            .map(|i| (0..2).map(|k| weights[k] * means[k][i]).sum::<f64>() / z)
            .collect();
        let xs = m.sample_gibbs(&mut seeded(12), 200_000, 100, 1).unwrap();
        for i in 0..2 {
            let got = xs.iter().map(|p| p[i]).sum::<f64>() / xs.len() as f64;
            assert!((got - exact[i]).abs() < 2e-2, "coord {i}: {got} vs {}", exact[i]);
        }
        assert_eq!(
            m.sample_gibbs(&mut seeded(1), 20, 5, 2).unwrap(),
            m.sample_gibbs(&mut seeded(1), 20, 5, 2).unwrap()
        );
    }

    #[test]
    fn gibbs_with_zero_weights_is_iid_gaussian() {
        let m = RbmModel::new(vec![0.0; 4], vec![1.0, -1.0], vec![0.5, 0.5]).unwrap();
        let xs = m.sample_gibbs(&mut seeded(2), 100_000, 0, 1).unwrap();
        let mean0 = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
        let mean1 = xs.iter().map(|p| p[1]).sum::<f64>() / xs.len() as f64;
        assert!((mean0 - 1.0).abs() < 0.02 && (mean1 + 1.0).abs() < 0.02);
    }

    #[test]
    fn block_structure_and_variants() {
        let m = RbmModel::block_structured(20, 5, 5).unwrap();
        let ones = m.weights().iter().filter(|&&w| w == 1.0).count();
        assert_eq!(ones, 25);
        for j in 0..5 {
            assert_eq!((0..20).filter(|i| m.weights()[i * 5 + j] == 1.0).count(), 5);
        }
        let shifted = m.shifted_weights(0.5).unwrap();
        assert!(shifted.weights().iter().all(|&w| w == 0.5 || w == 1.5));
        assert_eq!(m.with_visible_bias(1.0).unwrap().visible_bias(), &[1.0; 20][..]);
        assert!(RbmModel::new(vec![0.0; 3], vec![0.0; 2], vec![0.0; 2]).is_err());
    }
}
