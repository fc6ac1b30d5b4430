//! Global-model precision as a black box of the contribution profile.
//!
//! Two analytic saturating models are used wherever a stationary, stateless
//! precision is needed (game oracles, default environment). [`MicroFl`] is a
//! small FedAvg simulation of logistic regression on two Gaussian classes
//! whose test accuracy is the precision; its model persists across rounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ActionProfile;

/// Anything that maps a contribution profile to a precision in `[0, 1]`.
pub trait PrecisionOracle {
    fn precision(&self, d: &ActionProfile) -> Result<f64>;
}

impl<F> PrecisionOracle for F
where
    F: Fn(&[f64]) -> f64,
{
    fn precision(&self, d: &ActionProfile) -> Result<f64> {
        let p = self(d.as_slice());
        if !p.is_finite() {
            return Err(Error::NonFinite("precision".into()));
        }
        Ok(p.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    /// `P_lo + (P_hi − P_lo)·(1 − exp(−β·S))`
    Exp,
    /// `P_lo + (P_hi − P_lo)·ln(1 + β·S)/ln(1 + β)`
    Log,
}

/// Concave saturating precision in the data share
/// `S = Σ d_n|D_n| / Σ |D_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPrecision {
    pub kind: Saturation,
    pub p_lo: f64,
    pub p_hi: f64,
    pub beta: f64,
}

impl Default for AnalyticPrecision {
    fn default() -> Self {
        Self {
            kind: Saturation::Exp,
            p_lo: 0.1,
            p_hi: 0.95,
            beta: 3.0,
        }
    }
}

impl AnalyticPrecision {
    pub fn new(kind: Saturation, p_lo: f64, p_hi: f64, beta: f64) -> Result<Self> {
        let m = Self {
            kind,
            p_lo,
            p_hi,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_lo.is_finite() && self.p_hi.is_finite() && self.beta.is_finite()) {
            return Err(Error::NonFinite("precision model parameters".into()));
        }
        if !(0.0..=1.0).contains(&self.p_lo) || !(0.0..=1.0).contains(&self.p_hi) {
            return Err(Error::param("p_lo/p_hi", "must lie in [0, 1]"));
        }
        if self.p_lo >= self.p_hi {
            return Err(Error::param("p_lo", "must be < p_hi"));
        }
        if self.beta <= 0.0 {
            return Err(Error::param("beta", "must be > 0"));
        }
        Ok(())
    }

    /// Precision as a function of the data share `S ∈ [0, 1]`.
    pub fn of_share(&self, share: f64) -> f64 {
        let gain = match self.kind {
            Saturation::Exp => 1.0 - (-self.beta * share).exp(),
            Saturation::Log => (self.beta * share).ln_1p() / self.beta.ln_1p(),
        };
        (self.p_lo + (self.p_hi - self.p_lo) * gain).clamp(0.0, 1.0)
    }

    pub fn bind(self, sizes: Vec<f64>) -> Result<BoundPrecision> {
        self.validate()?;
        if sizes.is_empty() || sizes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::param("dataset sizes", "must be positive and finite"));
        }
        Ok(BoundPrecision { model: self, sizes })
    }
}

/// Evaluates an analytic model at `d` with dataset sizes `sizes`.
pub fn eval_analytic(model: &AnalyticPrecision, d: &ActionProfile, sizes: &[f64]) -> Result<f64> {
    model.validate()?;
    if d.len() != sizes.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            got: d.len(),
        });
    }
    let total: f64 = sizes.iter().sum();
    let used: f64 = d.as_slice().iter().zip(sizes).map(|(x, s)| x * s).sum();
    Ok(model.of_share(used / total))
}

/// An analytic model together with the dataset sizes it weighs by.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPrecision {
    pub model: AnalyticPrecision,
    pub sizes: Vec<f64>,
}

impl PrecisionOracle for BoundPrecision {
    fn precision(&self, d: &ActionProfile) -> Result<f64> {
        eval_analytic(&self.model, d, &self.sizes)
    }
}

/// Two-class Gaussian task split across organizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFlTask {
    pub feature_dim: usize,
    pub per_org_sizes: Vec<usize>,
    /// Euclidean distance between the two class means.
    pub class_separation: f64,
    pub test_set_size: usize,
    pub seed: u64,
}

impl Default for SyntheticFlTask {
    fn default() -> Self {
        Self {
            feature_dim: default_feature_dim(),
            per_org_sizes: vec![100; 4],
            class_separation: default_separation(),
            test_set_size: default_test_size(),
            seed: 0,
        }
    }
}

impl SyntheticFlTask {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::param("feature_dim", "must be >= 1"));
        }
        if self.per_org_sizes.is_empty() || self.per_org_sizes.contains(&0) {
            return Err(Error::param("per_org_sizes", "every pool needs >= 1 sample"));
        }
        if self.test_set_size == 0 {
            return Err(Error::param("test_set_size", "must be >= 1"));
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(Error::param("class_separation", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Labelled samples, row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// First `m` samples.
    pub fn prefix(&self, m: usize) -> Dataset {
        Dataset {
            dim: self.dim,
            features: self.features[..m * self.dim].to_vec(),
            labels: self.labels[..m].to_vec(),
        }
    }
}

fn sample_pool(rng: &mut ChaCha8Rng, size: usize, direction: &[f64], sep: f64) -> Dataset {
    let dim = direction.len();
    let mut features = Vec::with_capacity(size * dim);
    let mut labels = Vec::with_capacity(size);
    for i in 0..size {
        // Alternating labels keep every prefix balanced.
        let y = (i % 2) as f64;
        let sign = if y > 0.5 { 0.5 } else { -0.5 };
        for &u in direction {
            let noise: f64 = rng.sample(StandardNormal);
            features.push(sign * sep * u + noise);
        }
        labels.push(y);
    }
    Dataset {
        dim,
        features,
        labels,
    }
}

/// Logistic-regression parameters: `dim` weights followed by a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub params: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            params: vec![0.0; dim + 1],
        }
    }

    fn logit(&self, x: &[f64]) -> f64 {
        let dim = x.len();
        self.params[..dim]
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.params[dim]
    }

    /// Full-batch gradient descent on the mean logistic loss.
    pub fn gradient_descent(&mut self, data: &Dataset, epochs: usize, lr: f64) {
        if data.is_empty() {
            return;
        }
        let m = data.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        for _ in 0..epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..data.len() {
                let x = data.row(i);
                let z = self.logit(x);
                let err = 1.0 / (1.0 + (-z).exp()) - data.labels[i];
                for (g, v) in grad.iter_mut().zip(x) {
                    *g += err * v;
                }
                grad[data.dim] += err;
            }
            for (w, g) in self.params.iter_mut().zip(&grad) {
                *w -= lr * g / m;
            }
        }
    }

    /// Fraction of samples classified correctly (logit ≥ 0 predicts class 1).
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = (0..data.len())
            .filter(|&i| {
                let pred = if self.logit(data.row(i)) >= 0.0 { 1.0 } else { 0.0 };
                pred == data.labels[i]
            })
            .count();
        correct as f64 / data.len() as f64
    }
}

/// FedAvg simulation state: per-organization pools, a shared test set and
/// the current global model.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroFl {
    pub task: SyntheticFlTask,
    pub pools: Vec<Dataset>,
    pub test: Dataset,
    pub global: LogisticModel,
    pub precision: f64,
}

pub fn microfl_reset(task: &SyntheticFlTask) -> Result<MicroFl> {
    task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let mut direction: Vec<f64> = (0..task.feature_dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|x| *x /= norm);
    } else {
        direction[0] = 1.0;
    }
    let pools = task
        .per_org_sizes
        .iter()
        .map(|&s| sample_pool(&mut rng, s, &direction, task.class_separation))
        .collect();
    let test = sample_pool(&mut rng, task.test_set_size, &direction, task.class_separation);
    let global = LogisticModel::zeros(task.feature_dim);
    let precision = global.accuracy(&test);
    Ok(MicroFl {
        task: task.clone(),
        pools,
        test,
        global,
        precision,
    })
}

impl MicroFl {
    /// One FedAvg round; returns the test accuracy of the aggregated model.
    ///
    /// Organization `n` trains on the first `round(d_n·|D_n|)` samples of its
    /// pool. Aggregation weights are the contributed sample counts;
    /// organizations contributing nothing are left out.
    pub fn round(&mut self, d: &ActionProfile, local_epochs: usize, lr: f64) -> Result<f64> {
        if d.len() != self.pools.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pools.len(),
                got: d.len(),
            });
        }
        let mut sum = vec![0.0; self.global.params.len()];
        let mut weight = 0.0;
        for (pool, &share) in self.pools.iter().zip(d.as_slice()) {
            let x = ((share * pool.len() as f64).round() as usize).min(pool.len());
            if x == 0 {
                continue;
            }
            let mut local = self.global.clone();
            local.gradient_descent(&pool.prefix(x), local_epochs, lr);
            for (s, w) in sum.iter_mut().zip(&local.params) {
                *s += x as f64 * w;
            }
            weight += x as f64;
        }
        if weight > 0.0 {
            self.global.params = sum.into_iter().map(|s| s / weight).collect();
            self.precision = self.global.accuracy(&self.test);
        }
        Ok(self.precision)
    }
}

pub fn microfl_round(
    state: &mut MicroFl,
    d: &ActionProfile,
    local_epochs: usize,
    lr: f64,
) -> Result<f64> {
    state.round(d, local_epochs, lr)
}

/// Configurable precision source for the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrecisionSpec {
    ExpSaturation {
        #[serde(default = "default_p_lo")]
        p_lo: f64,
        #[serde(default = "default_p_hi")]
        p_hi: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    LogSaturation {
        #[serde(default = "default_p_lo")]
        p_lo: f64,
        #[serde(default = "default_p_hi")]
        p_hi: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    MicroFl {
        #[serde(default = "default_feature_dim")]
        feature_dim: usize,
        #[serde(default = "default_separation")]
        class_separation: f64,
        #[serde(default = "default_test_size")]
        test_set_size: usize,
        #[serde(default = "default_local_epochs")]
        local_epochs: usize,
        #[serde(default = "default_fl_lr")]
        lr: f64,
    },
}

fn default_p_lo() -> f64 {
    0.1
}
fn default_p_hi() -> f64 {
    0.95
}
fn default_beta() -> f64 {
    3.0
}
fn default_feature_dim() -> usize {
    10
}
fn default_separation() -> f64 {
    4.0
}
fn default_test_size() -> usize {
    2000
}
fn default_local_epochs() -> usize {
    1
}
fn default_fl_lr() -> f64 {
    0.5
}

impl Default for PrecisionSpec {
    fn default() -> Self {
        PrecisionSpec::ExpSaturation {
            p_lo: default_p_lo(),
            p_hi: default_p_hi(),
            beta: default_beta(),
        }
    }
}

impl PrecisionSpec {
    pub fn analytic(&self) -> Option<AnalyticPrecision> {
        match *self {
            PrecisionSpec::ExpSaturation { p_lo, p_hi, beta } => Some(AnalyticPrecision {
                kind: Saturation::Exp,
                p_lo,
                p_hi,
                beta,
            }),
            PrecisionSpec::LogSaturation { p_lo, p_hi, beta } => Some(AnalyticPrecision {
                kind: Saturation::Log,
                p_lo,
                p_hi,
                beta,
            }),
            PrecisionSpec::MicroFl { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PrecisionSpec::MicroFl {
                feature_dim,
                class_separation,
                test_set_size,
                lr,
                ..
            } => {
                if *feature_dim == 0 || *test_set_size == 0 {
                    return Err(Error::param("precision", "feature_dim and test_set_size must be >= 1"));
                }
                if !(class_separation.is_finite() && *class_separation >= 0.0) {
                    return Err(Error::param("precision.class_separation", "must be >= 0"));
                }
                if !(lr.is_finite() && *lr > 0.0) {
                    return Err(Error::param("precision.lr", "must be > 0"));
                }
                Ok(())
            }
            other => other.analytic().expect("analytic").validate(),
        }
    }

    /// Instantiates the model for organizations with the given dataset sizes.
    pub fn build(&self, sizes: &[f64], seed: u64) -> Result<PrecisionModel> {
        self.validate()?;
        match *self {
            PrecisionSpec::MicroFl {
                feature_dim,
                class_separation,
                test_set_size,
                local_epochs,
                lr,
            } => {
                let task = SyntheticFlTask {
                    feature_dim,
                    per_org_sizes: sizes.iter().map(|&s| s.round().max(1.0) as usize).collect(),
                    class_separation,
                    test_set_size,
                    seed,
                };
                Ok(PrecisionModel::MicroFl {
                    state: Box::new(microfl_reset(&task)?),
                    local_epochs,
                    lr,
                })
            }
            _ => Ok(PrecisionModel::Analytic(
                self.analytic().expect("analytic").bind(sizes.to_vec())?,
            )),
        }
    }
}

/// A live precision source owned by one environment.
#[derive(Debug, Clone, PartialEq)]
pub enum PrecisionModel {
    Analytic(BoundPrecision),
    MicroFl {
        state: Box<MicroFl>,
        local_epochs: usize,
        lr: f64,
    },
}

impl PrecisionModel {
    /// Realizes one slot at profile `d`, advancing any internal state.
    pub fn advance(&mut self, d: &ActionProfile) -> Result<f64> {
        match self {
            PrecisionModel::Analytic(m) => m.precision(d),
            PrecisionModel::MicroFl {
                state,
                local_epochs,
                lr,
            } => state.round(d, *local_epochs, *lr),
        }
    }

    /// Counterfactual precision at `d` without touching the live state.
    pub fn peek(&self, d: &ActionProfile) -> Result<f64> {
        match self {
            PrecisionModel::Analytic(m) => m.precision(d),
            PrecisionModel::MicroFl {
                state,
                local_epochs,
                lr,
            } => state.as_ref().clone().round(d, *local_epochs, *lr),
        }
    }
}

impl PrecisionOracle for PrecisionModel {
    fn precision(&self, d: &ActionProfile) -> Result<f64> {
        self.peek(d)
    }
}
