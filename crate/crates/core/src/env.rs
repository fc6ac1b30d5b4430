//! Multi-agent partially observable environment over repeated slots.
//!
//! Every slot all organizations submit a contribution at once. The
//! environment realizes the precision, pays out the game payoffs under the
//! current redistribution intensity, adapts the intensity for the next slot,
//! and appends one record to every agent's observation window. Agent `n`
//! only ever sees the others' past contributions, its own overhead, the
//! intensity and the precision of the last `H` slots.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{payoff, ActionProfile, OrgProfile, PayoffBreakdown};
use crate::precision::{PrecisionModel, PrecisionSpec};
use crate::seeds;

/// Precision-gain denominators smaller than this hold the previous intensity.
pub const ALPHA_DENOM_EPS: f64 = 1e-6;

/// A Gaussian truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !self.mean.is_finite() || !self.std.is_finite() {
            return Err(Error::param(field, "mean and std must be finite"));
        }
        if self.std < 0.0 {
            return Err(Error::param(format!("{field}.std"), "must be >= 0"));
        }
        Ok(())
    }

    /// Rejection-samples the non-negative part; falls back to 0 when the
    /// mass above zero is negligible.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return self.mean.max(0.0);
        }
        let normal = Normal::new(self.mean, self.std).expect("validated std");
        for _ in 0..1000 {
            let x = normal.sample(rng);
            if x >= 0.0 {
                return x;
            }
        }
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrgDistributions {
    pub profit_rate: Gaussian,
    pub unit_energy_cost: Gaussian,
    pub dataset_size: Gaussian,
    pub comm_overhead: Gaussian,
}

impl Default for OrgDistributions {
    fn default() -> Self {
        Self {
            profit_rate: Gaussian::new(1000.0, 10.0),
            unit_energy_cost: Gaussian::new(4.0, 0.2),
            dataset_size: Gaussian::new(2000.0, 50.0),
            comm_overhead: Gaussian::new(0.5, 0.02),
        }
    }
}

impl OrgDistributions {
    pub fn validate(&self) -> Result<()> {
        self.profit_rate.validate("orgs.profit_rate")?;
        self.unit_energy_cost.validate("orgs.unit_energy_cost")?;
        self.dataset_size.validate("orgs.dataset_size")?;
        self.comm_overhead.validate("orgs.comm_overhead")?;
        if self.profit_rate.mean <= 0.0 {
            return Err(Error::param("orgs.profit_rate.mean", "must be > 0"));
        }
        if self.dataset_size.mean < 1.0 {
            return Err(Error::param("orgs.dataset_size.mean", "must be >= 1"));
        }
        Ok(())
    }

    /// Draws the persistent characteristics of `n` organizations. The
    /// overhead field holds a first draw and is resampled every slot by the
    /// environment.
    pub fn sample_orgs<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<OrgProfile> {
        (0..n)
            .map(|_| {
                let profit_rate = self.profit_rate.sample(rng).max(f64::MIN_POSITIVE);
                let unit_energy_cost = self.unit_energy_cost.sample(rng);
                let dataset_size = self.dataset_size.sample(rng).round().max(1.0);
                let comm_overhead = self.comm_overhead.sample(rng);
                OrgProfile {
                    profit_rate,
                    unit_energy_cost,
                    dataset_size,
                    comm_overhead,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Intensity scales with the ratio of consecutive precision gains.
    AdaptiveGain,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaSchedule {
    pub alpha0: f64,
    /// Clamp ceiling; `4·alpha0` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    pub mode: AlphaMode,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        Self {
            alpha0: 5.0,
            alpha_max: None,
            mode: AlphaMode::AdaptiveGain,
        }
    }
}

impl AlphaSchedule {
    pub fn ceiling(&self) -> f64 {
        self.alpha_max.unwrap_or(4.0 * self.alpha0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.alpha0 >= 0.0) {
            return Err(Error::param("alpha.alpha0", "must be finite and >= 0"));
        }
        let ceiling = self.ceiling();
        if !ceiling.is_finite() || ceiling < self.alpha0 {
            return Err(Error::param("alpha.alpha_max", "must be finite and >= alpha0"));
        }
        Ok(())
    }
}

/// Next-slot intensity `α0·(P_t − P_{t−1})/(P_{t−1} − P_{t−2})` clamped to
/// `[0, alpha_max]`; a vanishing denominator keeps `alpha_prev`.
pub fn alpha_update(
    p_t: f64,
    p_t_minus_1: f64,
    p_t_minus_2: f64,
    alpha0: f64,
    alpha_prev: f64,
    alpha_max: f64,
) -> f64 {
    let denom = p_t_minus_1 - p_t_minus_2;
    if denom.abs() < ALPHA_DENOM_EPS {
        return alpha_prev;
    }
    let next = (p_t - p_t_minus_1) / denom * alpha0;
    if next.is_nan() {
        return alpha_prev;
    }
    next.clamp(0.0, alpha_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_orgs: usize,
    /// Slots per episode (`T`).
    pub horizon: usize,
    /// Observation window length (`H`).
    pub window: usize,
    pub orgs: OrgDistributions,
    pub alpha: AlphaSchedule,
    pub precision: PrecisionSpec,
    /// False removes the redistribution term from every payoff.
    pub redistribution: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_orgs: 4,
            horizon: 256,
            window: 4,
            orgs: OrgDistributions::default(),
            alpha: AlphaSchedule::default(),
            precision: PrecisionSpec::default(),
            redistribution: true,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_orgs < 2 {
            return Err(Error::param("num_orgs", "must be >= 2"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be >= 1"));
        }
        if self.window == 0 {
            return Err(Error::param("window", "must be >= 1"));
        }
        self.orgs.validate()?;
        self.alpha.validate()?;
        self.precision.validate()
    }

    /// Length of an encoded observation, `H·(N+2)`.
    pub fn observation_len(&self) -> usize {
        self.window * (self.num_orgs + 2)
    }
}

/// What agent `n` learns about one finished slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// `d_{-n}` in ascending organization order.
    pub others_actions: Vec<f64>,
    pub comm_overhead: f64,
    pub alpha: f64,
    pub precision: f64,
}

impl SlotRecord {
    pub fn zero(others: usize) -> Self {
        Self {
            others_actions: vec![0.0; others],
            comm_overhead: 0.0,
            alpha: 0.0,
            precision: 0.0,
        }
    }
}

/// The last `H` slot records, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub window: Vec<SlotRecord>,
}

impl Observation {
    pub fn encode(&self, alpha_max: f64) -> Vec<f64> {
        encode_observation(&self.window, alpha_max)
    }
}

/// Flattens a window: per record `d_{-n}`, `C_n`, `α/alpha_max`, `P`.
pub fn encode_observation(window: &[SlotRecord], alpha_max: f64) -> Vec<f64> {
    let per = window.first().map_or(0, |r| r.others_actions.len() + 3);
    let mut out = Vec::with_capacity(window.len() * per);
    for r in window {
        out.extend_from_slice(&r.others_actions);
        out.push(r.comm_overhead / 1.0);
        out.push(if alpha_max > 0.0 { r.alpha / alpha_max } else { 0.0 });
        out.push(r.precision);
    }
    out
}

/// Per-slot diagnostics returned by [`Env::step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub slot: usize,
    pub precision: f64,
    /// Intensity applied to this slot's payoffs.
    pub alpha: f64,
    pub actions: Vec<f64>,
    pub comm_overhead: Vec<f64>,
    pub payoffs: Vec<PayoffBreakdown>,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub info: StepInfo,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    orgs: Vec<OrgProfile>,
    precision: PrecisionModel,
    rng: ChaCha8Rng,
    slot: usize,
    alpha: f64,
    precision_history: Vec<f64>,
    windows: Vec<VecDeque<SlotRecord>>,
}

impl Env {
    /// Starts an episode. `orgs` carry the persistent characteristics;
    /// their overhead fields are replaced by the slot-0 draw.
    pub fn reset(
        config: &EnvConfig,
        orgs: &[OrgProfile],
        seed: u64,
    ) -> Result<(Self, Vec<Observation>)> {
        config.validate()?;
        if orgs.len() != config.num_orgs {
            return Err(Error::DimensionMismatch {
                expected: config.num_orgs,
                got: orgs.len(),
            });
        }
        let sizes: Vec<f64> = orgs.iter().map(|o| o.dataset_size).collect();
        let precision = config
            .precision
            .build(&sizes, seeds::substream_seed(seed, "precision"))?;
        let mut rng = seeds::substream(seed, "comm");
        let mut orgs = orgs.to_vec();
        for o in &mut orgs {
            o.comm_overhead = config.orgs.comm_overhead.sample(&mut rng);
            o.validate()?;
        }
        let n = config.num_orgs;
        let windows = (0..n)
            .map(|_| (0..config.window).map(|_| SlotRecord::zero(n - 1)).collect())
            .collect();
        let env = Self {
            config: config.clone(),
            orgs,
            precision,
            rng,
            slot: 0,
            alpha: config.alpha.alpha0,
            precision_history: Vec::new(),
            windows,
        };
        let obs = env.observations();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Profiles with the current slot's overheads.
    pub fn orgs(&self) -> &[OrgProfile] {
        &self.orgs
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Intensity actually applied to payoffs this slot.
    pub fn effective_alpha(&self) -> f64 {
        if self.config.redistribution {
            self.alpha
        } else {
            0.0
        }
    }

    pub fn alpha_max(&self) -> f64 {
        self.config.alpha.ceiling()
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.horizon
    }

    pub fn precision_history(&self) -> &[f64] {
        &self.precision_history
    }

    /// Read-only access to the precision source, for baselines that are
    /// granted counterfactual queries.
    pub fn precision_model(&self) -> &PrecisionModel {
        &self.precision
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.windows
            .iter()
            .map(|w| Observation {
                window: w.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn encoded_observations(&self) -> Vec<Vec<f64>> {
        let amax = self.alpha_max();
        self.windows
            .iter()
            .map(|w| {
                let window: Vec<SlotRecord> = w.iter().cloned().collect();
                encode_observation(&window, amax)
            })
            .collect()
    }

    pub fn step(&mut self, actions: &ActionProfile) -> Result<Step> {
        if self.is_done() {
            return Err(Error::EpisodeFinished(self.slot));
        }
        if actions.len() != self.config.num_orgs {
            return Err(Error::DimensionMismatch {
                expected: self.config.num_orgs,
                got: actions.len(),
            });
        }
        let p = self.precision.advance(actions)?;
        let alpha = self.effective_alpha();
        let payoffs = (0..self.orgs.len())
            .map(|n| payoff(n, actions, p, &self.orgs, alpha))
            .collect::<Result<Vec<_>>>()?;
        let rewards = payoffs.iter().map(|b| b.total).collect();
        let comm: Vec<f64> = self.orgs.iter().map(|o| o.comm_overhead).collect();
        for (n, w) in self.windows.iter_mut().enumerate() {
            w.push_front(SlotRecord {
                others_actions: actions.others(n),
                comm_overhead: comm[n],
                alpha,
                precision: p,
            });
            w.truncate(self.config.window);
        }
        let info = StepInfo {
            slot: self.slot,
            precision: p,
            alpha,
            actions: actions.as_slice().to_vec(),
            comm_overhead: comm,
            payoffs,
        };

        self.precision_history.push(p);
        if self.config.alpha.mode == AlphaMode::AdaptiveGain {
            if let [.., p2, p1, p0] = self.precision_history[..] {
                self.alpha = alpha_update(
                    p0,
                    p1,
                    p2,
                    self.config.alpha.alpha0,
                    self.alpha,
                    self.config.alpha.ceiling(),
                );
            }
        }
        let dist = self.config.orgs.comm_overhead;
        for o in &mut self.orgs {
            o.comm_overhead = dist.sample(&mut self.rng);
        }
        self.slot += 1;

        Ok(Step {
            observations: self.observations(),
            rewards,
            info,
            done: self.is_done(),
        })
    }
}
