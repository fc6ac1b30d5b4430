//! Decentralized clipped policy-gradient actor-critic agents and baselines.
//!
//! Every organization owns an actor (categorical policy over contribution
//! bins) and a critic (state-value estimate), both fed only with its own
//! observation window and trained only on its own rewards. One training
//! iteration:
//!
//! 1. snapshot the sampling policy `θ̂ ← θ`;
//! 2. roll out `D` joint slots with every agent sampling from `θ̂`;
//! 3. build bootstrapped targets `Y` with the critic at the batch boundary
//!    and advantages `A = Y − V(z)`;
//! 4. take several ascent steps on `(1/D)·Σ ∇log π_θ(d|z)·C` with the
//!    clipped surrogate `C = min(f·A, η(f)·A)`, `f = π_θ/π_θ̂`, and as many
//!    descent steps on the critic's squared error against `Y`.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, StepInfo};
use crate::error::{Error, Result};
use crate::game::{best_response, ActionProfile, GridSpec, OrgProfile};
use crate::nn::{clip_grad_norm, Direction, Mlp, PolicyDistribution};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Clipped policy gradient with the redistribution mechanism.
    Mpgd,
    /// Unclipped single-update advantage actor-critic; stands in for MAA2C.
    A2c,
    /// Per-slot myopic best response with oracle access to the precision.
    Greedy,
    /// MPGD training on payoffs without redistribution.
    Wpr,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Mpgd, Mode::A2c, Mode::Greedy, Mode::Wpr];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Mpgd => "mpgd",
            Mode::A2c => "a2c",
            Mode::Greedy => "greedy",
            Mode::Wpr => "wpr",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Mpgd => "MPGD",
            Mode::A2c => "A2C (MAA2C stand-in)",
            Mode::Greedy => "Greedy",
            Mode::Wpr => "WPR",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn learns(self) -> bool {
        self != Mode::Greedy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub episodes: usize,
    /// Mini-batch length `D`.
    pub batch_size: usize,
    pub gamma: f64,
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub updates_per_batch: usize,
    pub hidden: Vec<usize>,
    pub action_bins: usize,
    pub grad_clip: f64,
    /// Rewards are multiplied by this before learning; reported metrics are
    /// always in money units.
    pub reward_scale: f64,
    pub modes: Vec<Mode>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            batch_size: 64,
            gamma: 0.95,
            clip_eps: 0.2,
            actor_lr: 1e-2,
            critic_lr: 1e-2,
            updates_per_batch: 4,
            hidden: vec![210, 50],
            action_bins: 11,
            grad_clip: 10.0,
            reward_scale: 1e-3,
            modes: vec![Mode::Mpgd],
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trainer.episodes", self.episodes),
            ("trainer.batch_size", self.batch_size),
            ("trainer.updates_per_batch", self.updates_per_batch),
        ];
        for (f, v) in positive {
            if v == 0 {
                return Err(Error::param(f, "must be >= 1"));
            }
        }
        if self.action_bins < 2 {
            return Err(Error::param("trainer.action_bins", "must be >= 2"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::param("trainer.hidden", "layer widths must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::param("trainer.gamma", "must lie in [0, 1]"));
        }
        for (f, v) in [
            ("trainer.clip_eps", self.clip_eps),
            ("trainer.actor_lr", self.actor_lr),
            ("trainer.critic_lr", self.critic_lr),
            ("trainer.grad_clip", self.grad_clip),
            ("trainer.reward_scale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(f, "must be finite and > 0"));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::param("trainer.modes", "need at least one mode"));
        }
        Ok(())
    }

    fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

/// One agent's view of a collected batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// `log π_θ̂(d|z)` at sampling time.
    pub log_probs: Vec<f64>,
    /// Learning-scale rewards.
    pub rewards: Vec<f64>,
    /// Observation right after the batch; `None` when the episode ended.
    pub bootstrap: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorState {
    pub net: Mlp,
    /// `θ̂`, the parameters the current batch was sampled with.
    pub sampling: Mlp,
    pub lr: f64,
    pub clip_eps: f64,
}

impl ActorState {
    pub fn new(net: Mlp, lr: f64, clip_eps: f64) -> Self {
        Self {
            sampling: net.clone(),
            net,
            lr,
            clip_eps,
        }
    }

    pub fn snapshot(&mut self) {
        self.sampling = self.net.clone();
    }

    pub fn policy(&self, obs: &[f64]) -> Result<PolicyDistribution> {
        PolicyDistribution::from_logits(self.net.forward(obs)?.0)
    }

    pub fn sampling_policy(&self, obs: &[f64]) -> Result<PolicyDistribution> {
        PolicyDistribution::from_logits(self.sampling.forward(obs)?.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticState {
    pub net: Mlp,
    pub lr: f64,
    pub gamma: f64,
}

impl CriticState {
    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?.0[0])
    }
}

/// Learning agent: actor, critic and a private sampling stream.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: ActorState,
    pub critic: CriticState,
    pub rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(index: usize, obs_len: usize, cfg: &TrainerConfig, master_seed: u64) -> Result<Self> {
        let mut init = seeds::substream(master_seed, &format!("agent-{index}-init"));
        let actor = Mlp::init(&cfg.layer_sizes(obs_len, cfg.action_bins), &mut init)?;
        let critic = Mlp::init(&cfg.layer_sizes(obs_len, 1), &mut init)?;
        Ok(Self {
            actor: ActorState::new(actor, cfg.actor_lr, cfg.clip_eps),
            critic: CriticState {
                net: critic,
                lr: cfg.critic_lr,
                gamma: cfg.gamma,
            },
            rng: seeds::substream(master_seed, &format!("agent-{index}-sample")),
        })
    }

    /// Samples a bin from the sampling policy; returns `(bin, log_prob, entropy)`.
    pub fn act(&mut self, obs: &[f64]) -> Result<(usize, f64, f64)> {
        let dist = self.actor.sampling_policy(obs)?;
        let (bin, lp) = dist.sample(&mut self.rng);
        Ok((bin, lp, dist.entropy()))
    }
}

/// Rollout output: per-agent trajectories plus per-slot environment info and
/// per-agent mean policy entropy.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectories: Vec<Trajectory>,
    pub infos: Vec<StepInfo>,
    pub entropy: Vec<f64>,
}

/// Steps `env` for up to `d` slots (fewer if the episode ends) with every
/// agent acting from its sampling policy on its own observation.
pub fn collect_rollout(
    env: &mut Env,
    agents: &mut [Agent],
    d: usize,
    reward_scale: f64,
) -> Result<Rollout> {
    let n = agents.len();
    let bins = agents
        .first()
        .map(|a| a.actor.net.output_dim())
        .ok_or_else(|| Error::param("agents", "need at least one agent"))?;
    let mut trajectories = vec![
        Trajectory {
            observations: Vec::with_capacity(d),
            actions: Vec::with_capacity(d),
            log_probs: Vec::with_capacity(d),
            rewards: Vec::with_capacity(d),
            bootstrap: None,
        };
        n
    ];
    let mut infos = Vec::with_capacity(d);
    let mut entropy = vec![0.0; n];
    let mut obs = env.encoded_observations();
    for _ in 0..d {
        if env.is_done() {
            break;
        }
        let mut contributions = Vec::with_capacity(n);
        for (i, agent) in agents.iter_mut().enumerate() {
            let (bin, lp, h) = agent.act(&obs[i])?;
            let tr = &mut trajectories[i];
            tr.observations.push(obs[i].clone());
            tr.actions.push(bin);
            tr.log_probs.push(lp);
            entropy[i] += h;
            contributions.push(bin as f64 / (bins - 1) as f64);
        }
        let step = env.step(&ActionProfile::new(contributions)?)?;
        for (tr, r) in trajectories.iter_mut().zip(&step.rewards) {
            tr.rewards.push(r * reward_scale);
        }
        infos.push(step.info);
        obs = env.encoded_observations();
    }
    let steps = infos.len().max(1) as f64;
    entropy.iter_mut().for_each(|h| *h /= steps);
    if !env.is_done() {
        for (tr, o) in trajectories.iter_mut().zip(obs) {
            tr.bootstrap = Some(o);
        }
    }
    Ok(Rollout {
        trajectories,
        infos,
        entropy,
    })
}

/// In-batch discounted returns `R^t = u^t + γ·R^{t+1}` with `R^D = 0`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `Y^t = R^t − γ^{D−t}·R(D) + γ^{D−t}·V(z_D)`, where `R^t` includes the
/// discounted tail `R(D)` beyond the batch.
pub fn bootstrap_targets_from(
    rewards: &[f64],
    gamma: f64,
    tail_return: f64,
    boundary_value: f64,
) -> Vec<f64> {
    let d = rewards.len();
    let mut returns = discounted_returns(rewards, gamma);
    let mut g = 1.0;
    for t in (0..d).rev() {
        g *= gamma;
        returns[t] += g * tail_return;
    }
    let mut g = 1.0;
    let mut out = vec![0.0; d];
    for t in (0..d).rev() {
        g *= gamma;
        out[t] = returns[t] - g * tail_return + g * boundary_value;
    }
    out
}

/// Critic targets for a collected batch; a finished episode bootstraps
/// from zero.
pub fn bootstrap_targets(traj: &Trajectory, critic: &CriticState) -> Result<Vec<f64>> {
    let v = match &traj.bootstrap {
        Some(z) => critic.value(z)?,
        None => 0.0,
    };
    Ok(bootstrap_targets_from(&traj.rewards, critic.gamma, 0.0, v))
}

/// `A^t = Y^t − V(z^t)`.
pub fn advantages(traj: &Trajectory, critic: &CriticState, targets: &[f64]) -> Result<Vec<f64>> {
    traj.observations
        .iter()
        .zip(targets)
        .map(|(z, y)| Ok(y - critic.value(z)?))
        .collect()
}

/// `π_θ(d|z) / π_θ̂(d|z)`.
pub fn importance_ratio(current: &Mlp, sampling: &Mlp, obs: &[f64], bin: usize) -> Result<f64> {
    let now = PolicyDistribution::from_logits(current.forward(obs)?.0)?;
    let then = PolicyDistribution::from_logits(sampling.forward(obs)?.0)?;
    Ok((now.log_prob(bin) - then.log_prob(bin)).exp())
}

/// Clips the ratio into `[1 − ε, 1 + ε]`.
pub fn clip_eta(f: f64, eps: f64) -> f64 {
    f.max(1.0 - eps).min(1.0 + eps)
}

/// `min(f·A, η(f)·A)`.
pub fn surrogate(f: f64, advantage: f64, eps: f64) -> f64 {
    (f * advantage).min(clip_eta(f, eps) * advantage)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    Clipped,
    /// Treat every ratio as exactly one (plain advantage actor-critic).
    ForcedOne,
}

/// Estimated actor gradient `(1/D)·Σ_t ∇log π_θ(d^t|z^t)·C^t`, with
/// advantages held constant.
pub fn actor_gradient(
    actor: &ActorState,
    traj: &Trajectory,
    advantages: &[f64],
    ratio: RatioMode,
) -> Result<Vec<f64>> {
    let d = traj.len();
    if advantages.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: advantages.len(),
        });
    }
    let mut grad = vec![0.0; actor.net.params().len()];
    if d == 0 {
        return Ok(grad);
    }
    for t in 0..d {
        if advantages[t] == 0.0 {
            continue;
        }
        let (logits, tape) = actor.net.forward(&traj.observations[t])?;
        let dist = PolicyDistribution::from_logits(logits)?;
        let bin = traj.actions[t];
        let weight = match ratio {
            RatioMode::ForcedOne => advantages[t],
            RatioMode::Clipped => {
                let f = (dist.log_prob(bin) - traj.log_probs[t]).exp();
                surrogate(f, advantages[t], actor.clip_eps)
            }
        };
        let upstream: Vec<f64> = dist
            .log_prob_grad(bin)
            .into_iter()
            .map(|g| g * weight / d as f64)
            .collect();
        let g = actor.net.backward(&tape, &upstream)?;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient("actor".into()));
    }
    Ok(grad)
}

/// One ascent step on the estimated actor gradient; returns the gradient
/// norm before clipping.
pub fn actor_update(
    actor: &mut ActorState,
    traj: &Trajectory,
    advantages: &[f64],
    ratio: RatioMode,
    grad_clip: f64,
) -> Result<f64> {
    let mut grad = actor_gradient(actor, traj, advantages, ratio)?;
    let norm = clip_grad_norm(&mut grad, grad_clip);
    actor.net.step(&grad, actor.lr, Direction::Ascend)?;
    Ok(norm)
}

/// Semi-gradient `(1/D)·Σ_t (V(z^t) − Y^t)·∇V(z^t)`; also returns the mean
/// squared error `(1/D)·Σ (V − Y)²`.
pub fn critic_gradient(
    critic: &CriticState,
    traj: &Trajectory,
    targets: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let d = traj.len();
    if targets.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: targets.len(),
        });
    }
    let mut grad = vec![0.0; critic.net.params().len()];
    let mut loss = 0.0;
    if d == 0 {
        return Ok((grad, loss));
    }
    for (z, y) in traj.observations.iter().zip(targets) {
        let (v, tape) = critic.net.forward(z)?;
        let err = v[0] - y;
        loss += err * err;
        let g = critic.net.backward(&tape, &[err / d as f64])?;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient("critic".into()));
    }
    Ok((grad, loss / d as f64))
}

/// One descent step for the critic; returns the loss before the step.
pub fn critic_update(
    critic: &mut CriticState,
    traj: &Trajectory,
    targets: &[f64],
    grad_clip: f64,
) -> Result<f64> {
    let (mut grad, loss) = critic_gradient(critic, traj, targets)?;
    clip_grad_norm(&mut grad, grad_clip);
    critic.net.step(&grad, critic.lr, Direction::Descend)?;
    Ok(loss)
}

/// Trains one agent on its own batch. Pure in the agent's own state.
fn update_agent(agent: &mut Agent, traj: &Trajectory, mode: Mode, cfg: &TrainerConfig) -> Result<()> {
    if traj.is_empty() {
        return Ok(());
    }
    let targets = bootstrap_targets(traj, &agent.critic)?;
    let adv = advantages(traj, &agent.critic, &targets)?;
    let (rounds, ratio) = match mode {
        Mode::A2c => (1, RatioMode::ForcedOne),
        _ => (cfg.updates_per_batch, RatioMode::Clipped),
    };
    for _ in 0..rounds {
        actor_update(&mut agent.actor, traj, &adv, ratio, cfg.grad_clip)?;
        critic_update(&mut agent.critic, traj, &targets, cfg.grad_clip)?;
    }
    Ok(())
}

/// Aggregated quantities of one training batch, in money units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub batch: usize,
    /// Environment steps completed after this batch.
    pub global_step: usize,
    pub payoff: Vec<f64>,
    pub overall_payoff: f64,
    pub precision: f64,
    pub alpha: f64,
    pub contribution: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl BatchMetrics {
    fn from_infos(batch: usize, global_step: usize, infos: &[StepInfo], entropy: Vec<f64>) -> Self {
        let n = infos.first().map_or(0, |i| i.actions.len());
        let k = infos.len().max(1) as f64;
        let mut payoff = vec![0.0; n];
        let mut contribution = vec![0.0; n];
        let (mut precision, mut alpha) = (0.0, 0.0);
        for info in infos {
            for i in 0..n {
                payoff[i] += info.payoffs[i].total / k;
                contribution[i] += info.actions[i] / k;
            }
            precision += info.precision / k;
            alpha += info.alpha / k;
        }
        Self {
            batch,
            global_step,
            overall_payoff: payoff.iter().sum(),
            payoff,
            precision,
            alpha,
            contribution,
            entropy,
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub mode: Mode,
    pub metrics: Vec<BatchMetrics>,
    /// Empty for non-learning modes.
    pub agents: Vec<Agent>,
}

/// Environment configuration as seen by `mode` (WPR drops redistribution).
pub fn env_for_mode(base: &EnvConfig, mode: Mode) -> EnvConfig {
    let mut cfg = base.clone();
    if mode == Mode::Wpr {
        cfg.redistribution = false;
    }
    cfg
}

/// Runs `episodes` episodes of `mode` on organizations `orgs`, calling
/// `on_batch` after every batch.
pub fn train(
    env_config: &EnvConfig,
    cfg: &TrainerConfig,
    mode: Mode,
    orgs: &[OrgProfile],
    seed: u64,
    mut on_batch: impl FnMut(&BatchMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env_config = env_for_mode(env_config, mode);
    env_config.validate()?;
    let n = env_config.num_orgs;
    let mut agents = if mode.learns() {
        (0..n)
            .map(|i| Agent::new(i, env_config.observation_len(), cfg, seed))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut metrics = Vec::new();
    let mut global_step = 0;
    for episode in 0..cfg.episodes {
        let env_seed = seeds::substream_seed(seed, &format!("env/{episode}"));
        let (mut env, _) = Env::reset(&env_config, orgs, env_seed)?;
        let mut greedy_prev = ActionProfile::zeros(n);
        while !env.is_done() {
            let (infos, entropy) = if mode.learns() {
                agents.iter_mut().for_each(|a| a.actor.snapshot());
                let rollout = collect_rollout(&mut env, &mut agents, cfg.batch_size, cfg.reward_scale)?;
                agents
                    .par_iter_mut()
                    .zip(rollout.trajectories.par_iter())
                    .map(|(agent, traj)| update_agent(agent, traj, mode, cfg))
                    .collect::<Result<Vec<_>>>()?;
                (rollout.infos, rollout.entropy)
            } else {
                let grid = GridSpec::new(cfg.action_bins)?;
                let mut infos = Vec::with_capacity(cfg.batch_size);
                for _ in 0..cfg.batch_size {
                    if env.is_done() {
                        break;
                    }
                    let d = greedy_actions(&env, &greedy_prev, grid)?;
                    infos.push(env.step(&d)?.info);
                    greedy_prev = d;
                }
                (infos, vec![0.0; n])
            };
            global_step += infos.len();
            let row = BatchMetrics::from_infos(metrics.len(), global_step, &infos, entropy);
            if !row.overall_payoff.is_finite() {
                return Err(Error::NonFinite(format!("metrics of batch {}", row.batch)));
            }
            on_batch(&row);
            metrics.push(row);
        }
    }
    Ok(TrainOutcome {
        mode,
        metrics,
        agents,
    })
}

/// Each organization's grid best response against the others' previous
/// actions under the current slot's payoffs.
pub fn greedy_actions(env: &Env, previous: &ActionProfile, grid: GridSpec) -> Result<ActionProfile> {
    let mut out = Vec::with_capacity(previous.len());
    for n in 0..previous.len() {
        let (x, _) = best_response(
            n,
            previous,
            env.orgs(),
            env.effective_alpha(),
            env.precision_model(),
            grid,
        )?;
        out.push(x);
    }
    ActionProfile::new(out)
}

/// Mean overall payoff over the last quarter of the batches.
pub fn final_quartile_overall(metrics: &[BatchMetrics]) -> f64 {
    if metrics.is_empty() {
        return f64::NAN;
    }
    let start = metrics.len() - (metrics.len() / 4).max(1);
    let tail = &metrics[start..];
    tail.iter().map(|m| m.overall_payoff).sum::<f64>() / tail.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn traj(rewards: Vec<f64>, obs_dim: usize) -> Trajectory {
        let d = rewards.len();
        Trajectory {
            observations: (0..d).map(|t| vec![t as f64 * 0.1; obs_dim]).collect(),
            actions: vec![0; d],
            log_probs: vec![-1.0; d],
            rewards,
            bootstrap: Some(vec![0.5; obs_dim]),
        }
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_returns(&[3.0, -1.0, 2.0], 0.0), vec![3.0, -1.0, 2.0]);
        assert_eq!(discounted_returns(&[1.0, 1.0, 1.0], 0.5), vec![1.75, 1.5, 1.0]);
        assert_eq!(discounted_returns(&[1.0, 2.0, 3.0], 1.0), vec![6.0, 5.0, 3.0]);
    }

    #[test]
    fn bootstrap_examples() {
        let zero = CriticState {
            net: Mlp::zeros(&[2, 3, 1]).unwrap(),
            lr: 0.1,
            gamma: 0.9,
        };
        let t = traj(vec![1.0, 2.0, 3.0], 2);
        assert_eq!(
            bootstrap_targets(&t, &zero).unwrap(),
            discounted_returns(&t.rewards, 0.9)
        );
        let y = bootstrap_targets_from(&[2.0], 0.9, 0.0, 4.0);
        assert!((y[0] - (2.0 + 0.9 * 4.0)).abs() < 1e-15);
        let a = advantages(&t, &zero, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_eta(1.5, 0.2), 1.2);
        assert_eq!(clip_eta(0.9, 0.2), 0.9);
        assert_eq!(clip_eta(0.7, 0.2), 0.8);
        for eps in [0.01, 0.2, 3.0] {
            assert_eq!(clip_eta(1.0, eps), 1.0);
        }
        assert!((surrogate(1.5, 2.0, 0.2) - 2.4).abs() < 1e-15);
        assert_eq!(surrogate(1.5, -2.0, 0.2), -3.0);
        assert_eq!(surrogate(1.1, 2.0, 0.2), 2.2);
        assert_eq!(surrogate(0.9, -2.0, 0.2), 0.9 * -2.0);
    }

    #[test]
    fn importance_ratio_is_one_for_identical_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(&[3, 8, 4], &mut rng).unwrap();
        for bin in 0..4 {
            assert_eq!(importance_ratio(&net, &net, &[0.1, 0.2, 0.3], bin).unwrap(), 1.0);
        }
    }

    #[test]
    fn importance_ratio_doubled_logit_gap() {
        // Output-bias-only nets: logits (g, 0) versus (2g, 0).
        let g: f64 = 0.7;
        let a = Mlp::from_params(&[1, 2], vec![0.0, 0.0, g, 0.0]).unwrap();
        let b = Mlp::from_params(&[1, 2], vec![0.0, 0.0, 2.0 * g, 0.0]).unwrap();
        let f = importance_ratio(&b, &a, &[0.0], 0).unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!((f - sig(2.0 * g) / sig(g)).abs() < 1e-14);
        assert!(f > 0.0);
    }

    #[test]
    fn zero_advantage_gives_zero_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::init(&[2, 5, 3], &mut rng).unwrap();
        let mut actor = ActorState::new(net, 0.1, 0.2);
        let before = actor.net.clone();
        let t = traj(vec![1.0, 2.0], 2);
        actor_update(&mut actor, &t, &[0.0, 0.0], RatioMode::Clipped, 10.0).unwrap();
        assert_eq!(actor.net.params(), before.params());
    }

    #[test]
    fn critic_at_target_does_not_move() {
        let mut critic = CriticState {
            net: Mlp::zeros(&[2, 3, 1]).unwrap(),
            lr: 0.5,
            gamma: 0.9,
        };
        let t = traj(vec![1.0, 2.0], 2);
        critic_update(&mut critic, &t, &[0.0, 0.0], 10.0).unwrap();
        assert!(critic.net.params().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in Mode::ALL {
            assert_eq!(Mode::parse(m.name()), Some(m));
        }
        assert_eq!(Mode::parse("MPGD"), Some(Mode::Mpgd));
        assert_eq!(Mode::parse("ppo"), None);
    }

    #[test]
    fn final_quartile() {
        let mk = |v: f64| BatchMetrics {
            batch: 0,
            global_step: 0,
            payoff: vec![],
            overall_payoff: v,
            precision: 0.0,
            alpha: 0.0,
            contribution: vec![],
            entropy: vec![],
        };
        let rows: Vec<_> = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0].map(mk).to_vec();
        assert_eq!(final_quartile_overall(&rows), 7.5);
    }
}
