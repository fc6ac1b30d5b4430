use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silo_incentive::env::{Env, EnvConfig};
use silo_incentive::game::{best_response, ActionProfile, GridSpec};
use silo_incentive::marl::*;
use silo_incentive::nn::{Mlp, PolicyDistribution};
use silo_incentive::seeds;

fn small_trainer() -> TrainerConfig {
    TrainerConfig {
        episodes: 2,
        batch_size: 16,
        hidden: vec![12, 6],
        ..Default::default()
    }
}

fn small_env() -> EnvConfig {
    EnvConfig {
        num_orgs: 3,
        horizon: 40,
        ..Default::default()
    }
}

#[test]
fn bandit_gradient_estimate_is_unbiased() {
    let bias = [0.4, -0.3];
    let net = Mlp::from_params(&[1, 2], vec![0.0, 0.0, bias[0], bias[1]]).unwrap();
    let actor = ActorState::new(net, 0.0, 0.2);
    let dist = PolicyDistribution::from_logits(bias.to_vec()).unwrap();
    let p = dist.probs()[0];
    let m = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut traj = Trajectory {
        observations: vec![vec![0.0]; m],
        actions: vec![],
        log_probs: vec![],
        rewards: vec![],
        bootstrap: None,
    };
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..m {
        let arm = usize::from(rng.gen::<f64>() >= p);
        let u = if arm == 0 { 1.0 } else { 0.0 };
        // d log softmax_arm / d bias_0 = 1{arm = 0} − p.
        let term = u * (f64::from(u8::from(arm == 0)) - p);
        sum += term;
        sq += term * term;
        traj.actions.push(arm);
        traj.log_probs.push(dist.log_prob(arm));
        traj.rewards.push(u);
    }
    let mean = sum / m as f64;
    let se = ((sq / m as f64 - mean * mean) / m as f64).sqrt();
    let analytic = p * (1.0 - p) * (1.0 - 0.0);
    assert!((mean - analytic).abs() <= 3.0 * se, "{mean} vs {analytic} (se {se})");

    let g = actor_gradient(&actor, &traj, &traj.rewards, RatioMode::ForcedOne).unwrap();
    assert!((g[2] - mean).abs() < 1e-12);
    assert!((g[3] + mean).abs() < 1e-12);
    assert_eq!((g[0], g[1]), (0.0, 0.0));
}

fn cycle(d: usize) -> (Trajectory, Vec<f64>, Vec<f64>) {
    let s0 = vec![1.0, 0.0];
    let s1 = vec![0.0, 1.0];
    let traj = Trajectory {
        observations: (0..d).map(|t| if t % 2 == 0 { s0.clone() } else { s1.clone() }).collect(),
        actions: vec![0; d],
        log_probs: vec![0.0; d],
        rewards: (0..d).map(|t| if t % 2 == 0 { 1.0 } else { 0.0 }).collect(),
        bootstrap: Some(if d.is_multiple_of(2) { s0.clone() } else { s1.clone() }),
    };
    (traj, s0, s1)
}

#[test]
fn critic_converges_to_the_fixed_point() {
    let gamma = 0.9;
    // (I − γP)^{-1} u with P swapping the two states.
    let det = 1.0 - gamma * gamma;
    let v_star = [1.0 / det, gamma / det];
    let (traj, s0, s1) = cycle(24);
    let mut critic = CriticState {
        net: Mlp::init(&[2, 8, 1], &mut ChaCha8Rng::seed_from_u64(4)).unwrap(),
        lr: 0.05,
        gamma,
    };
    for _ in 0..3000 {
        let y = bootstrap_targets(&traj, &critic).unwrap();
        critic_update(&mut critic, &traj, &y, 10.0).unwrap();
    }
    let v = [critic.value(&s0).unwrap(), critic.value(&s1).unwrap()];
    assert!((v_star[0] - 5.263).abs() < 1e-3 && (v_star[1] - 4.737).abs() < 1e-3);
    for k in 0..2 {
        assert!(((v[k] - v_star[k]) / v_star[k]).abs() <= 1e-2, "{v:?}");
    }
    let y = bootstrap_targets(&traj, &critic).unwrap();
    let a = advantages(&traj, &critic, &y).unwrap();
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    assert!(mean.abs() < 1e-2, "{mean}");
}

#[test]
fn critic_loss_is_nonincreasing_on_fixed_targets() {
    let (traj, _, _) = cycle(16);
    let mut critic = CriticState {
        net: Mlp::init(&[2, 8, 1], &mut ChaCha8Rng::seed_from_u64(9)).unwrap(),
        lr: 0.01,
        gamma: 0.9,
    };
    let y = bootstrap_targets(&traj, &critic).unwrap();
    let mut last = f64::INFINITY;
    for _ in 0..10 {
        let loss = critic_update(&mut critic, &traj, &y, 10.0).unwrap();
        assert!(loss <= last + 1e-12);
        last = loss;
    }
    assert!(critic_gradient(&critic, &traj, &y).unwrap().1 <= last);
}

#[test]
fn targets_two_ways_with_a_tail() {
    let rewards = [0.3, -1.0, 2.5, 0.0, 0.7];
    let (gamma, tail, v) = (0.93, 4.2, -1.7);
    let got = bootstrap_targets_from(&rewards, gamma, tail, v);
    let d = rewards.len();
    for t in 0..d {
        let mut y = 0.0;
        for k in t..d {
            y += gamma.powi((k - t) as i32) * rewards[k];
        }
        y += gamma.powi((d - t) as i32) * v;
        assert!((got[t] - y).abs() <= 1e-12, "t={t}");
    }
    let plain = discounted_returns(&rewards, gamma);
    let no_tail = bootstrap_targets_from(&rewards, gamma, 0.0, 0.0);
    assert_eq!(plain, no_tail);
}

#[test]
fn unit_ratio_reduces_to_plain_advantage_gradient() {
    let cfg = small_trainer();
    let env_cfg = small_env();
    let orgs = env_cfg.orgs.sample_orgs(3, &mut seeds::substream(1, "org-params"));
    let (mut env, _) = Env::reset(&env_cfg, &orgs, 1).unwrap();
    let mut agents: Vec<Agent> = (0..3)
        .map(|i| Agent::new(i, env_cfg.observation_len(), &cfg, 1).unwrap())
        .collect();
    let rollout = collect_rollout(&mut env, &mut agents, 16, 1e-3).unwrap();
    let traj = &rollout.trajectories[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let adv: Vec<f64> = (0..traj.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let clipped = actor_gradient(&agents[0].actor, traj, &adv, RatioMode::Clipped).unwrap();
    let plain = actor_gradient(&agents[0].actor, traj, &adv, RatioMode::ForcedOne).unwrap();
    for (a, b) in clipped.iter().zip(&plain) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    for t in 0..traj.len() {
        let f = importance_ratio(&agents[0].actor.net, &agents[0].actor.sampling, &traj.observations[t], traj.actions[t]).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }
}

#[test]
fn clip_semantics() {
    assert!((clip_eta(1.5, 0.2) - 1.2).abs() < 1e-15);
    assert!((clip_eta(0.7, 0.2) - 0.8).abs() < 1e-15);
    assert_eq!(clip_eta(1.0, 0.2), 1.0);
    assert!((surrogate(1.5, 2.0, 0.2) - 2.4).abs() < 1e-12);
    assert_eq!(surrogate(1.5, -2.0, 0.2), -3.0);
    assert!((surrogate(0.5, -2.0, 0.2) + 1.6).abs() < 1e-12);
    assert_eq!(surrogate(0.5, 2.0, 0.2), 1.0);
}

#[test]
fn rollout_and_training_are_reproducible() {
    let cfg = small_trainer();
    let env_cfg = small_env();
    let orgs = env_cfg.orgs.sample_orgs(3, &mut seeds::substream(7, "org-params"));
    for mode in Mode::ALL {
        let a = train(&env_cfg, &cfg, mode, &orgs, 7, |_| {}).unwrap();
        let b = train(&env_cfg, &cfg, mode, &orgs, 7, |_| {}).unwrap();
        assert_eq!(a.metrics, b.metrics, "{mode:?}");
        assert_eq!(a.metrics.len(), 2 * 40usize.div_ceil(16));
        assert_eq!(a.metrics.last().unwrap().global_step, 80);
        for (x, y) in a.agents.iter().zip(&b.agents) {
            assert_eq!(x.actor.net, y.actor.net);
            assert_eq!(x.critic.net, y.critic.net);
        }
        assert_eq!(a.agents.len(), if mode.learns() { 3 } else { 0 });
        let c = train(&env_cfg, &cfg, mode, &orgs, 8, |_| {}).unwrap();
        if mode.learns() {
            assert_ne!(a.metrics, c.metrics);
        }
    }
}

#[test]
fn learning_changes_parameters_and_keeps_metrics_finite() {
    let cfg = small_trainer();
    let env_cfg = small_env();
    let orgs = env_cfg.orgs.sample_orgs(3, &mut seeds::substream(2, "org-params"));
    let fresh = Agent::new(0, env_cfg.observation_len(), &cfg, 2).unwrap();
    let mut calls = 0;
    let out = train(&env_cfg, &cfg, Mode::Mpgd, &orgs, 2, |_| calls += 1).unwrap();
    assert_eq!(calls, out.metrics.len());
    assert_ne!(out.agents[0].actor.net, fresh.actor.net);
    assert_ne!(out.agents[0].critic.net, fresh.critic.net);
    for m in &out.metrics {
        assert!(m.overall_payoff.is_finite());
        assert!((m.payoff.iter().sum::<f64>() - m.overall_payoff).abs() < 1e-9);
        assert!(m.entropy.iter().all(|h| (0.0..=11f64.ln() + 1e-12).contains(h)));
    }
}

#[test]
fn wpr_runs_without_redistribution() {
    let cfg = small_trainer();
    let env_cfg = small_env();
    let orgs = env_cfg.orgs.sample_orgs(3, &mut seeds::substream(3, "org-params"));
    let wpr = env_for_mode(&env_cfg, Mode::Wpr);
    assert!(!wpr.redistribution);
    assert!(env_for_mode(&env_cfg, Mode::Mpgd).redistribution);
    let (mut env, _) = Env::reset(&wpr, &orgs, 0).unwrap();
    let step = env.step(&ActionProfile::new(vec![0.0, 0.5, 1.0]).unwrap()).unwrap();
    assert!(step.info.payoffs.iter().all(|p| p.redistribution == 0.0));
    let out = train(&env_cfg, &cfg, Mode::Wpr, &orgs, 3, |_| {}).unwrap();
    assert!(out.metrics.iter().all(|m| m.overall_payoff.is_finite()));
}

#[test]
fn greedy_best_responds_to_previous_actions() {
    let env_cfg = small_env();
    let orgs = env_cfg.orgs.sample_orgs(3, &mut seeds::substream(4, "org-params"));
    let (env, _) = Env::reset(&env_cfg, &orgs, 0).unwrap();
    let prev = ActionProfile::new(vec![0.2, 0.6, 0.9]).unwrap();
    let grid = GridSpec::new(11).unwrap();
    let d = greedy_actions(&env, &prev, grid).unwrap();
    for n in 0..3 {
        let (x, _) = best_response(n, &prev, env.orgs(), env.effective_alpha(), env.precision_model(), grid).unwrap();
        assert_eq!(d[n], x);
    }
}

#[test]
fn final_quartile_mean() {
    let rows: Vec<BatchMetrics> = (0..8)
        .map(|b| BatchMetrics {
            batch: b,
            global_step: b,
            payoff: vec![],
            overall_payoff: b as f64,
            precision: 0.0,
            alpha: 0.0,
            contribution: vec![],
            entropy: vec![],
        })
        .collect();
    assert_eq!(final_quartile_overall(&rows), 6.5);
    assert_eq!(final_quartile_overall(&rows[..2]), 1.0);
}
