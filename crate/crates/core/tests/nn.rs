use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silo_incentive::nn::*;

fn fd_check(sizes: &[usize], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::init(sizes, &mut rng).unwrap();
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = |net: &Mlp| -> f64 { net.forward(&x).unwrap().0.iter().zip(&w).map(|(a, b)| a * b).sum() };
    let (_, tape) = net.forward(&x).unwrap();
    let grad = net.backward(&tape, &w).unwrap();
    assert_eq!(grad.len(), param_count(sizes));
    let h = 1e-5;
    for _ in 0..20 {
        let i = rng.gen_range(0..grad.len());
        let p = net.params()[i];
        net.params_mut()[i] = p + h;
        let up = f(&net);
        net.params_mut()[i] = p - h;
        let down = f(&net);
        net.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-7);
        assert!(rel <= 1e-4, "param {i}: {} vs {fd}", grad[i]);
    }
}

#[test]
fn actor_and_critic_gradients_match_finite_differences() {
    fd_check(&[24, 210, 50, 11], 1);
    fd_check(&[24, 210, 50, 1], 2);
    fd_check(&[3, 4], 3);
}

#[test]
fn uniform_policy_samples_uniformly() {
    let dist = PolicyDistribution::from_logits(vec![0.7; 11]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 100_000;
    let mut counts = [0usize; 11];
    for _ in 0..m {
        let (bin, lp) = dist.sample(&mut rng);
        assert!((lp - (1.0f64 / 11.0).ln()).abs() < 1e-12);
        counts[bin] += 1;
    }
    let p = 1.0 / 11.0;
    let sd = (m as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - m as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
    }
    assert!((dist.entropy() - 11f64.ln()).abs() < 1e-12);
}

#[test]
fn log_prob_gradient_is_onehot_minus_probs() {
    let logits = vec![0.3, -1.2, 2.0, 0.0];
    let dist = PolicyDistribution::from_logits(logits.clone()).unwrap();
    let h = 1e-6;
    for bin in 0..4 {
        let g = dist.log_prob_grad(bin);
        for k in 0..4 {
            let mut up = logits.clone();
            up[k] += h;
            let mut down = logits.clone();
            down[k] -= h;
            let fd = (PolicyDistribution::from_logits(up).unwrap().log_prob(bin)
                - PolicyDistribution::from_logits(down).unwrap().log_prob(bin))
                / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-8);
        }
    }
}

#[test]
fn checkpoint_round_trip_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let net = Mlp::init(&[5, 7, 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let path = dir.path().join("net.bin");
    net.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 8 + 3 * 8 + param_count(&[5, 7, 3]) * 8);
    assert_eq!(&bytes[..8], &3u64.to_le_bytes());
    assert_eq!(&bytes[8..16], &5u64.to_le_bytes());
    assert_eq!(Mlp::load(&path).unwrap().params(), net.params());

    let mut extra = bytes.clone();
    extra.push(0);
    std::fs::write(&path, &extra).unwrap();
    assert!(matches!(Mlp::load(&path), Err(silo_incentive::Error::Checkpoint { .. })));
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(Mlp::load(&path), Err(silo_incentive::Error::Checkpoint { .. })));
}

#[test]
fn clipping_and_nonfinite_guard() {
    let mut g = vec![3.0, 4.0];
    assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
    assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    let mut p = vec![1.0, 1.0];
    assert!(sgd_step(&mut p, &[0.1, f64::NAN], 1.0, Direction::Descend).is_err());
    assert_eq!(p, vec![1.0, 1.0]);
    sgd_step(&mut p, &[0.5, -0.5], 0.1, Direction::Ascend).unwrap();
    assert_eq!(p, vec![1.05, 0.95]);
}
