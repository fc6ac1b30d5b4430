use proptest::prelude::*;
use silo_incentive::game::*;
use silo_incentive::precision::{AnalyticPrecision, BoundPrecision};

fn org() -> impl Strategy<Value = OrgProfile> {
    (900.0..1100.0f64, 0.05..5.0f64, 500.0..3000.0f64, 0.0..1.0f64)
        .prop_map(|(p, v, s, c)| OrgProfile::new(p, v, s.round(), c).unwrap())
}

fn game(max_n: usize) -> impl Strategy<Value = (Vec<OrgProfile>, Vec<f64>, f64)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(org(), n),
            prop::collection::vec(0.0..=1.0f64, n),
            0.0..20.0f64,
        )
    })
}

fn bound(orgs: &[OrgProfile]) -> BoundPrecision {
    AnalyticPrecision::default()
        .bind(orgs.iter().map(|o| o.dataset_size).collect())
        .unwrap()
}

fn precision_by_hand(orgs: &[OrgProfile], d: &[f64]) -> f64 {
    let used: f64 = orgs.iter().zip(d).map(|(o, x)| x * o.dataset_size).sum();
    let total: f64 = orgs.iter().map(|o| o.dataset_size).sum();
    0.1 + 0.85 * (1.0 - (-3.0 * used / total).exp())
}

fn payoff_by_hand(orgs: &[OrgProfile], d: &[f64], alpha: f64, n: usize) -> f64 {
    let o = &orgs[n];
    let r: f64 = d.iter().map(|dj| alpha * (d[n] - dj)).sum();
    o.profit_rate * precision_by_hand(orgs, d) - o.unit_energy_cost * d[n] * o.dataset_size - o.comm_overhead + r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn redistribution_is_zero_sum((orgs, d, alpha) in game(6)) {
        let d = ActionProfile::new(d).unwrap();
        let total: f64 = (0..orgs.len()).map(|n| redistribution(n, &d, alpha).unwrap()).sum();
        prop_assert!(total.abs() <= 1e-12);
    }

    #[test]
    fn payoff_matches_closed_form((orgs, d, alpha) in game(5)) {
        let prof = ActionProfile::new(d.clone()).unwrap();
        let p = precision_by_hand(&orgs, &d);
        for n in 0..orgs.len() {
            let got = payoff(n, &prof, p, &orgs, alpha).unwrap();
            let want = payoff_by_hand(&orgs, &d, alpha, n);
            prop_assert!((got.total - want).abs() <= 1e-9 * want.abs().max(1.0));
            let parts = got.revenue - got.energy_cost - got.comm_cost + got.redistribution;
            prop_assert!((parts - got.total).abs() <= 1e-9);
        }
    }

    #[test]
    fn corrected_potential_tracks_unilateral_deviations(
        (orgs, d, alpha) in game(4),
        who in 0usize..4,
        x in 0.0..=1.0f64,
    ) {
        let n = who % orgs.len();
        let d0 = ActionProfile::new(d).unwrap();
        let d1 = d0.with(n, x).unwrap();
        let du = payoff_by_hand(&orgs, d1.as_slice(), alpha, n) - payoff_by_hand(&orgs, d0.as_slice(), alpha, n);
        let pot = |d: &ActionProfile| {
            potential_corrected(d, &orgs, alpha, precision_by_hand(&orgs, d.as_slice())).unwrap()
        };
        let scale = du.abs().max(orgs[n].profit_rate);
        prop_assert!((orgs[n].profit_rate * (pot(&d1) - pot(&d0)) - du).abs() <= 1e-9 * scale);
        let residual = check_weighted_potential(n, &d0, &d1, &orgs, alpha, &bound(&orgs)).unwrap();
        prop_assert!(residual <= 1e-9 * scale);
    }

    #[test]
    fn potential_argmax_is_an_equilibrium((orgs, _d, alpha) in game(3)) {
        let grid = GridSpec::new(6).unwrap();
        let p = bound(&orgs);
        let ne = nash_brute_force(&orgs, alpha, &p, grid).unwrap();
        let (best, _) = potential_argmax(&orgs, alpha, &p, grid).unwrap();
        prop_assert!(!ne.is_empty());
        prop_assert!(ne.contains(&best));
    }
}

/// Independent enumeration for two players on a grid.
fn two_player_ne(orgs: &[OrgProfile], alpha: f64, k: usize) -> Vec<Vec<f64>> {
    let g: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    let u = |a: f64, b: f64, n: usize| payoff_by_hand(orgs, &[a, b], alpha, n);
    let mut out = Vec::new();
    for &a in &g {
        for &b in &g {
            let ua = u(a, b, 0);
            let ub = u(a, b, 1);
            let stable = g.iter().all(|&x| u(x, b, 0) <= ua + 1e-12) && g.iter().all(|&y| u(a, y, 1) <= ub + 1e-12);
            if stable {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

#[test]
fn brute_force_matches_independent_enumeration() {
    for (v, alpha) in [(0.2, 0.0), (0.2, 15.0), (0.35, 5.0), (4.0, 5.0), (0.1, 20.0)] {
        let orgs = vec![
            OrgProfile::new(1000.0, v, 2000.0, 0.5).unwrap(),
            OrgProfile::new(980.0, v * 1.1, 1900.0, 0.4).unwrap(),
        ];
        let grid = GridSpec::new(11).unwrap();
        let got: Vec<Vec<f64>> = nash_brute_force(&orgs, alpha, &bound(&orgs), grid)
            .unwrap()
            .into_iter()
            .map(ActionProfile::into_vec)
            .collect();
        assert_eq!(got, two_player_ne(&orgs, alpha, 11), "v={v} alpha={alpha}");
    }
}

#[test]
fn constant_precision_without_redistribution_has_origin_only() {
    let orgs = vec![
        OrgProfile::new(1000.0, 4.0, 2000.0, 0.5).unwrap(),
        OrgProfile::new(1000.0, 4.0, 2000.0, 0.5).unwrap(),
    ];
    let flat = |_: &[f64]| 0.6;
    let ne = nash_brute_force(&orgs, 0.0, &flat, GridSpec::new(11).unwrap()).unwrap();
    assert_eq!(ne, vec![ActionProfile::zeros(2)]);
}

#[test]
fn dynamics_endpoints_are_equilibria() {
    let orgs = vec![
        OrgProfile::new(1010.0, 0.2, 2050.0, 0.5).unwrap(),
        OrgProfile::new(995.0, 0.25, 1980.0, 0.5).unwrap(),
        OrgProfile::new(1003.0, 0.18, 2010.0, 0.5).unwrap(),
    ];
    let grid = GridSpec::new(11).unwrap();
    let p = bound(&orgs);
    let ne = nash_brute_force(&orgs, 6.0, &p, grid).unwrap();
    for start in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.3, 0.9, 0.1]] {
        let start = ActionProfile::new(start.to_vec()).unwrap();
        let t = best_response_dynamics(&start, &orgs, 6.0, &p, grid, 330).unwrap();
        assert!(t.converged);
        assert!(ne.contains(t.endpoint()));
        for w in t.trajectory.windows(2) {
            let u = |d: &ActionProfile| potential_corrected(d, &orgs, 6.0, precision_by_hand(&orgs, d.as_slice())).unwrap();
            assert!(u(&w[1]) > u(&w[0]));
        }
    }
}

#[test]
fn budget_is_enforced() {
    let orgs = vec![OrgProfile::new(1000.0, 4.0, 2000.0, 0.5).unwrap(); 8];
    let err = nash_brute_force(&orgs, 1.0, &bound(&orgs), GridSpec::new(21).unwrap()).unwrap_err();
    assert!(matches!(err, silo_incentive::Error::BudgetExceeded { .. }));
}
