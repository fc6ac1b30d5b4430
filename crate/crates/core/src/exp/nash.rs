use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    best_response_dynamics, nash_brute_force, payoff, potential_argmax, potential_corrected,
    ActionProfile, DynamicsTrace, GridSpec, OrgProfile, ENUMERATION_BUDGET,
};
use crate::precision::{BoundPrecision, PrecisionOracle};
use crate::seeds;

use super::config::ExperimentConfig;
use super::run::sample_orgs;

#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium {
    pub profile: ActionProfile,
    pub payoffs: Vec<f64>,
    pub potential: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub orgs: Vec<OrgProfile>,
    pub alpha: f64,
    pub grid_points: usize,
    pub equilibria: Vec<Equilibrium>,
    pub potential_argmax: ActionProfile,
    pub argmax_is_equilibrium: bool,
    pub dynamics_start: ActionProfile,
    pub dynamics: Vec<ActionProfile>,
    pub dynamics_rounds: usize,
    pub dynamics_converged: bool,
}

fn evaluate(
    d: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &BoundPrecision,
) -> Result<Equilibrium> {
    let p = precision.precision(d)?;
    let payoffs = (0..orgs.len())
        .map(|n| Ok(payoff(n, d, p, orgs, alpha)?.total))
        .collect::<Result<Vec<_>>>()?;
    Ok(Equilibrium {
        profile: d.clone(),
        payoffs,
        potential: potential_corrected(d, orgs, alpha, p)?,
    })
}

/// Enumerates the grid equilibria of the slot game defined by `config`
/// (organizations from its seed, intensity `alpha0`) and runs
/// best-response dynamics from a random grid profile.
pub fn cmd_nash(config: &ExperimentConfig, grid: GridSpec) -> Result<NashReport> {
    config.validate()?;
    let model = config.precision.analytic().ok_or_else(|| {
        Error::param("precision", "nash needs an analytic precision model (exp_saturation or log_saturation)")
    })?;
    let orgs = sample_orgs(config);
    let sizes: Vec<f64> = orgs.iter().map(|o| o.dataset_size).collect();
    let precision = model.bind(sizes)?;
    let alpha = config.alpha.alpha0;
    let equilibria = nash_brute_force(&orgs, alpha, &precision, grid)?
        .iter()
        .map(|d| evaluate(d, &orgs, alpha, &precision))
        .collect::<Result<Vec<_>>>()?;
    let (argmax, _) = potential_argmax(&orgs, alpha, &precision, grid)?;
    let argmax_is_equilibrium = equilibria.iter().any(|e| e.profile == argmax);

    let mut rng = seeds::substream(config.seed, "nash-start");
    let start = ActionProfile::new(
        (0..orgs.len())
            .map(|_| grid.value(rng.gen_range(0..grid.points())))
            .collect(),
    )?;
    let max_rounds = 10 * grid.points() * orgs.len();
    let DynamicsTrace {
        trajectory,
        rounds,
        converged,
    } = best_response_dynamics(&start, &orgs, alpha, &precision, grid, max_rounds)?;
    Ok(NashReport {
        orgs,
        alpha,
        grid_points: grid.points(),
        equilibria,
        potential_argmax: argmax,
        argmax_is_equilibrium,
        dynamics_start: start,
        dynamics: trajectory,
        dynamics_rounds: rounds,
        dynamics_converged: converged,
    })
}

/// Whether `K^N` fits the enumeration budget.
pub fn within_budget(grid: GridSpec, n: usize) -> bool {
    (grid.points() as u128)
        .checked_pow(n as u32)
        .is_some_and(|c| c <= ENUMERATION_BUDGET)
}

fn fmt_profile(d: &ActionProfile) -> String {
    let parts: Vec<String> = d.as_slice().iter().map(|x| format!("{x:.2}")).collect();
    format!("({})", parts.join(", "))
}

impl NashReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "organizations: {}", self.orgs.len());
        for (n, o) in self.orgs.iter().enumerate() {
            let _ = writeln!(
                s,
                "  org {n}: p={:.3} v={:.4} |D|={} C={:.4}",
                o.profit_rate, o.unit_energy_cost, o.dataset_size, o.comm_overhead
            );
        }
        let _ = writeln!(s, "alpha: {}  grid points: {}", self.alpha, self.grid_points);
        let _ = writeln!(s, "grid Nash equilibria: {}", self.equilibria.len());
        for e in &self.equilibria {
            let payoffs: Vec<String> = e.payoffs.iter().map(|u| format!("{u:.4}")).collect();
            let _ = writeln!(
                s,
                "  {}  payoffs [{}]  potential {:.6}",
                fmt_profile(&e.profile),
                payoffs.join(", "),
                e.potential
            );
        }
        let _ = writeln!(
            s,
            "potential argmax: {} ({})",
            fmt_profile(&self.potential_argmax),
            if self.argmax_is_equilibrium { "in NE set" } else { "NOT in NE set" }
        );
        let _ = writeln!(
            s,
            "best-response dynamics from {}: {} rounds, {}",
            fmt_profile(&self.dynamics_start),
            self.dynamics_rounds,
            if self.dynamics_converged { "converged" } else { "round limit reached" }
        );
        for d in &self.dynamics {
            let _ = writeln!(s, "  {}", fmt_profile(d));
        }
        s
    }
}
