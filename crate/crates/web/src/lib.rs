//! WebAssembly bindings for the static demo page. Every export takes and
//! returns JSON strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use silo_incentive::game::{
    best_response, best_response_dynamics, nash_brute_force, payoff, potential_argmax,
    potential_corrected, ActionProfile, GridSpec, OrgProfile,
};
use silo_incentive::precision::{BoundPrecision, PrecisionOracle, PrecisionSpec};
use silo_incentive::{Error, Result};

/// One slot game.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub orgs: Vec<OrgProfile>,
    pub alpha: f64,
    #[serde(default)]
    pub precision: PrecisionSpec,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    21
}

impl GameSpec {
    fn parse(json: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(json)?;
        if spec.orgs.len() < 2 {
            return Err(Error::InvalidParameter {
                field: "orgs".into(),
                reason: "need at least two organizations".into(),
            });
        }
        for o in &spec.orgs {
            o.validate()?;
        }
        if !(spec.alpha.is_finite() && spec.alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "alpha".into(),
                reason: "must be finite and >= 0".into(),
            });
        }
        Ok(spec)
    }

    fn precision(&self) -> Result<BoundPrecision> {
        let model = self.precision.analytic().ok_or_else(|| Error::InvalidParameter {
            field: "precision".into(),
            reason: "only analytic models are available here".into(),
        })?;
        model.bind(self.orgs.iter().map(|o| o.dataset_size).collect())
    }

    fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid)
    }
}

/// Two cheap-energy organizations, where equilibria are interior.
pub fn example_game_json() -> String {
    let spec = GameSpec {
        orgs: vec![
            OrgProfile::new(1000.0, 0.25, 2000.0, 0.5).unwrap(),
            OrgProfile::new(990.0, 0.3, 1950.0, 0.5).unwrap(),
        ],
        alpha: 5.0,
        precision: PrecisionSpec::default(),
        grid: 21,
    };
    serde_json::to_string_pretty(&spec).unwrap()
}

#[derive(Serialize)]
pub struct Curve {
    pub xs: Vec<f64>,
    pub payoff: Vec<f64>,
    pub precision: Vec<f64>,
    pub redistribution: Vec<f64>,
    pub best_x: f64,
    pub best_payoff: f64,
}

/// Payoff of `player` over its grid contributions, others fixed at `profile`.
pub fn payoff_curve_impl(spec: &str, player: usize, profile: &str) -> Result<Curve> {
    let spec = GameSpec::parse(spec)?;
    let p = spec.precision()?;
    let grid = spec.grid()?;
    let d = ActionProfile::new(serde_json::from_str(profile)?)?;
    let mut out = Curve {
        xs: Vec::new(),
        payoff: Vec::new(),
        precision: Vec::new(),
        redistribution: Vec::new(),
        best_x: 0.0,
        best_payoff: 0.0,
    };
    for x in grid.values() {
        let trial = d.with(player, x)?;
        let prec = p.precision(&trial)?;
        let u = payoff(player, &trial, prec, &spec.orgs, spec.alpha)?;
        out.xs.push(x);
        out.payoff.push(u.total);
        out.precision.push(prec);
        out.redistribution.push(u.redistribution);
    }
    (out.best_x, out.best_payoff) = best_response(player, &d, &spec.orgs, spec.alpha, &p, grid)?;
    Ok(out)
}

#[derive(Serialize)]
pub struct Surface {
    pub xs: Vec<f64>,
    /// `potential[i][j]` at `(xs[i], xs[j])`.
    pub potential: Vec<Vec<f64>>,
    pub equilibria: Vec<Vec<f64>>,
    pub argmax: Vec<f64>,
}

/// Corrected potential over the grid of a two-organization game, with its
/// pure equilibria.
pub fn potential_surface_impl(spec: &str) -> Result<Surface> {
    let spec = GameSpec::parse(spec)?;
    if spec.orgs.len() != 2 {
        return Err(Error::InvalidParameter {
            field: "orgs".into(),
            reason: "the surface needs exactly two organizations".into(),
        });
    }
    let p = spec.precision()?;
    let grid = spec.grid()?;
    let xs: Vec<f64> = grid.values().collect();
    let mut potential = Vec::with_capacity(xs.len());
    for &a in &xs {
        let row = xs
            .iter()
            .map(|&b| {
                let d = ActionProfile::new(vec![a, b])?;
                potential_corrected(&d, &spec.orgs, spec.alpha, p.precision(&d)?)
            })
            .collect::<Result<Vec<_>>>()?;
        potential.push(row);
    }
    let equilibria = nash_brute_force(&spec.orgs, spec.alpha, &p, grid)?
        .into_iter()
        .map(ActionProfile::into_vec)
        .collect();
    let (argmax, _) = potential_argmax(&spec.orgs, spec.alpha, &p, grid)?;
    Ok(Surface {
        xs,
        potential,
        equilibria,
        argmax: argmax.into_vec(),
    })
}

#[derive(Serialize)]
pub struct Dynamics {
    pub trajectory: Vec<Vec<f64>>,
    pub potential: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
}

/// Round-robin best-response dynamics from `start`.
pub fn dynamics_impl(spec: &str, start: &str) -> Result<Dynamics> {
    let spec = GameSpec::parse(spec)?;
    let p = spec.precision()?;
    let grid = spec.grid()?;
    let start = ActionProfile::new(serde_json::from_str(start)?)?;
    let limit = 10 * grid.points() * spec.orgs.len();
    let trace = best_response_dynamics(&start, &spec.orgs, spec.alpha, &p, grid, limit)?;
    let potential = trace
        .trajectory
        .iter()
        .map(|d| potential_corrected(d, &spec.orgs, spec.alpha, p.precision(d)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dynamics {
        trajectory: trace.trajectory.into_iter().map(ActionProfile::into_vec).collect(),
        potential,
        rounds: trace.rounds,
        converged: trace.converged,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| Ok(serde_json::to_string(&v)?))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn example_game() -> String {
    example_game_json()
}

#[wasm_bindgen]
pub fn payoff_curve(spec: &str, player: usize, profile: &str) -> std::result::Result<String, JsValue> {
    to_js(payoff_curve_impl(spec, player, profile))
}

#[wasm_bindgen]
pub fn potential_surface(spec: &str) -> std::result::Result<String, JsValue> {
    to_js(potential_surface_impl(spec))
}

#[wasm_bindgen]
pub fn dynamics(spec: &str, start: &str) -> std::result::Result<String, JsValue> {
    to_js(dynamics_impl(spec, start))
}
