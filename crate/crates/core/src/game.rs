//! The per-slot incentive game.
//!
//! Each organization `n` chooses a data contribution `d_n ∈ [0, 1]` and
//! receives
//!
//! ```text
//! u_n = p_n·P(d) − v_n·d_n·|D_n| − C_n + r_n,    r_n = α·Σ_j (d_n − d_j)
//! ```
//!
//! The game is a weighted potential game with weights `w_n = p_n`. Two
//! potentials are provided: [`potential_literal`] transcribes the printed
//! closed form, [`potential_corrected`] is the function that actually
//! satisfies `p_n·ΔU = Δu_n` for every unilateral deviation when the profit
//! rates differ. All oracles below use the corrected form.
//!
//! The brute-force routines work on an evenly spaced grid over `[0, 1]` and
//! break every tie toward the smaller contribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::PrecisionOracle;

/// Improvements at or below this are not counted as strict.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

/// Maximum number of grid profiles a brute-force enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// One organization's private economics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrgProfile {
    /// Money per unit of global-model precision (`p_n`).
    pub profit_rate: f64,
    /// Money per contributed training sample (`v_n`).
    pub unit_energy_cost: f64,
    /// Local dataset size `|D_n|`.
    pub dataset_size: f64,
    /// Communication overhead of the current slot (`C_n`).
    pub comm_overhead: f64,
}

impl OrgProfile {
    pub fn new(
        profit_rate: f64,
        unit_energy_cost: f64,
        dataset_size: f64,
        comm_overhead: f64,
    ) -> Result<Self> {
        let org = Self {
            profit_rate,
            unit_energy_cost,
            dataset_size,
            comm_overhead,
        };
        org.validate()?;
        Ok(org)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("profit_rate", self.profit_rate),
            ("unit_energy_cost", self.unit_energy_cost),
            ("dataset_size", self.dataset_size),
            ("comm_overhead", self.comm_overhead),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        if self.profit_rate <= 0.0 {
            return Err(Error::param("profit_rate", "must be > 0"));
        }
        if self.unit_energy_cost < 0.0 {
            return Err(Error::param("unit_energy_cost", "must be >= 0"));
        }
        if self.dataset_size < 1.0 {
            return Err(Error::param("dataset_size", "must be >= 1"));
        }
        if self.comm_overhead < 0.0 {
            return Err(Error::param("comm_overhead", "must be >= 0"));
        }
        Ok(())
    }

    /// Energy cost `E_n = v_n·d_n·|D_n|` of contributing fraction `d`.
    pub fn energy(&self, d: f64) -> f64 {
        self.unit_energy_cost * d * self.dataset_size
    }
}

/// Joint contribution vector `d ∈ [0,1]^N` for one slot.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(Vec<f64>);

impl ActionProfile {
    pub fn new(contributions: Vec<f64>) -> Result<Self> {
        if contributions.is_empty() {
            return Err(Error::InvalidProfile("empty profile".into()));
        }
        for (i, &d) in contributions.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFinite(format!("contribution {i}")));
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidProfile(format!(
                    "contribution {i} = {d} outside [0, 1]"
                )));
            }
        }
        Ok(Self(contributions))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy of this profile with coordinate `n` replaced.
    pub fn with(&self, n: usize, value: f64) -> Result<Self> {
        check_index(n, self.len())?;
        let mut v = self.0.clone();
        v[n] = value;
        Self::new(v)
    }

    /// Contributions of everybody except `n`, in ascending index order.
    pub fn others(&self, n: usize) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != n)
            .map(|(_, &d)| d)
            .collect()
    }
}

impl std::ops::Index<usize> for ActionProfile {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The terms of one organization's slot payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub revenue: f64,
    pub energy_cost: f64,
    pub comm_cost: f64,
    pub redistribution: f64,
    pub total: f64,
}

/// Evenly spaced contribution levels over `[0, 1]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 21 }
    }
}

impl GridSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::param("grid points", "need at least 2"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn value(&self, i: usize) -> f64 {
        i as f64 / (self.points - 1) as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.value(i))
    }

    /// Index of the grid point nearest to `x` (lower one on ties).
    pub fn nearest(&self, x: f64) -> usize {
        let scaled = x.clamp(0.0, 1.0) * (self.points - 1) as f64;
        let lo = scaled.floor();
        let idx = if scaled - lo > 0.5 { lo + 1.0 } else { lo };
        (idx as usize).min(self.points - 1)
    }
}

fn check_index(n: usize, len: usize) -> Result<()> {
    if n >= len {
        return Err(Error::IndexOutOfRange { index: n, len });
    }
    Ok(())
}

fn check_orgs(d: &ActionProfile, orgs: &[OrgProfile]) -> Result<()> {
    if d.len() != orgs.len() {
        return Err(Error::DimensionMismatch {
            expected: orgs.len(),
            got: d.len(),
        });
    }
    Ok(())
}

/// Redistribution received by organization `n`: `α·Σ_j (d_n − d_j)`.
pub fn redistribution(n: usize, d: &ActionProfile, alpha: f64) -> Result<f64> {
    check_index(n, d.len())?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha".into()));
    }
    if alpha < 0.0 {
        return Err(Error::param("alpha", "must be >= 0"));
    }
    let dn = d[n];
    Ok(alpha * d.as_slice().iter().map(|&dj| dn - dj).sum::<f64>())
}

/// Slot payoff of organization `n` at profile `d` given the realized precision.
pub fn payoff(
    n: usize,
    d: &ActionProfile,
    precision_value: f64,
    orgs: &[OrgProfile],
    alpha: f64,
) -> Result<PayoffBreakdown> {
    check_orgs(d, orgs)?;
    check_index(n, orgs.len())?;
    if !precision_value.is_finite() {
        return Err(Error::NonFinite("precision".into()));
    }
    if !(0.0..=1.0).contains(&precision_value) {
        return Err(Error::param("precision", "must lie in [0, 1]"));
    }
    let org = &orgs[n];
    for v in [
        org.profit_rate,
        org.unit_energy_cost,
        org.dataset_size,
        org.comm_overhead,
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("profile of organization {n}")));
        }
    }
    let revenue = org.profit_rate * precision_value;
    let energy_cost = org.energy(d[n]);
    let comm_cost = org.comm_overhead;
    let redistribution = redistribution(n, d, alpha)?;
    Ok(PayoffBreakdown {
        revenue,
        energy_cost,
        comm_cost,
        redistribution,
        total: revenue - energy_cost - comm_cost + redistribution,
    })
}

fn require_positive_profit(orgs: &[OrgProfile]) -> Result<()> {
    if orgs.iter().any(|o| !(o.profit_rate > 0.0)) {
        return Err(Error::param(
            "profit_rate",
            "potential weights need every profit rate > 0",
        ));
    }
    Ok(())
}

/// The printed closed-form potential, transcribed term by term.
///
/// With heterogeneous profit rates its unilateral differences do not match
/// `Δu_n / p_n`; see [`potential_corrected`].
pub fn potential_literal(
    d: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision_value: f64,
) -> Result<f64> {
    check_orgs(d, orgs)?;
    require_positive_profit(orgs)?;
    let n_orgs = orgs.len();
    let mut acc = 0.0;
    for (n, org) in orgs.iter().enumerate() {
        let cost = (org.energy(d[n]) + org.comm_overhead) / org.profit_rate;
        let cross: f64 = (0..n_orgs)
            .filter(|&j| j != n)
            .map(|j| alpha * (d[n] - d[j]) / org.profit_rate)
            .sum();
        acc += cost - cross;
    }
    Ok(precision_value - acc)
}

/// Potential `U(d) = P(d) − Σ_n (E_n + C_n)/p_n + (N−1)·α·Σ_n d_n/p_n`.
///
/// Satisfies `p_n·[U(d') − U(d)] = u_n(d') − u_n(d)` for any deviation of a
/// single coordinate `n`.
pub fn potential_corrected(
    d: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision_value: f64,
) -> Result<f64> {
    check_orgs(d, orgs)?;
    require_positive_profit(orgs)?;
    let spread = (orgs.len() - 1) as f64 * alpha;
    let acc: f64 = orgs
        .iter()
        .enumerate()
        .map(|(n, org)| {
            (org.energy(d[n]) + org.comm_overhead - spread * d[n]) / org.profit_rate
        })
        .sum();
    Ok(precision_value - acc)
}

/// Which closed form to test in [`weighted_potential_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialForm {
    Literal,
    Corrected,
}

impl PotentialForm {
    pub fn eval(
        self,
        d: &ActionProfile,
        orgs: &[OrgProfile],
        alpha: f64,
        precision_value: f64,
    ) -> Result<f64> {
        match self {
            PotentialForm::Literal => potential_literal(d, orgs, alpha, precision_value),
            PotentialForm::Corrected => potential_corrected(d, orgs, alpha, precision_value),
        }
    }
}

/// `|p_n·[U(d') − U(d)] − (u_n(d') − u_n(d))|` using the corrected potential.
pub fn check_weighted_potential<P: PrecisionOracle + ?Sized>(
    n: usize,
    d: &ActionProfile,
    d_prime: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
) -> Result<f64> {
    weighted_potential_residual(PotentialForm::Corrected, n, d, d_prime, orgs, alpha, precision)
}

pub fn weighted_potential_residual<P: PrecisionOracle + ?Sized>(
    form: PotentialForm,
    n: usize,
    d: &ActionProfile,
    d_prime: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
) -> Result<f64> {
    check_orgs(d, orgs)?;
    check_orgs(d_prime, orgs)?;
    check_index(n, orgs.len())?;
    let differs = (0..d.len()).any(|j| j != n && d[j] != d_prime[j]);
    if differs {
        return Err(Error::NotUnilateral);
    }
    let p0 = precision.precision(d)?;
    let p1 = precision.precision(d_prime)?;
    let du = payoff(n, d_prime, p1, orgs, alpha)?.total - payoff(n, d, p0, orgs, alpha)?.total;
    let du_pot = form.eval(d_prime, orgs, alpha, p1)? - form.eval(d, orgs, alpha, p0)?;
    Ok((orgs[n].profit_rate * du_pot - du).abs())
}

/// Grid best response of `n` against the other coordinates of `d`.
///
/// `d[n]` itself is ignored. Returns the maximizing contribution and its
/// payoff; ties go to the smaller contribution.
pub fn best_response<P: PrecisionOracle + ?Sized>(
    n: usize,
    d: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
    grid: GridSpec,
) -> Result<(f64, f64)> {
    check_orgs(d, orgs)?;
    check_index(n, orgs.len())?;
    let mut trial = d.clone();
    let mut best: Option<(f64, f64)> = None;
    for x in grid.values() {
        trial.0[n] = x;
        let u = payoff(n, &trial, precision.precision(&trial)?, orgs, alpha)?.total;
        match best {
            Some((_, bu)) if u <= bu => {}
            _ => best = Some((x, u)),
        }
    }
    Ok(best.expect("grid has at least two points"))
}

/// Mixed-radix enumeration of the grid profiles, player 0 most significant.
struct GridTable {
    grid: GridSpec,
    n_orgs: usize,
    precision: Vec<f64>,
}

impl GridTable {
    fn build<P: PrecisionOracle + ?Sized>(
        n_orgs: usize,
        precision: &P,
        grid: GridSpec,
    ) -> Result<Self> {
        let total = (grid.points() as u128)
            .checked_pow(n_orgs as u32)
            .unwrap_or(u128::MAX);
        if total > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                required: total,
                budget: ENUMERATION_BUDGET,
            });
        }
        let mut table = Vec::with_capacity(total as usize);
        for idx in 0..total as usize {
            let p = precision.precision(&Self::decode_with(grid, n_orgs, idx))?;
            table.push(p);
        }
        Ok(Self {
            grid,
            n_orgs,
            precision: table,
        })
    }

    fn len(&self) -> usize {
        self.precision.len()
    }

    fn digits(&self, mut idx: usize) -> Vec<usize> {
        let k = self.grid.points();
        let mut out = vec![0; self.n_orgs];
        for slot in out.iter_mut().rev() {
            *slot = idx % k;
            idx /= k;
        }
        out
    }

    fn decode_with(grid: GridSpec, n_orgs: usize, mut idx: usize) -> ActionProfile {
        let k = grid.points();
        let mut v = vec![0.0; n_orgs];
        for slot in v.iter_mut().rev() {
            *slot = grid.value(idx % k);
            idx /= k;
        }
        ActionProfile(v)
    }

    fn decode(&self, idx: usize) -> ActionProfile {
        Self::decode_with(self.grid, self.n_orgs, idx)
    }

    fn stride(&self, n: usize) -> usize {
        self.grid.points().pow((self.n_orgs - 1 - n) as u32)
    }
}

/// All pure grid profiles at which no organization can strictly improve by a
/// unilateral grid deviation, in lexicographic order.
pub fn nash_brute_force<P: PrecisionOracle + ?Sized>(
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
    grid: GridSpec,
) -> Result<Vec<ActionProfile>> {
    let table = GridTable::build(orgs.len(), precision, grid)?;
    let mut out = Vec::new();
    for idx in 0..table.len() {
        let digits = table.digits(idx);
        let d = table.decode(idx);
        let mut stable = true;
        'players: for n in 0..orgs.len() {
            let current = payoff(n, &d, table.precision[idx], orgs, alpha)?.total;
            let base = idx - digits[n] * table.stride(n);
            for k in 0..grid.points() {
                if k == digits[n] {
                    continue;
                }
                let dev_idx = base + k * table.stride(n);
                let dev = d.with(n, grid.value(k))?;
                let u = payoff(n, &dev, table.precision[dev_idx], orgs, alpha)?.total;
                if u - current > IMPROVEMENT_TOL {
                    stable = false;
                    break 'players;
                }
            }
        }
        if stable {
            out.push(d);
        }
    }
    Ok(out)
}

/// Grid profile maximizing [`potential_corrected`]; the first in
/// lexicographic order wins ties.
pub fn potential_argmax<P: PrecisionOracle + ?Sized>(
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
    grid: GridSpec,
) -> Result<(ActionProfile, f64)> {
    let table = GridTable::build(orgs.len(), precision, grid)?;
    let mut best: Option<(usize, f64)> = None;
    for idx in 0..table.len() {
        let u = potential_corrected(&table.decode(idx), orgs, alpha, table.precision[idx])?;
        match best {
            Some((_, bu)) if u <= bu => {}
            _ => best = Some((idx, u)),
        }
    }
    let (idx, u) = best.expect("non-empty grid");
    Ok((table.decode(idx), u))
}

/// Checks the equilibrium inequality at `d` against every grid deviation.
pub fn is_grid_nash<P: PrecisionOracle + ?Sized>(
    d: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
    grid: GridSpec,
) -> Result<bool> {
    check_orgs(d, orgs)?;
    let p = precision.precision(d)?;
    for n in 0..orgs.len() {
        let current = payoff(n, d, p, orgs, alpha)?.total;
        for x in grid.values() {
            let dev = d.with(n, x)?;
            let u = payoff(n, &dev, precision.precision(&dev)?, orgs, alpha)?.total;
            if u - current > IMPROVEMENT_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Result of [`best_response_dynamics`].
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTrace {
    /// Starting profile (snapped to the grid) followed by the profile after
    /// every strict unilateral switch.
    pub trajectory: Vec<ActionProfile>,
    /// Full round-robin passes executed.
    pub rounds: usize,
    /// True when the last pass made no switch, i.e. the endpoint is a grid NE.
    pub converged: bool,
}

impl DynamicsTrace {
    pub fn endpoint(&self) -> &ActionProfile {
        self.trajectory.last().expect("trajectory holds the start")
    }
}

/// Round-robin strict best-response dynamics on the grid.
pub fn best_response_dynamics<P: PrecisionOracle + ?Sized>(
    initial: &ActionProfile,
    orgs: &[OrgProfile],
    alpha: f64,
    precision: &P,
    grid: GridSpec,
    max_rounds: usize,
) -> Result<DynamicsTrace> {
    check_orgs(initial, orgs)?;
    if max_rounds == 0 {
        return Err(Error::param("max_rounds", "must be >= 1"));
    }
    let snapped: Vec<f64> = initial
        .as_slice()
        .iter()
        .map(|&x| grid.value(grid.nearest(x)))
        .collect();
    let mut current = ActionProfile(snapped);
    let mut trajectory = vec![current.clone()];
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        let mut switched = false;
        for n in 0..orgs.len() {
            let now = payoff(n, &current, precision.precision(&current)?, orgs, alpha)?.total;
            let (x, u) = best_response(n, &current, orgs, alpha, precision, grid)?;
            if u - now > IMPROVEMENT_TOL {
                current = current.with(n, x)?;
                trajectory.push(current.clone());
                switched = true;
            }
        }
        if !switched {
            converged = true;
            break;
        }
    }
    Ok(DynamicsTrace {
        trajectory,
        rounds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::AnalyticPrecision;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn org(p: f64, v: f64, size: f64, c: f64) -> OrgProfile {
        OrgProfile {
            profit_rate: p,
            unit_energy_cost: v,
            dataset_size: size,
            comm_overhead: c,
        }
    }

    fn profile(v: &[f64]) -> ActionProfile {
        ActionProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn redistribution_examples() {
        let sym = profile(&[0.5; 4]);
        for n in 0..4 {
            assert_eq!(redistribution(n, &sym, 7.0).unwrap(), 0.0);
        }
        let d = profile(&[1.0, 0.0]);
        assert_eq!(redistribution(0, &d, 5.0).unwrap(), 5.0);
        assert_eq!(redistribution(1, &d, 5.0).unwrap(), -5.0);
        let d = profile(&[0.2, 0.5, 0.8]);
        assert!((redistribution(0, &d, 2.0).unwrap() + 1.8).abs() < 1e-12);
        assert!(matches!(
            redistribution(3, &d, 2.0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn payoff_example_from_default_magnitudes() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5); 4];
        let d = profile(&[0.5; 4]);
        let b = payoff(0, &d, 0.8, &orgs, 5.0).unwrap();
        assert_eq!(b.total, -3200.5);
        assert_eq!(b.redistribution, 0.0);
        assert_eq!(b.total, b.revenue - b.energy_cost - b.comm_cost + b.redistribution);
    }

    #[test]
    fn zero_contribution_payoff_is_revenue_minus_comm() {
        let orgs = vec![org(990.0, 4.1, 1980.0, 0.52); 3];
        let model = AnalyticPrecision::default().bind(vec![1980.0; 3]).unwrap();
        let d = ActionProfile::zeros(3);
        let p0 = model.precision(&d).unwrap();
        let b = payoff(1, &d, p0, &orgs, 5.0).unwrap();
        assert_eq!(b.total, 990.0 * p0 - 0.52);
    }

    #[test]
    fn payoff_rejects_bad_inputs() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5); 2];
        let d = profile(&[0.1, 0.2]);
        assert!(payoff(2, &d, 0.5, &orgs, 1.0).is_err());
        assert!(payoff(0, &d, f64::NAN, &orgs, 1.0).is_err());
        assert!(payoff(0, &d, 0.5, &orgs, f64::INFINITY).is_err());
        assert!(ActionProfile::new(vec![0.1, 1.2]).is_err());
    }

    #[test]
    fn single_player_potentials() {
        let orgs = vec![org(800.0, 3.0, 1500.0, 0.4)];
        let d = profile(&[0.3]);
        let expect = 0.6 - (3.0 * 0.3 * 1500.0 + 0.4) / 800.0;
        assert!((potential_literal(&d, &orgs, 5.0, 0.6).unwrap() - expect).abs() < 1e-15);
        assert!((potential_corrected(&d, &orgs, 5.0, 0.6).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn potentials_agree_without_redistribution() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5), org(1010.0, 3.8, 2050.0, 0.49)];
        let d = profile(&[0.3, 0.9]);
        let a = potential_literal(&d, &orgs, 0.0, 0.7).unwrap();
        let b = potential_corrected(&d, &orgs, 0.0, 0.7).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn literal_potential_fails_identity_for_heterogeneous_profit() {
        let orgs = vec![
            org(900.0, 4.0, 2000.0, 0.5),
            org(1100.0, 4.0, 2000.0, 0.5),
            org(1000.0, 4.0, 2000.0, 0.5),
        ];
        let model = AnalyticPrecision::default().bind(vec![2000.0; 3]).unwrap();
        let d = profile(&[0.2, 0.4, 0.6]);
        let d2 = d.with(0, 0.9).unwrap();
        let lit = weighted_potential_residual(PotentialForm::Literal, 0, &d, &d2, &orgs, 5.0, &model)
            .unwrap();
        let cor = check_weighted_potential(0, &d, &d2, &orgs, 5.0, &model).unwrap();
        assert!(lit > 1e-6, "literal residual {lit}");
        assert!(cor < 1e-9, "corrected residual {cor}");
    }

    #[test]
    fn weighted_potential_rejects_multi_coordinate_deviation() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5); 2];
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let d = profile(&[0.2, 0.4]);
        let d2 = profile(&[0.3, 0.5]);
        assert!(matches!(
            check_weighted_potential(0, &d, &d2, &orgs, 1.0, &model),
            Err(Error::NotUnilateral)
        ));
        assert_eq!(check_weighted_potential(1, &d, &d, &orgs, 1.0, &model).unwrap(), 0.0);
    }

    #[test]
    fn zero_profit_best_response_is_zero() {
        let orgs = vec![org(0.0, 4.0, 2000.0, 0.5), org(1000.0, 4.0, 2000.0, 0.5)];
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let d = profile(&[0.7, 0.3]);
        let (x, _) = best_response(0, &d, &orgs, 0.0, &model, GridSpec::default()).unwrap();
        assert_eq!(x, 0.0);
    }

    // Cheap contribution so that the concave revenue yields an interior optimum.
    fn interior_orgs() -> Vec<OrgProfile> {
        vec![org(1000.0, 0.2, 2000.0, 0.5), org(1000.0, 0.2, 2000.0, 0.5)]
    }

    #[test]
    fn best_response_matches_refined_scan() {
        let orgs = interior_orgs();
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let d = profile(&[0.0, 0.2]);
        let coarse = GridSpec::new(21).unwrap();
        let fine = GridSpec::new(201).unwrap();
        let (xc, _) = best_response(0, &d, &orgs, 0.0, &model, coarse).unwrap();
        let (xf, _) = best_response(0, &d, &orgs, 0.0, &model, fine).unwrap();
        assert!(xf > 0.0 && xf < 1.0, "optimum should be interior, got {xf}");
        assert!((xc - xf).abs() <= 1.0 / 20.0 + 1e-12);
    }

    #[test]
    fn redistribution_pulls_best_response_up() {
        let orgs = interior_orgs();
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let d = profile(&[0.0, 0.2]);
        let grid = GridSpec::new(101).unwrap();
        let responses: Vec<f64> = [0.0, 5.0, 50.0]
            .iter()
            .map(|&a| best_response(0, &d, &orgs, a, &model, grid).unwrap().0)
            .collect();
        assert!(responses[0] <= responses[1] && responses[1] <= responses[2]);
        assert!(responses[2] > responses[0], "{responses:?}");
    }

    #[test]
    fn constant_precision_without_redistribution_has_origin_as_unique_ne() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5), org(1005.0, 3.9, 1990.0, 0.51)];
        let constant = |_: &[f64]| 0.6;
        let ne = nash_brute_force(&orgs, 0.0, &constant, GridSpec::new(11).unwrap()).unwrap();
        assert_eq!(ne, vec![ActionProfile::zeros(2)]);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let orgs = vec![org(1000.0, 4.0, 2000.0, 0.5); 6];
        let constant = |_: &[f64]| 0.6;
        let err = nash_brute_force(&orgs, 0.0, &constant, GridSpec::new(21).unwrap()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn symmetric_two_player_grid_game_has_equilibrium_containing_potential_argmax() {
        let orgs = interior_orgs();
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let grid = GridSpec::new(11).unwrap();
        let ne = nash_brute_force(&orgs, 5.0, &model, grid).unwrap();
        assert!(!ne.is_empty());
        let (arg, _) = potential_argmax(&orgs, 5.0, &model, grid).unwrap();
        assert!(ne.contains(&arg));
        for d in &ne {
            assert!(is_grid_nash(d, &orgs, 5.0, &model, grid).unwrap());
        }
    }

    #[test]
    fn dynamics_from_equilibrium_is_a_fixed_point() {
        let orgs = interior_orgs();
        let model = AnalyticPrecision::default().bind(vec![2000.0; 2]).unwrap();
        let grid = GridSpec::new(11).unwrap();
        let ne = nash_brute_force(&orgs, 5.0, &model, grid).unwrap();
        let trace = best_response_dynamics(&ne[0], &orgs, 5.0, &model, grid, 10).unwrap();
        assert_eq!(trace.trajectory.len(), 1);
        assert!(trace.converged);
    }

    #[test]
    fn dynamics_increase_potential_and_end_in_ne_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = GridSpec::new(11).unwrap();
        for _ in 0..20 {
            let orgs: Vec<OrgProfile> = (0..2)
                .map(|_| {
                    org(
                        rng.gen_range(900.0..1100.0),
                        rng.gen_range(0.05..0.6),
                        rng.gen_range(1800.0..2200.0),
                        0.5,
                    )
                })
                .collect();
            let sizes: Vec<f64> = orgs.iter().map(|o| o.dataset_size).collect();
            let model = AnalyticPrecision::default().bind(sizes).unwrap();
            let alpha = rng.gen_range(0.0..40.0);
            let start = profile(&[rng.gen(), rng.gen()]);
            let trace =
                best_response_dynamics(&start, &orgs, alpha, &model, grid, 10 * 11 * 2).unwrap();
            assert!(trace.converged);
            let pots: Vec<f64> = trace
                .trajectory
                .iter()
                .map(|d| potential_corrected(d, &orgs, alpha, model.precision(d).unwrap()).unwrap())
                .collect();
            assert!(pots.windows(2).all(|w| w[1] > w[0]));
            let ne = nash_brute_force(&orgs, alpha, &model, grid).unwrap();
            assert!(ne.contains(trace.endpoint()));
        }
    }

    #[test]
    fn grid_nearest() {
        let g = GridSpec::new(11).unwrap();
        assert_eq!(g.nearest(0.0), 0);
        assert_eq!(g.nearest(0.04), 0);
        assert_eq!(g.nearest(0.06), 1);
        assert_eq!(g.nearest(1.0), 10);
        assert!(GridSpec::new(1).is_err());
    }
}
