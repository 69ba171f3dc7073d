//! Fluid linear programs over acceptance fractions and their duals.

mod knapsack;
mod network;
mod simplex;

pub use knapsack::solve_knapsack;
pub use network::solve_network_lp;
pub use simplex::{solve_simplex, SimplexSolution};

use crate::error::{Error, Result};
use crate::model::Scenario;

const SATURATION_TOL: f64 = 1e-12;

/// Optimal acceptance fractions plus an optimal dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// `alpha[i][j]` is the fraction of class `i` sent to allocation `j`.
    pub alpha: Vec<Vec<f64>>,
    pub value: f64,
    /// Resource prices.
    pub dual_u: Vec<f64>,
    /// Class prices.
    pub dual_v: Vec<f64>,
    /// Classes whose total acceptance fraction equals 1.
    pub saturated: Vec<usize>,
    /// Per-class upper bound on the total fraction used in the solve.
    pub caps: Vec<f64>,
    /// Capacity divisor used in the solve.
    pub shrink: f64,
}

impl LpSolution {
    fn new(
        alpha: Vec<Vec<f64>>,
        value: f64,
        dual_u: Vec<f64>,
        dual_v: Vec<f64>,
        caps: Vec<f64>,
        shrink: f64,
    ) -> Self {
        let saturated = alpha
            .iter()
            .enumerate()
            .filter(|(_, a)| (a.iter().sum::<f64>() - 1.0).abs() <= SATURATION_TOL)
            .map(|(i, _)| i)
            .collect();
        LpSolution {
            alpha,
            value,
            dual_u,
            dual_v,
            saturated,
            caps,
            shrink,
        }
    }

    /// Solution restricted to the listed classes.
    pub fn restrict(&self, keep: &[usize]) -> LpSolution {
        LpSolution::new(
            keep.iter().map(|&i| self.alpha[i].clone()).collect(),
            self.value,
            self.dual_u.clone(),
            keep.iter().map(|&i| self.dual_v[i]).collect(),
            keep.iter().map(|&i| self.caps[i]).collect(),
            self.shrink,
        )
    }

    /// Total acceptance fraction of each class.
    pub fn class_alpha(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.iter().sum()).collect()
    }

    /// Dual objective `u'b/shrink + sum v_i cap_i`; infinite capacities carry no price.
    pub fn dual_value(&self, sc: &Scenario) -> f64 {
        let ub: f64 = self
            .dual_u
            .iter()
            .zip(&sc.capacity)
            .filter(|(_, b)| b.is_finite())
            .map(|(u, b)| u * b / self.shrink)
            .sum();
        ub + self
            .dual_v
            .iter()
            .zip(&self.caps)
            .map(|(v, c)| v * c)
            .sum::<f64>()
    }

    /// Largest violation of `v_i + rho_i u'b_ij >= r_i rho_i`.
    pub fn dual_infeasibility(&self, sc: &Scenario) -> f64 {
        let mut worst = 0.0f64;
        for (i, c) in sc.classes.iter().enumerate() {
            let rho = c.offered_load();
            for a in &c.allocations {
                let ub: f64 = self.dual_u.iter().zip(a).map(|(u, b)| u * b).sum();
                worst = worst.max(c.reward * rho - self.dual_v[i] - rho * ub);
            }
        }
        worst
    }
}

/// Per-class cap `1 - Ge_i(horizon)`; `1` for an infinite horizon.
pub fn horizon_caps(sc: &Scenario, horizon: f64) -> Vec<f64> {
    sc.classes
        .iter()
        .map(|c| {
            if horizon.is_infinite() {
                1.0
            } else {
                1.0 - c.service.equilibrium_tail(horizon)
            }
        })
        .collect()
}

fn check_inputs(horizon: f64, shrink: f64) -> Result<()> {
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    if !(shrink >= 1.0) || !shrink.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "shrink must be at least 1, got {shrink}"
        )));
    }
    Ok(())
}

/// Steady-state LP solved by the fractional knapsack or the simplex,
/// depending on the scenario shape.
pub fn solve_steady(sc: &Scenario, shrink: f64) -> Result<LpSolution> {
    if sc.is_single_resource() {
        solve_knapsack(sc, f64::INFINITY, shrink)
    } else {
        solve_network_lp(sc, f64::INFINITY, shrink)
    }
}

fn bisect_epsilon(optimal_at: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    if optimal_at(0.25)? {
        return Ok(0.25);
    }
    let (mut lo, mut hi) = (0.0f64, 0.25f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if optimal_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest `eps` in `(0, 1/4]` for which the steady-state dual stays optimal
/// for the LP with capacity shrunk by `1 + 4 eps`, to within `1e-6`.
pub fn epsilon_zero(sc: &Scenario) -> Result<f64> {
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    let steady = solve_knapsack(sc, f64::INFINITY, 1.0)?;
    bisect_epsilon(|eps| {
        let shrink = 1.0 + 4.0 * eps;
        let lp = solve_knapsack(sc, f64::INFINITY, shrink)?;
        let dual = LpSolution {
            shrink,
            ..steady.clone()
        }
        .dual_value(sc);
        Ok((dual - lp.value).abs() <= 1e-9 * (1.0 + lp.value.abs()))
    })
}

/// Network analogue of [`epsilon_zero`]. When the steady dual is not unique
/// the answer depends on which optimal dual the simplex returns, so the value
/// is approximate.
pub fn epsilon_zero_network(sc: &Scenario) -> Result<f64> {
    let steady = solve_network_lp(sc, f64::INFINITY, 1.0)?;
    bisect_epsilon(|eps| {
        let shrink = 1.0 + 4.0 * eps;
        let lp = solve_network_lp(sc, f64::INFINITY, shrink)?;
        let dual = LpSolution {
            shrink,
            ..steady.clone()
        }
        .dual_value(sc);
        Ok((dual - lp.value).abs() <= 1e-9 * (1.0 + lp.value.abs()))
    })
}
