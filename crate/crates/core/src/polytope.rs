//! Keeping the mean state inside a polytope `{0 <= x <= rho, Dx <= h}` with
//! an exponential penalty over the lifted (accepted, rejected) coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_simplex;
use crate::model::{offered_loads, Scenario};
use crate::policy::{log_sum_exp, BetaChoice, PolicyDecision, RejectCause};
use crate::sim::SimState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polytope {
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

impl Polytope {
    pub fn new(d: Vec<Vec<f64>>, h: Vec<f64>) -> Result<Polytope> {
        let p = Polytope { d, h };
        p.check()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Polytope> {
        let p: Polytope = serde_json::from_str(text)?;
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.d.is_empty() || self.d.len() != self.h.len() {
            return Err(Error::InvalidParameter(
                "polytope needs one bound per constraint row".into(),
            ));
        }
        let m = self.d[0].len();
        if m == 0 || self.d.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("ragged constraint matrix".into()));
        }
        if self
            .d
            .iter()
            .flatten()
            .chain(&self.h)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "polytope data must be finite".into(),
            ));
        }
        if self.h.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("h must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.d.len()
    }

    pub fn cols(&self) -> usize {
        self.d[0].len()
    }

    pub fn d_plus(&self) -> Vec<Vec<f64>> {
        self.d
            .iter()
            .map(|r| r.iter().map(|v| v.max(0.0)).collect())
            .collect()
    }

    pub fn d_minus(&self) -> Vec<Vec<f64>> {
        self.d
            .iter()
            .map(|r| r.iter().map(|v| (-v).max(0.0)).collect())
            .collect()
    }

    /// Target set of the `n`-th scaled system, `h -> n h`.
    pub fn scaled(&self, n: f64) -> Polytope {
        Polytope {
            d: self.d.clone(),
            h: self.h.iter().map(|v| v * n).collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lifted constraints `D+ x + D- y <= h + D- rho` inside the box `[0, rho]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    pub d_plus: Vec<Vec<f64>>,
    pub d_minus: Vec<Vec<f64>>,
    /// `H_j = h_j + d-_j rho`.
    pub rhs: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Lifted {
    pub fn contains(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        let in_box = |v: &[f64]| {
            v.iter()
                .zip(&self.rho)
                .all(|(a, r)| *a >= -tol && *a <= r + tol)
        };
        in_box(x)
            && in_box(y)
            && (0..self.rhs.len())
                .all(|j| dot(&self.d_plus[j], x) + dot(&self.d_minus[j], y) <= self.rhs[j] + tol)
    }

    /// `(d+_j x + d-_j y) / H_j` for every row.
    pub fn ratios(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.rhs.len())
            .map(|j| (dot(&self.d_plus[j], x) + dot(&self.d_minus[j], y)) / self.rhs[j])
            .collect()
    }
}

pub fn lift(p: &Polytope, rho: &[f64]) -> Result<Lifted> {
    p.check()?;
    if rho.len() != p.cols() {
        return Err(Error::InvalidParameter(format!(
            "polytope has {} columns but the scenario has {} classes",
            p.cols(),
            rho.len()
        )));
    }
    let d_plus = p.d_plus();
    let d_minus = p.d_minus();
    let rhs: Vec<f64> = (0..p.rows())
        .map(|j| p.h[j] + dot(&d_minus[j], rho))
        .collect();
    Ok(Lifted {
        d_plus,
        d_minus,
        rhs,
        rho: rho.to_vec(),
    })
}

/// Largest `t >= 0` with `Dx + t <= h` for some `0 <= x <= rho`; the
/// interior is nonempty exactly when this is positive.
pub fn interior_margin(p: &Polytope, rho: &[f64]) -> Result<f64> {
    let m = p.cols();
    let mut c = vec![0.0; m + 1];
    c[m] = 1.0;
    let a: Vec<Vec<f64>> =
        p.d.iter()
            .map(|r| {
                let mut row = r.clone();
                row.push(1.0);
                row
            })
            .collect();
    let mut ub = rho.to_vec();
    ub.push(f64::INFINITY);
    Ok(solve_simplex(&c, &a, &p.h, &ub)?.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaStar {
    /// Minimax violation over the slice `y = rho - x`.
    pub gamma: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Minimax violation over the whole lifted set (zero, attained at the origin).
    pub gamma_lifted: f64,
}

/// `min max_j (d+_j x + d-_j y) / H_j` over `(x, rho - x)` with `x` in the target set.
pub fn gamma_star(p: &Polytope, rho: &[f64]) -> Result<GammaStar> {
    let l = lift(p, rho)?;
    if l.rhs.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "every lifted row needs h_j + d-_j rho > 0".into(),
        ));
    }
    let m = p.cols();
    let s = p.rows();
    // variables (x, gamma); maximize -gamma
    let mut c = vec![0.0; m + 1];
    c[m] = -1.0;
    let mut a = Vec::with_capacity(2 * s);
    let mut d = Vec::with_capacity(2 * s);
    for j in 0..s {
        let mut row = p.d[j].clone();
        row.push(-l.rhs[j]);
        a.push(row);
        d.push(-dot(&l.d_minus[j], rho));
    }
    for j in 0..s {
        let mut row = p.d[j].clone();
        row.push(0.0);
        a.push(row);
        d.push(p.h[j]);
    }
    let mut ub = rho.to_vec();
    ub.push(f64::INFINITY);
    let sol = solve_simplex(&c, &a, &d, &ub)?;
    let x = sol.x[..m].to_vec();
    let y: Vec<f64> = rho.iter().zip(&x).map(|(r, v)| (r - v).max(0.0)).collect();
    let gamma = l.ratios(&x, &y).into_iter().fold(0.0, f64::max);

    // same minimax over all of the lifted set
    let mut c = vec![0.0; 2 * m + 1];
    c[2 * m] = -1.0;
    let mut a = Vec::with_capacity(2 * s);
    let mut d = Vec::with_capacity(2 * s);
    for j in 0..s {
        let mut row: Vec<f64> = l.d_plus[j].iter().chain(&l.d_minus[j]).cloned().collect();
        row.push(-l.rhs[j]);
        a.push(row);
        d.push(0.0);
        let mut row: Vec<f64> = l.d_plus[j].iter().chain(&l.d_minus[j]).cloned().collect();
        row.push(0.0);
        a.push(row);
        d.push(l.rhs[j]);
    }
    let mut ub: Vec<f64> = rho.iter().chain(rho).cloned().collect();
    ub.push(f64::INFINITY);
    let full = solve_simplex(&c, &a, &d, &ub)?;
    Ok(GammaStar {
        gamma,
        x,
        y,
        gamma_lifted: -full.value,
    })
}

/// Parameters of the tracking controller.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    pub eps: f64,
    pub beta: f64,
    pub beta_bound: f64,
    pub gamma_star: f64,
    /// `log Psi*`, kept in the log domain to avoid overflow.
    pub log_psi_star: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub y0: Vec<u64>,
    /// Whether the rounded initial load had to be reduced to meet the budget.
    pub y0_adjusted: bool,
    pub lifted: Lifted,
}

impl TrackingConfig {
    /// `log Psi(x, y)`.
    pub fn log_psi(&self, x: &[f64], y: &[f64]) -> f64 {
        let e: Vec<f64> = self
            .lifted
            .ratios(x, y)
            .into_iter()
            .map(|r| self.beta * r)
            .collect();
        log_sum_exp(&e)
    }
}

/// Builds the controller for polytope `p` on scenario `sc` (rates and loads
/// taken from `sc`; capacities are ignored).
pub fn build_tracking_config(
    p: &Polytope,
    sc: &Scenario,
    eps: f64,
    beta: BetaChoice,
) -> Result<TrackingConfig> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 0.25], got {eps}"
        )));
    }
    sc.ensure_valid()?;
    let rho = offered_loads(sc);
    let lifted = lift(p, &rho)?;
    if interior_margin(p, &rho)? <= 1e-12 {
        return Err(Error::InvalidParameter(
            "target set has empty interior".into(),
        ));
    }
    let g = gamma_star(p, &rho)?;
    let ratio = sc.mu_min() / sc.mu_max();
    if ratio < g.gamma {
        return Err(Error::RateMismatch {
            ratio,
            gamma: g.gamma,
        });
    }
    let bound = eps * lifted.rhs.iter().cloned().fold(f64::INFINITY, f64::min);
    let beta = match beta {
        BetaChoice::Max => bound,
        BetaChoice::Value(v) if !(v.is_finite() && v > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {v}"
            )))
        }
        BetaChoice::Value(v) if v > bound * (1.0 + 1e-12) => {
            return Err(Error::BetaTooLarge {
                requested: v,
                bound,
            })
        }
        BetaChoice::Value(v) => v,
    };
    let stretch = (1.0 + 3.0 * eps) * sc.mu_max() / sc.mu_min();
    let xs: Vec<f64> = g.x.iter().map(|v| v * stretch).collect();
    let ys: Vec<f64> = g.y.iter().map(|v| v * stretch).collect();
    let e: Vec<f64> = lifted
        .ratios(&xs, &ys)
        .into_iter()
        .map(|r| beta * r)
        .collect();
    let log_psi_star = log_sum_exp(&e);
    let mut cfg = TrackingConfig {
        eps,
        beta,
        beta_bound: bound,
        gamma_star: g.gamma,
        log_psi_star,
        x_star: g.x,
        y_star: g.y,
        y0: vec![],
        y0_adjusted: false,
        lifted,
    };
    let (y0, adjusted) = initial_load_lp(p, sc, log_psi_star, beta)?;
    cfg.y0 = y0;
    cfg.y0_adjusted = adjusted;
    let y: Vec<f64> = cfg.y0.iter().map(|v| *v as f64).collect();
    let log_psi0 = cfg.log_psi(&vec![0.0; rho.len()], &y);
    if log_psi0 > log_psi_star * (1.0 + 1e-12) {
        return Err(Error::PenaltyBudget {
            log_psi: log_psi0,
            log_psi_star,
        });
    }
    Ok(cfg)
}

/// Initial fictitious load minimising `max_j d_j M (rho - y)` subject to
/// `0 <= y <= rho` and `d-_j y <= H_j log(Psi*/s) / beta`, rounded to counts.
/// Returns the counts and whether they had to be reduced after rounding.
pub fn initial_load_lp(
    p: &Polytope,
    sc: &Scenario,
    log_psi_star: f64,
    beta: f64,
) -> Result<(Vec<u64>, bool)> {
    let rho = offered_loads(sc);
    let mu = sc.rates();
    let l = lift(p, &rho)?;
    let m = p.cols();
    let s = p.rows();
    let budget = (log_psi_star - (s as f64).ln()).max(0.0) / beta;
    // variables (y, z+, z-); maximize z- - z+
    let mut c = vec![0.0; m + 2];
    c[m] = -1.0;
    c[m + 1] = 1.0;
    let mut a = Vec::with_capacity(2 * s);
    let mut d = Vec::with_capacity(2 * s);
    for j in 0..s {
        let dm: Vec<f64> = (0..m).map(|i| p.d[j][i] * mu[i]).collect();
        let mut row: Vec<f64> = dm.iter().map(|v| -v).collect();
        row.push(-1.0);
        row.push(1.0);
        a.push(row);
        d.push(-dot(&dm, &rho));
    }
    for j in 0..s {
        let mut row = l.d_minus[j].clone();
        row.push(0.0);
        row.push(0.0);
        a.push(row);
        d.push(l.rhs[j] * budget);
    }
    let mut ub = rho.clone();
    ub.push(f64::INFINITY);
    ub.push(f64::INFINITY);
    let sol = solve_simplex(&c, &a, &d, &ub)?;
    let mut y: Vec<u64> = sol.x[..m]
        .iter()
        .map(|v| v.max(0.0).round_ties_even() as u64)
        .collect();

    let log_star = log_psi_star * (1.0 + 1e-12);
    let exps = |y: &[u64]| -> Vec<f64> {
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        (0..s)
            .map(|j| beta * dot(&l.d_minus[j], &yf) / l.rhs[j])
            .collect()
    };
    let mut adjusted = false;
    loop {
        let e = exps(&y);
        if log_sum_exp(&e) <= log_star {
            break;
        }
        let j = (0..s).max_by(|&a, &b| e[a].total_cmp(&e[b])).expect("rows");
        let pick = (0..m)
            .filter(|&i| y[i] > 0 && l.d_minus[j][i] > 0.0)
            .max_by(|&a, &b| l.d_minus[j][a].total_cmp(&l.d_minus[j][b]));
        match pick {
            Some(i) => {
                y[i] -= 1;
                adjusted = true;
            }
            None => {
                return Err(Error::PenaltyBudget {
                    log_psi: log_sum_exp(&e),
                    log_psi_star,
                })
            }
        }
    }
    Ok((y, adjusted))
}

/// Accept class `i` when `dPsi/dx_i <= dPsi/dy_i`, the row exponentials
/// sharing their largest exponent.
pub fn polytope_decide(
    cfg: &TrackingConfig,
    sc: &Scenario,
    state: &SimState,
    class: usize,
) -> Result<PolicyDecision> {
    let l = &cfg.lifted;
    if class >= l.rho.len() {
        return Err(Error::UnknownClass(class));
    }
    let x: Vec<f64> = (0..l.rho.len())
        .map(|i| state.class_count(i) as f64)
        .collect();
    let y: Vec<f64> = state.y.iter().map(|v| *v as f64).collect();
    let e: Vec<f64> = l.ratios(&x, &y).into_iter().map(|r| cfg.beta * r).collect();
    let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut dx, mut dy) = (0.0, 0.0);
    for j in 0..e.len() {
        let w = (e[j] - top).exp() / l.rhs[j];
        dx += l.d_plus[j][class] * w;
        dy += l.d_minus[j][class] * w;
    }
    if dx > dy {
        return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
    }
    Ok(if state.fits(sc, class, 0) {
        PolicyDecision::Accept(0)
    } else {
        PolicyDecision::Reject(RejectCause::Capacity)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipForm {
    /// Inflation `log(s)/beta + 3 eps`.
    Finite,
    /// Inflation `4 eps` of the large-system limit.
    Limit,
}

/// Per-row slack `d_j x - [h_j + zeta H_j + d-_j e^{-Mt} (rho - y0)]`;
/// nonpositive entries mean the row holds.
#[allow(clippy::too_many_arguments)]
pub fn inflated_membership(
    p: &Polytope,
    sc: &Scenario,
    eps: f64,
    beta: f64,
    y0: &[f64],
    xbar: &[f64],
    t: f64,
    form: MembershipForm,
) -> Result<Vec<f64>> {
    let rho = offered_loads(sc);
    let mu = sc.rates();
    let l = lift(p, &rho)?;
    let zeta = match form {
        MembershipForm::Finite => (p.rows() as f64).ln() / beta + 3.0 * eps,
        MembershipForm::Limit => 4.0 * eps,
    };
    Ok((0..p.rows())
        .map(|j| {
            let decay: f64 = (0..rho.len())
                .map(|i| l.d_minus[j][i] * (-mu[i] * t).exp() * (rho[i] - y0[i]))
                .sum();
            dot(&p.d[j], xbar) - (p.h[j] + zeta * l.rhs[j] + decay)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn decomposition() {
        let p = Polytope::new(vec![vec![1.0, -2.0], vec![0.0, 3.0]], vec![1.0, 2.0]).unwrap();
        let (dp, dm) = (p.d_plus(), p.d_minus());
        for j in 0..2 {
            for i in 0..2 {
                assert_eq!(dp[j][i] - dm[j][i], p.d[j][i]);
                assert!(dp[j][i] >= 0.0 && dm[j][i] >= 0.0);
            }
        }
    }

    #[test]
    fn lift_examples() {
        let p = Polytope::new(vec![vec![1.0, -1.0]], vec![1.0]).unwrap();
        let l = lift(&p, &[1.0, 1.0]).unwrap();
        assert_eq!(l.d_plus, vec![vec![1.0, 0.0]]);
        assert_eq!(l.d_minus, vec![vec![0.0, 1.0]]);
        assert_eq!(l.rhs, vec![2.0]);
        let q = Polytope::new(vec![vec![1.0, 2.0]], vec![3.0]).unwrap();
        let l = lift(&q, &[5.0, 5.0]).unwrap();
        assert_eq!(l.d_minus, vec![vec![0.0, 0.0]]);
        assert_eq!(l.rhs, vec![3.0]);
        assert!(Polytope::new(vec![vec![1.0]], vec![-1.0]).is_err());
    }

    #[test]
    fn gamma_examples() {
        let p = Polytope::new(vec![vec![1.0]], vec![5.0]).unwrap();
        let g = gamma_star(&p, &[10.0]).unwrap();
        assert_eq!(g.gamma, 0.0);
        assert_eq!(g.x, vec![0.0]);

        let p = Polytope::new(vec![vec![-1.0]], vec![0.0]).unwrap();
        let g = gamma_star(&p, &[1.0]).unwrap();
        assert_relative_eq!(g.gamma, 0.0, epsilon = 1e-12);
        assert_relative_eq!(g.x[0], 1.0, epsilon = 1e-12);
        assert_eq!(g.gamma_lifted, 0.0);
    }

    #[test]
    fn beta_from_rhs() {
        let sc = Scenario::knapsack(f64::INFINITY, &[50.0], &[1.0], &[1.0], &[1.0]);
        let p = Polytope::new(vec![vec![1.0]], vec![50.0]).unwrap();
        let cfg = build_tracking_config(&p, &sc, 0.1, BetaChoice::Max).unwrap();
        assert_relative_eq!(cfg.beta, 5.0, max_relative = 1e-15);
    }

    #[test]
    fn psi_star_at_origin_is_s() {
        // target at the origin: every ratio vanishes
        let sc = Scenario::knapsack(
            f64::INFINITY,
            &[10.0, 10.0],
            &[1.0, 1.0],
            &[1.0; 2],
            &[1.0; 2],
        );
        let p = Polytope::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![5.0, 5.0]).unwrap();
        let cfg = build_tracking_config(&p, &sc, 0.1, BetaChoice::Max).unwrap();
        assert_eq!(cfg.x_star, vec![0.0, 0.0]);
        assert_relative_eq!(cfg.log_psi_star, 2f64.ln(), max_relative = 1e-15);
        // D >= 0: the fictitious load is unconstrained and fills up to rho
        assert_eq!(cfg.y0, vec![10, 10]);
    }

    #[test]
    fn rate_mismatch_is_reported() {
        // slice minimax of max(2u, 1 - u) with u = x1 / rho1 gives 2/3
        let sc = Scenario::knapsack(
            f64::INFINITY,
            &[10.0, 1.0],
            &[1.0, 0.01],
            &[1.0; 2],
            &[1.0; 2],
        );
        let p = Polytope::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![5.0, 0.0]).unwrap();
        let g = gamma_star(&p, &offered_loads(&sc)).unwrap();
        assert_relative_eq!(g.gamma, 2.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(
            build_tracking_config(&p, &sc, 0.1, BetaChoice::Max),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn zero_budget_forces_no_negative_load() {
        let sc = Scenario::knapsack(
            f64::INFINITY,
            &[10.0, 10.0],
            &[1.0, 1.0],
            &[1.0; 2],
            &[1.0; 2],
        );
        let p = Polytope::new(vec![vec![1.0, -1.0]], vec![5.0]).unwrap();
        let (y, _) = initial_load_lp(&p, &sc, 1f64.ln(), 1.0).unwrap();
        assert_eq!(y[1], 0);
    }

    #[test]
    fn membership_at_origin_and_limit() {
        let sc = Scenario::knapsack(
            f64::INFINITY,
            &[10.0, 10.0],
            &[1.0, 1.0],
            &[1.0; 2],
            &[1.0; 2],
        );
        let p = Polytope::new(vec![vec![1.0, -1.0], vec![1.0, 1.0]], vec![2.0, 15.0]).unwrap();
        let slack = inflated_membership(
            &p,
            &sc,
            0.1,
            1.0,
            &[0.0, 0.0],
            &[0.0, 0.0],
            0.5,
            MembershipForm::Finite,
        )
        .unwrap();
        assert!(slack.iter().all(|s| *s <= 0.0));
        let far = inflated_membership(
            &p,
            &sc,
            0.1,
            1.0,
            &[3.0, 3.0],
            &[4.0, 1.0],
            1e6,
            MembershipForm::Limit,
        )
        .unwrap();
        let zeta = 0.4;
        assert_relative_eq!(far[0], 3.0 - (2.0 + zeta * 12.0), epsilon = 1e-12);
        assert_relative_eq!(far[1], 5.0 - (15.0 + zeta * 15.0), epsilon = 1e-12);
    }
}
