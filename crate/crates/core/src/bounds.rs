//! Upper and lower bounds on the achievable reward rate, the tuning of
//! `(eps, beta)` that optimizes the gap, and the power-law fit of the
//! resulting error ladder.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lp::{solve_knapsack, solve_network_lp, solve_steady, LpSolution};
use crate::model::{scale_scenario, Scenario};
use crate::policy::{beta_max, restrict, retained_classes};
use crate::sim::fmt_num;

/// Upper and lower reward curves on a time grid with their steady limits.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub steady_upper: f64,
    pub steady_lower: f64,
}

/// Objective minimized by [`tune_epsilon`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TuneObjective {
    /// Steady limit of the lower bound curve.
    #[default]
    SteadyLimit,
    /// The looser closed-form ratio of [`corollary_ratio`].
    Corollary,
}

/// Result of [`tune_epsilon`]. Errors are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub eps: f64,
    pub beta: f64,
    pub steady_error: f64,
    pub transient_error: f64,
    /// Steady lower bound before clamping at zero.
    pub steady_lower_raw: f64,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::InvalidParameter("times must be nonnegative".into()));
    }
    Ok(())
}

fn finite_dual_load(sc: &Scenario, lp: &LpSolution) -> f64 {
    lp.dual_u
        .iter()
        .zip(&sc.capacity)
        .filter(|(_, b)| b.is_finite())
        .map(|(u, b)| u * b)
        .sum()
}

fn check_lp_shape(sc: &Scenario, lp: &LpSolution) -> Result<()> {
    if lp.alpha.len() != sc.num_classes() || lp.dual_u.len() != sc.num_resources() {
        return Err(Error::InvalidParameter(
            "LP solution does not match the scenario".into(),
        ));
    }
    Ok(())
}

/// Closed-form upper bound
/// `min{ sum r rho (1 - e^{-mu t}), sum alpha* r rho (1 - e^{-mu t}) + u'b e^{-mu_min t} }`.
pub fn upper_bound_curve(sc: &Scenario, lp: &LpSolution, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    check_lp_shape(sc, lp)?;
    let alpha = lp.class_alpha();
    let ub = finite_dual_load(sc, lp);
    let mu_min = sc.mu_min();
    Ok(times
        .iter()
        .map(|&t| {
            let mut open = 0.0;
            let mut priced = ub * (-mu_min * t).exp();
            for (c, a) in sc.classes.iter().zip(&alpha) {
                let w = c.reward * c.offered_load() * (1.0 - (-c.service.rate() * t).exp());
                open += w;
                priced += a * w;
            }
            open.min(priced)
        })
        .collect())
}

/// Optimum of the finite-horizon LP at every grid point; the closed form
/// of [`upper_bound_curve`] dominates it.
pub fn exact_upper_curve(sc: &Scenario, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    times
        .iter()
        .map(|&t| {
            let lp = if sc.is_single_resource() {
                solve_knapsack(sc, t, 1.0)?
            } else {
                solve_network_lp(sc, t, 1.0)?
            };
            Ok(lp.value)
        })
        .collect()
}

/// Upper bound for general service distributions, written with the
/// equilibrium tails `Ge_i(t)`.
pub fn upper_bound_general_service(
    sc: &Scenario,
    lp: &LpSolution,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_times(times)?;
    check_lp_shape(sc, lp)?;
    let alpha = lp.class_alpha();
    let ub = finite_dual_load(sc, lp);
    Ok(times
        .iter()
        .map(|&t| {
            let mut open = 0.0;
            let mut priced = 0.0;
            let mut worst_tail = 0.0f64;
            for (c, a) in sc.classes.iter().zip(&alpha) {
                let tail = c.service.equilibrium_tail(t);
                worst_tail = worst_tail.max(tail);
                let w = c.reward * c.offered_load() * (1.0 - tail);
                open += w;
                priced += a * w;
            }
            open.min(priced + ub * worst_tail)
        })
        .collect())
}

/// Upper bound for a knapsack that starts with `x0[i]` class-`i` requests
/// in service.
pub fn initial_state_upper_bound(
    sc: &Scenario,
    lp: &LpSolution,
    x0: &[f64],
    times: &[f64],
) -> Result<Vec<f64>> {
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    check_times(times)?;
    check_lp_shape(sc, lp)?;
    if x0.len() != sc.num_classes() {
        return Err(Error::InvalidParameter(format!(
            "expected {} initial counts, got {}",
            sc.num_classes(),
            x0.len()
        )));
    }
    if x0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "initial counts must be nonnegative".into(),
        ));
    }
    let sizes = sc.sizes();
    let used: f64 = x0.iter().zip(&sizes).map(|(x, b)| x * b).sum();
    if used > sc.capacity[0] * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "initial state uses {used} of capacity {}",
            sc.capacity[0]
        )));
    }
    let alpha = lp.class_alpha();
    let ub = finite_dual_load(sc, lp);
    let mu_min = sc.mu_min();
    Ok(times
        .iter()
        .map(|&t| {
            let mut open = 0.0;
            let mut priced = ub * (-mu_min * t).exp();
            for (i, c) in sc.classes.iter().enumerate() {
                let rho = c.offered_load();
                let decay = (-c.service.rate() * t).exp();
                let w = c.reward * rho * (1.0 - decay);
                open += w + c.reward * x0[i] * decay;
                priced += alpha[i] * w;
                if rho > 0.0 {
                    priced += lp.dual_v[i] * x0[i] / rho * decay;
                }
            }
            open.min(priced)
        })
        .collect())
}

/// `(K, log base)` constants of the lower bound: `(2, 2)` for a knapsack and
/// `((s+1)^2, s+1)` for a network with `s` resources.
fn lower_constants(sc: &Scenario) -> (f64, f64) {
    if sc.is_single_resource() {
        (2.0, 2.0)
    } else {
        let s1 = sc.num_resources() as f64 + 1.0;
        (s1 * s1, s1)
    }
}

/// `zeta = (ln(base)/beta + 1 - eps/2)(1 + 4 eps) - 1`.
pub fn zeta(eps: f64, beta: f64, base: f64) -> f64 {
    (base.ln() / beta + 1.0 - eps / 2.0) * (1.0 + 4.0 * eps) - 1.0
}

struct LowerTerms {
    /// `(alpha_eps_i r_i rho_i, r_i rho_i, mu_i)` over retained classes.
    classes: Vec<(f64, f64, f64)>,
    /// `zeta sum (1 - alpha_eps) r rho`.
    shortfall: f64,
    /// `K exp(-(eps/2)(beta - 4))`.
    tail_factor: f64,
}

impl LowerTerms {
    fn raw(&self, t: f64) -> f64 {
        let mut gain = 0.0;
        let mut full = 0.0;
        for &(ar, r, mu) in &self.classes {
            let g = 1.0 - (-mu * t).exp();
            gain += ar * g;
            full += r * g;
        }
        gain - self.shortfall - self.tail_factor * full
    }

    fn steady_raw(&self) -> f64 {
        let gain: f64 = self.classes.iter().map(|c| c.0).sum();
        let full: f64 = self.classes.iter().map(|c| c.1).sum();
        gain - self.shortfall - self.tail_factor * full
    }
}

fn lower_terms(sc: &Scenario, eps: f64, beta: f64, lp_eps: &LpSolution) -> Result<LowerTerms> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 0.25], got {eps}"
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    check_lp_shape(sc, lp_eps)?;
    let keep = retained_classes(sc)?;
    let sub = restrict(sc, &keep);
    let lp_sub = lp_eps.restrict(&keep);
    let bound = beta_max(&sub, eps, &lp_sub).map_err(|e| match e {
        Error::ZeroPerturbedFraction { class } => {
            Error::ZeroPerturbedFraction { class: keep[class] }
        }
        other => other,
    })?;
    if beta > bound * (1.0 + 1e-12) {
        return Err(Error::BetaTooLarge {
            requested: beta,
            bound,
        });
    }
    let (k, base) = lower_constants(sc);
    let z = zeta(eps, beta, base);
    let alpha = lp_sub.class_alpha();
    let mut classes = Vec::with_capacity(keep.len());
    let mut missing = 0.0;
    for (c, a) in sub.classes.iter().zip(&alpha) {
        let r = c.reward * c.offered_load();
        classes.push((a * r, r, c.service.rate()));
        missing += (1.0 - a) * r;
    }
    Ok(LowerTerms {
        classes,
        shortfall: z * missing,
        tail_factor: k * (-(eps / 2.0) * (beta - 4.0)).exp(),
    })
}

/// Lower bound `L(t)` on the reward rate of the penalty policy with
/// parameters `(eps, beta)`, clamped at zero. `lp_eps` is the solution of
/// the LP with capacity shrunk by `1 + 4 eps`, indexed like `sc`; classes
/// with zero steady-state fraction do not enter the bound.
pub fn lower_bound_curve(
    sc: &Scenario,
    eps: f64,
    beta: f64,
    lp_eps: &LpSolution,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_times(times)?;
    let terms = lower_terms(sc, eps, beta, lp_eps)?;
    Ok(times.iter().map(|&t| terms.raw(t).max(0.0)).collect())
}

/// Limit of `L(t)` as `t` grows, before clamping at zero.
pub fn steady_lower_raw(sc: &Scenario, eps: f64, beta: f64, lp_eps: &LpSolution) -> Result<f64> {
    Ok(lower_terms(sc, eps, beta, lp_eps)?.steady_raw())
}

/// Closed-form lower estimate of the steady ratio `L / R*`:
/// `1 - 12 eps - 2 ln(base)/beta - (K e^{-(eps/2)(beta-4)} + 8 eps + 2 ln(base)/beta) sum r rho / R*`.
pub fn corollary_ratio(sc: &Scenario, eps: f64, beta: f64) -> Result<f64> {
    let keep = retained_classes(sc)?;
    let sub = restrict(sc, &keep);
    let r_star = solve_steady(sc, 1.0)?.value;
    if !(r_star > 0.0) {
        return Err(Error::InvalidParameter("optimal reward is zero".into()));
    }
    let (k, base) = lower_constants(sc);
    let total: f64 = sub
        .classes
        .iter()
        .map(|c| c.reward * c.offered_load())
        .sum();
    let log_term = 2.0 * base.ln() / beta;
    Ok(1.0
        - 12.0 * eps
        - log_term
        - (k * (-(eps / 2.0) * (beta - 4.0)).exp() + 8.0 * eps + log_term) * total / r_star)
}

/// Both curves for given `(eps, beta)`, with the upper curve from the
/// closed form or, when `exact` is set, from the per-time LP.
pub fn bound_curve(
    sc: &Scenario,
    eps: f64,
    beta: f64,
    times: &[f64],
    exact: bool,
) -> Result<BoundCurve> {
    let lp = solve_steady(sc, 1.0)?;
    let lp_eps = solve_steady(sc, 1.0 + 4.0 * eps)?;
    let upper = if exact {
        exact_upper_curve(sc, times)?
    } else {
        upper_bound_curve(sc, &lp, times)?
    };
    let lower = lower_bound_curve(sc, eps, beta, &lp_eps, times)?;
    let steady_lower = steady_lower_raw(sc, eps, beta, &lp_eps)?.max(0.0);
    Ok(BoundCurve {
        times: times.to_vec(),
        upper,
        lower,
        steady_upper: lp.value,
        steady_lower,
    })
}

/// CSV with columns `t, upper, lower, steady_upper, steady_lower`, preceded
/// by `#` metadata lines.
pub fn bound_csv(curve: &BoundCurve, metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(out, "t,upper,lower,steady_upper,steady_lower");
    for (i, t) in curve.times.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(*t),
            fmt_num(curve.upper[i]),
            fmt_num(curve.lower[i]),
            fmt_num(curve.steady_upper),
            fmt_num(curve.steady_lower)
        );
    }
    out
}

/// `0.001, 0.002, ..., 0.249`.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=249).map(|k| k as f64 / 1000.0).collect()
}

/// Grid of 200 points on `[0, 10 / mu_min]`.
pub fn default_times(sc: &Scenario) -> Vec<f64> {
    let t_max = 10.0 / sc.mu_min();
    (0..200).map(|k| t_max * k as f64 / 199.0).collect()
}

/// Chooses `eps` on the grid with `beta` at its largest admissible value so
/// as to minimize the steady error `1 - L/R*`, then reports that error and
/// the transient error `sup_{t >= 0.1/mu_min} 1 - L(t)/R*(t)` on the
/// default time grid. Grid points where a retained class gets a zero
/// perturbed fraction are skipped.
pub fn tune_epsilon(sc: &Scenario, grid: &[f64], objective: TuneObjective) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps grid".into()));
    }
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    sc.ensure_valid()?;
    let lp = solve_steady(sc, 1.0)?;
    let r_star = lp.value;
    if !(r_star > 0.0) {
        return Err(Error::InvalidParameter("optimal reward is zero".into()));
    }
    let keep = retained_classes(sc)?;
    let sub = restrict(sc, &keep);

    let mut best: Option<(f64, f64, f64, LpSolution)> = None;
    for &eps in grid {
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 0.25], got {eps}"
            )));
        }
        let lp_eps = solve_steady(sc, 1.0 + 4.0 * eps)?;
        let beta = match beta_max(&sub, eps, &lp_eps.restrict(&keep)) {
            Ok(b) => b,
            Err(Error::ZeroPerturbedFraction { .. }) => continue,
            Err(e) => return Err(e),
        };
        let score = match objective {
            TuneObjective::SteadyLimit => 1.0 - steady_lower_raw(sc, eps, beta, &lp_eps)? / r_star,
            TuneObjective::Corollary => 1.0 - corollary_ratio(sc, eps, beta)?,
        };
        if best.as_ref().map_or(true, |b| score < b.2) {
            best = Some((eps, beta, score, lp_eps));
        }
    }
    let (eps, beta, _, lp_eps) = best.ok_or_else(|| {
        Error::InvalidParameter("no eps on the grid admits a positive multiplier bound".into())
    })?;
    let raw = steady_lower_raw(sc, eps, beta, &lp_eps)?;
    let times = default_times(sc);
    let lower = lower_bound_curve(sc, eps, beta, &lp_eps, &times)?;
    let upper = upper_bound_curve(sc, &lp, &times)?;
    let t0 = 0.1 / sc.mu_min();
    let transient = times
        .iter()
        .zip(lower.iter().zip(&upper))
        .filter(|(t, (_, u))| **t >= t0 && **u > 0.0)
        .map(|(_, (l, u))| 1.0 - l / u)
        .fold(0.0f64, f64::max);
    Ok(TuneResult {
        eps,
        beta,
        steady_error: 1.0 - raw.max(0.0) / r_star,
        transient_error: transient,
        steady_lower_raw: raw,
    })
}

/// Scales `1, 2, 4, ..., 1024`.
pub fn table_scales() -> Vec<f64> {
    (0..=10).map(|k| (1u64 << k) as f64).collect()
}

/// [`tune_epsilon`] at every scale of the ladder, with rewards rescaled so
/// that the optimal reward is the same at every scale.
pub fn tuning_ladder(
    sc: &Scenario,
    scales: &[f64],
    grid: &[f64],
    objective: TuneObjective,
) -> Result<Vec<(f64, TuneResult)>> {
    scales
        .iter()
        .map(|&n| {
            Ok((
                n,
                tune_epsilon(&scale_scenario(sc, n, true)?, grid, objective)?,
            ))
        })
        .collect()
}

/// Least-squares fit of `ln(scale) = ln(a) + p ln(error)`; returns `(a, p)`.
pub fn power_law_fit(scales: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if scales.len() != errors.len() {
        return Err(Error::InvalidParameter(
            "scales and errors differ in length".into(),
        ));
    }
    if scales.len() < 3 {
        return Err(Error::InvalidParameter("need at least three points".into()));
    }
    if scales
        .iter()
        .chain(errors)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::InvalidParameter(
            "scales and errors must be positive".into(),
        ));
    }
    let xs: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "errors are all equal; slope undefined".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let p = sxy / sxx;
    Ok(((my - p * mx).exp(), p))
}

fn check_open_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 0.25), got {eps}"
        )));
    }
    Ok(())
}

/// `beta = (2/eps) ln(2/eps) + 4`.
pub fn halfin_whitt_beta(eps: f64) -> Result<f64> {
    check_open_eps(eps)?;
    Ok(2.0 / eps * (2.0 / eps).ln() + 4.0)
}

fn scaled_beta_bound(sc: &Scenario, eps: f64, n: f64) -> Result<f64> {
    let scaled = scale_scenario(sc, n, false)?;
    let keep = retained_classes(&scaled)?;
    let sub = restrict(&scaled, &keep);
    let lp_eps = solve_steady(&sub, 1.0 + 4.0 * eps)?;
    beta_max(&sub, eps, &lp_eps)
}

/// Smallest scale `n >= 1` at which the multiplier [`halfin_whitt_beta`] is
/// admissible.
pub fn n_zero(sc: &Scenario, eps: f64) -> Result<u64> {
    let beta = halfin_whitt_beta(eps)?;
    let unit = scaled_beta_bound(sc, eps, 1.0)?;
    if !(unit > 0.0) {
        return Err(Error::InvalidParameter("multiplier bound is zero".into()));
    }
    let mut n = ((beta / unit).ceil() as u64).max(1);
    while scaled_beta_bound(sc, eps, n as f64)? < beta {
        n += 1;
    }
    while n > 1 && scaled_beta_bound(sc, eps, (n - 1) as f64)? >= beta {
        n -= 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_knapsack;
    use crate::model::{RequestClass, ServiceModel};
    use crate::scenarios;
    use approx::assert_relative_eq;

    #[test]
    fn upper_curve_eq52() {
        let sc = scenarios::eq52();
        let lp = solve_steady(&sc, 1.0).unwrap();
        let v = upper_bound_curve(&sc, &lp, &[0.0, 1.0, 1e4]).unwrap();
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[2], 207.2727, epsilon = 1e-3);
        // both branches by hand at t = 1
        let mut open = 0.0;
        let mut priced = lp.dual_u[0] * 100.0 * (-0.3f64).exp();
        for (c, a) in sc.classes.iter().zip(lp.class_alpha()) {
            let w =
                c.reward * c.arrival_rate / c.service.rate() * (1.0 - (-c.service.rate()).exp());
            open += w;
            priced += a * w;
        }
        assert_relative_eq!(v[1], open.min(priced), max_relative = 1e-14);
    }

    #[test]
    fn general_service_matches_exponential() {
        let sc = scenarios::eq52();
        let lp = solve_steady(&sc, 1.0).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let a = upper_bound_curve(&sc, &lp, &times).unwrap();
        let b = upper_bound_general_service(&sc, &lp, &times).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn heavy_tail_first_branch() {
        let sc = Scenario {
            capacity: vec![1e9],
            classes: vec![RequestClass {
                service: ServiceModel::HeavyTail,
                ..RequestClass::simple(1.0, 1.0, 1.0, 1.0)
            }],
        };
        let lp = solve_steady(&sc, 1.0).unwrap();
        let v = upper_bound_general_service(&sc, &lp, &[3.0]).unwrap();
        assert_relative_eq!(v[0], 1.0 - 1.0 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn eq52_lower_bound_is_clamped() {
        let sc = scenarios::eq52();
        let lp_eps = solve_steady(&sc, 2.0).unwrap();
        let raw = steady_lower_raw(&sc, 0.25, 20.0, &lp_eps).unwrap();
        let z = zeta(0.25, 20.0, 2.0);
        assert_relative_eq!(z, 0.819315, epsilon = 1e-6);
        let hand = 139.0909 - z * 100.9091 - 2.0 * (-2.0f64).exp() * 240.0;
        assert_relative_eq!(raw, hand, epsilon = 1e-3);
        assert!(raw < 0.0);
        let l = lower_bound_curve(&sc, 0.25, 20.0, &lp_eps, &[0.0, 5.0, 50.0]).unwrap();
        assert_eq!(l, vec![0.0; 3]);
    }

    #[test]
    fn inadmissible_beta_rejected() {
        let sc = scenarios::eq52();
        let lp_eps = solve_steady(&sc, 2.0).unwrap();
        assert!(matches!(
            lower_bound_curve(&sc, 0.25, 21.0, &lp_eps, &[1.0]),
            Err(Error::BetaTooLarge { .. })
        ));
        assert!(lower_bound_curve(&sc, 0.3, 1.0, &lp_eps, &[1.0]).is_err());
    }

    #[test]
    fn initial_state_reduces_to_empty_start() {
        let sc = scenarios::eq52();
        let lp = solve_knapsack(&sc, f64::INFINITY, 1.0).unwrap();
        let times = [0.0, 0.5, 2.0];
        let a = upper_bound_curve(&sc, &lp, &times).unwrap();
        let b = initial_state_upper_bound(&sc, &lp, &[0.0; 3], &times).unwrap();
        assert_eq!(a, b);
        let x0 = [10.0, 5.0, 0.0];
        let c = initial_state_upper_bound(&sc, &lp, &x0, &[0.0]).unwrap();
        let rx: f64 = sc.classes.iter().zip(&x0).map(|(c, x)| c.reward * x).sum();
        let vx: f64 = sc
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| lp.dual_v[i] * x0[i] / c.offered_load())
            .sum();
        assert_relative_eq!(
            c[0],
            rx.min(lp.dual_u[0] * 100.0 + vx),
            max_relative = 1e-14
        );
        assert!(initial_state_upper_bound(&sc, &lp, &[1001.0, 0.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn power_law_exact() {
        let errs = [0.5, 0.25, 0.1, 0.05];
        let scales: Vec<f64> = errs.iter().map(|e: &f64| e.powf(-2.0)).collect();
        let (a, p) = power_law_fit(&scales, &errs).unwrap();
        assert!((p + 2.0).abs() < 1e-9);
        assert!((a - 1.0).abs() < 1e-9);
        assert!(power_law_fit(&[1.0, 2.0], &[0.5, 0.2]).is_err());
        assert!(power_law_fit(&[1.0, 2.0, 0.0], &[0.5, 0.2, 0.1]).is_err());
    }

    #[test]
    fn power_law_duplicated_pairs() {
        let (_, p) = power_law_fit(
            &[1.0, 1.0, 1.0, 8.0, 8.0, 8.0],
            &[0.5, 0.5, 0.5, 0.25, 0.25, 0.25],
        )
        .unwrap();
        assert_relative_eq!(
            p,
            8f64.ln() / (0.25f64.ln() - 0.5f64.ln()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn halfin_whitt_value() {
        assert!(halfin_whitt_beta(0.25).is_err());
        let b = halfin_whitt_beta(0.2).unwrap();
        assert_relative_eq!(b, 10.0 * 10f64.ln() + 4.0, max_relative = 1e-15);
    }

    #[test]
    fn n_zero_matches_direct_search() {
        let sc = scenarios::eq52();
        let eps = 0.2;
        let n = n_zero(&sc, eps).unwrap();
        let beta = halfin_whitt_beta(eps).unwrap();
        assert!(scaled_beta_bound(&sc, eps, n as f64).unwrap() >= beta);
        if n > 1 {
            assert!(scaled_beta_bound(&sc, eps, (n - 1) as f64).unwrap() < beta);
        }
        let big = scale_scenario(&sc, 1e4, false).unwrap();
        assert_eq!(n_zero(&big, eps).unwrap(), 1);
    }

    #[test]
    fn tune_rejects_empty_grid() {
        assert!(tune_epsilon(&scenarios::eq52(), &[], TuneObjective::SteadyLimit).is_err());
    }

    #[test]
    fn tune_large_load_has_small_error() {
        let sc = Scenario::knapsack(1e7, &[1e7], &[1.0], &[1.0], &[0.5]);
        let r = tune_epsilon(&sc, &default_eps_grid(), TuneObjective::SteadyLimit).unwrap();
        assert!(r.steady_error < 0.05, "{r:?}");
    }
}
