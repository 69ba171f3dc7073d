//! Admission rules: exponential penalty (single resource and network),
//! independent thinning and accept-if-fits.

use crate::error::{Error, Result};
use crate::lp::{solve_knapsack, solve_network_lp, solve_steady, LpSolution};
use crate::model::Scenario;
use crate::polytope::TrackingConfig;
use crate::sim::SimState;

const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaChoice {
    /// Use the largest admissible multiplier.
    Max,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectCause {
    PenaltyRule,
    Capacity,
    Thinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyDecision {
    Accept(usize),
    Reject(RejectCause),
}

/// Parameters of one penalty policy instance, indexed by the original
/// class numbering. Classes whose steady-state fraction is zero are inactive
/// and always rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub eps: f64,
    pub beta: f64,
    /// Admissible upper bound on `beta` for this configuration.
    pub beta_bound: f64,
    /// `c0[i][k]`; a single column for the knapsack rule.
    pub c0: Vec<Vec<f64>>,
    pub c1: Vec<f64>,
    /// Resource normalisation (network rule only).
    pub nu: Vec<f64>,
    pub y0: Vec<u64>,
    /// Perturbed fractions `alpha_eps[i][j]`, zero for inactive classes and dropped allocations.
    pub alpha_eps: Vec<Vec<f64>>,
    pub active: Vec<bool>,
    /// Allocations the network rule may choose from.
    pub allowed: Vec<Vec<bool>>,
    pub network: bool,
}

impl PenaltyConfig {
    pub fn class_alpha_eps(&self) -> Vec<f64> {
        self.alpha_eps.iter().map(|a| a.iter().sum()).collect()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 0.25], got {eps}"
        )));
    }
    Ok(())
}

/// Classes with a positive steady-state acceptance fraction.
pub fn retained_classes(sc: &Scenario) -> Result<Vec<usize>> {
    let lp = solve_steady(sc, 1.0)?;
    Ok(lp
        .class_alpha()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > ZERO_TOL)
        .map(|(i, _)| i)
        .collect())
}

/// Knapsack multiplier bound
/// `eps (1+4eps) min{ min_i alpha_i rho_i, min_{alpha_i < 1} (1 - alpha_i) rho_i }`.
pub fn beta_bound(eps: f64, alpha_eps: &[f64], rho: &[f64]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for (i, (&a, &r)) in alpha_eps.iter().zip(rho).enumerate() {
        if a <= ZERO_TOL {
            return Err(Error::ZeroPerturbedFraction { class: i });
        }
        m = m.min(a * r);
        if a < 1.0 {
            m = m.min((1.0 - a) * r);
        }
    }
    Ok(eps * (1.0 + 4.0 * eps) * m)
}

/// Multiplier bound for the perturbed solution `lp_eps` of `sc`; the
/// network bound is used when `sc` is not a knapsack.
pub fn beta_max(sc: &Scenario, eps: f64, lp_eps: &LpSolution) -> Result<f64> {
    check_eps(eps)?;
    if sc.is_single_resource() {
        let rho: Vec<f64> = sc.classes.iter().map(|c| c.offered_load()).collect();
        beta_bound(eps, &lp_eps.class_alpha(), &rho)
    } else {
        let (c0, c1, _) = network_capacities(sc, eps, &lp_eps.alpha)?;
        network_beta_bound(sc, eps, &lp_eps.alpha, &c0, &c1)
    }
}

fn network_capacities(
    sc: &Scenario,
    eps: f64,
    alpha: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    let s = sc.num_resources();
    let f = 1.0 + 4.0 * eps;
    let rho: Vec<f64> = sc.classes.iter().map(|c| c.offered_load()).collect();
    let mut load = vec![vec![0.0; s]; sc.num_classes()];
    for (i, c) in sc.classes.iter().enumerate() {
        for (j, b) in c.allocations.iter().enumerate() {
            for k in 0..s {
                load[i][k] += alpha[i][j] * b[k];
            }
        }
    }
    let nu: Vec<f64> = (0..s)
        .map(|k| {
            let used: f64 = (0..sc.num_classes()).map(|i| load[i][k] * rho[i]).sum();
            if sc.capacity[k].is_infinite() {
                f64::INFINITY
            } else {
                (sc.capacity[k] / f) / used
            }
        })
        .collect();
    let c0 = (0..sc.num_classes())
        .map(|i| {
            (0..s)
                .map(|k| {
                    if nu[k].is_infinite() {
                        f64::INFINITY
                    } else {
                        f * nu[k] * load[i][k] * rho[i]
                    }
                })
                .collect()
        })
        .collect();
    let c1 = (0..sc.num_classes())
        .map(|i| f * (1.0 - alpha[i].iter().sum::<f64>()).max(0.0) * rho[i])
        .collect();
    Ok((c0, c1, nu))
}

fn network_beta_bound(
    sc: &Scenario,
    eps: f64,
    alpha: &[Vec<f64>],
    c0: &[Vec<f64>],
    c1: &[f64],
) -> Result<f64> {
    let mut m = f64::INFINITY;
    for (i, c) in sc.classes.iter().enumerate() {
        let total: f64 = alpha[i].iter().sum();
        if total <= ZERO_TOL {
            return Err(Error::ZeroPerturbedFraction { class: i });
        }
        for b in &c.allocations {
            for (k, &bk) in b.iter().enumerate() {
                if bk > 0.0 && c0[i][k].is_finite() {
                    if c0[i][k] <= 0.0 {
                        return Err(Error::ZeroPerturbedFraction { class: i });
                    }
                    m = m.min(c0[i][k] / bk);
                }
            }
        }
        if total < 1.0 {
            m = m.min(c1[i]);
        }
    }
    Ok(eps * m)
}

fn resolve_beta(choice: BetaChoice, bound: f64) -> Result<f64> {
    match choice {
        BetaChoice::Max => Ok(bound),
        BetaChoice::Value(v) if !(v.is_finite() && v > 0.0) => Err(Error::InvalidParameter(
            format!("beta must be positive, got {v}"),
        )),
        BetaChoice::Value(v) if v > bound * (1.0 + 1e-12) => Err(Error::BetaTooLarge {
            requested: v,
            bound,
        }),
        BetaChoice::Value(v) => Ok(v),
    }
}

/// Checks `log Psi_i(0, y0_i) <= log(s + 1) + (1 - eps/2) beta` for every
/// class, where `Psi_i(0, y) = s + exp(e)` and `e` is the fictitious exponent.
fn check_initial_budget(eps: f64, beta: f64, s: usize, exponents: &[f64]) -> Result<()> {
    let x_terms = s as f64;
    let cap = (x_terms + 1.0).ln() + (1.0 - eps / 2.0) * beta;
    for &e in exponents {
        let m = e.max(x_terms.ln());
        let log_psi = m + ((x_terms.ln() - m).exp() + (e - m).exp()).ln();
        if log_psi > cap {
            return Err(Error::PenaltyBudget {
                log_psi,
                log_psi_star: cap,
            });
        }
    }
    Ok(())
}

/// Knapsack penalty policy: drops classes with zero steady-state fraction,
/// solves the perturbed LP and sets the target capacities and initial
/// fictitious load from it.
pub fn build_penalty_config(sc: &Scenario, eps: f64, beta: BetaChoice) -> Result<PenaltyConfig> {
    check_eps(eps)?;
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    sc.ensure_valid()?;
    let keep = retained_classes(sc)?;
    let sub = restrict(sc, &keep);
    let lp = solve_knapsack(&sub, f64::INFINITY, 1.0 + 4.0 * eps)?;
    knapsack_config(sc, &keep, &lp.class_alpha(), eps, beta)
}

/// Knapsack penalty policy that tracks the given acceptance fractions in
/// place of the perturbed LP solution; classes with a zero target are
/// always rejected.
pub fn build_target_penalty_config(
    sc: &Scenario,
    eps: f64,
    alpha: &[f64],
    beta: BetaChoice,
) -> Result<PenaltyConfig> {
    check_eps(eps)?;
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    sc.ensure_valid()?;
    if alpha.len() != sc.num_classes() {
        return Err(Error::InvalidParameter(format!(
            "expected {} target fractions, got {}",
            sc.num_classes(),
            alpha.len()
        )));
    }
    for (i, a) in alpha.iter().enumerate() {
        if !(0.0..=1.0).contains(a) {
            return Err(Error::InfeasibleTarget {
                class: i,
                alpha: *a,
            });
        }
    }
    let keep: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > ZERO_TOL).collect();
    let ae: Vec<f64> = keep.iter().map(|&i| alpha[i]).collect();
    knapsack_config(sc, &keep, &ae, eps, beta)
}

fn knapsack_config(
    sc: &Scenario,
    keep: &[usize],
    ae: &[f64],
    eps: f64,
    beta: BetaChoice,
) -> Result<PenaltyConfig> {
    let sub = restrict(sc, keep);
    let f = 1.0 + 4.0 * eps;
    let rho: Vec<f64> = sub.classes.iter().map(|c| c.offered_load()).collect();
    let size = sub.sizes();
    let bound = beta_bound(eps, ae, &rho).map_err(|e| remap_class(e, keep))?;
    let beta = resolve_beta(beta, bound)?;

    let m = sc.num_classes();
    let mut cfg = PenaltyConfig {
        eps,
        beta,
        beta_bound: bound,
        c0: vec![vec![0.0]; m],
        c1: vec![0.0; m],
        nu: vec![1.0],
        y0: vec![0; m],
        alpha_eps: vec![vec![0.0]; m],
        active: vec![false; m],
        allowed: sc
            .classes
            .iter()
            .map(|c| vec![false; c.allocations.len()])
            .collect(),
        network: false,
    };
    let mut exps = Vec::new();
    for (r, &i) in keep.iter().enumerate() {
        cfg.active[i] = true;
        cfg.allowed[i][0] = true;
        cfg.alpha_eps[i][0] = ae[r];
        cfg.c0[i][0] = f * ae[r] * size[r] * rho[r];
        cfg.c1[i] = f * (1.0 - ae[r]) * size[r] * rho[r];
        cfg.y0[i] = ((1.0 - ae[r]) * rho[r]).round_ties_even() as u64;
        if cfg.c1[i] > 0.0 {
            exps.push(beta * size[r] * cfg.y0[i] as f64 / cfg.c1[i]);
        }
    }
    check_initial_budget(eps, beta, 1, &exps)?;
    Ok(cfg)
}

/// Network penalty policy. Allocations with zero steady-state fraction are
/// dropped before the perturbed LP is solved.
pub fn build_network_penalty_config(
    sc: &Scenario,
    eps: f64,
    beta: BetaChoice,
) -> Result<PenaltyConfig> {
    check_eps(eps)?;
    sc.ensure_valid()?;
    let steady = solve_network_lp(sc, f64::INFINITY, 1.0)?;
    let m = sc.num_classes();
    let mut keep = Vec::new();
    let mut allowed: Vec<Vec<bool>> = Vec::with_capacity(m);
    for i in 0..m {
        let row: Vec<bool> = steady.alpha[i].iter().map(|a| *a > ZERO_TOL).collect();
        if row.iter().any(|b| *b) {
            keep.push(i);
        }
        allowed.push(row);
    }
    let mut sub = restrict(sc, &keep);
    for (r, &i) in keep.iter().enumerate() {
        sub.classes[r].allocations = sc.classes[i]
            .allocations
            .iter()
            .zip(&allowed[i])
            .filter(|(_, ok)| **ok)
            .map(|(a, _)| a.clone())
            .collect();
    }
    let f = 1.0 + 4.0 * eps;
    let lp = solve_network_lp(&sub, f64::INFINITY, f)?;
    let (c0s, c1s, nu) = network_capacities(&sub, eps, &lp.alpha)?;
    let bound =
        network_beta_bound(&sub, eps, &lp.alpha, &c0s, &c1s).map_err(|e| remap_class(e, &keep))?;
    let beta = resolve_beta(beta, bound)?;

    let s = sc.num_resources();
    let mut cfg = PenaltyConfig {
        eps,
        beta,
        beta_bound: bound,
        c0: vec![vec![0.0; s]; m],
        c1: vec![0.0; m],
        nu,
        y0: vec![0; m],
        alpha_eps: sc
            .classes
            .iter()
            .map(|c| vec![0.0; c.allocations.len()])
            .collect(),
        active: vec![false; m],
        allowed: vec![],
        network: true,
    };
    let mut exps = Vec::new();
    for (r, &i) in keep.iter().enumerate() {
        cfg.active[i] = true;
        let mut it = lp.alpha[r].iter();
        for (j, ok) in allowed[i].iter().enumerate() {
            if *ok {
                cfg.alpha_eps[i][j] = *it.next().expect("retained allocation");
            }
        }
        cfg.c0[i] = c0s[r].clone();
        cfg.c1[i] = c1s[r];
        let total: f64 = lp.alpha[r].iter().sum();
        let rho = sub.classes[r].offered_load();
        cfg.y0[i] = ((1.0 - total).max(0.0) * rho).round_ties_even() as u64;
        if cfg.c1[i] > 0.0 {
            exps.push(beta * cfg.y0[i] as f64 / cfg.c1[i]);
        }
    }
    for i in 0..m {
        if !cfg.active[i] {
            allowed[i].iter_mut().for_each(|b| *b = false);
        }
    }
    cfg.allowed = allowed;
    check_initial_budget(eps, beta, s, &exps)?;
    Ok(cfg)
}

fn remap_class(e: Error, keep: &[usize]) -> Error {
    match e {
        Error::ZeroPerturbedFraction { class } => {
            Error::ZeroPerturbedFraction { class: keep[class] }
        }
        other => other,
    }
}

/// Sub-scenario made of the listed classes.
pub fn restrict(sc: &Scenario, keep: &[usize]) -> Scenario {
    Scenario {
        capacity: sc.capacity.clone(),
        classes: keep.iter().map(|&i| sc.classes[i].clone()).collect(),
    }
}

fn check_class(sc: &Scenario, class: usize) -> Result<()> {
    if class >= sc.num_classes() {
        Err(Error::UnknownClass(class))
    } else {
        Ok(())
    }
}

/// Knapsack penalty rule in its logarithmic form
/// `x/c0 <= y/c1 + log(c0/c1)/(beta b)`, followed by the capacity check.
pub fn penalty_decide(
    cfg: &PenaltyConfig,
    sc: &Scenario,
    state: &SimState,
    class: usize,
) -> Result<PolicyDecision> {
    check_class(sc, class)?;
    if !cfg.active[class] {
        return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
    }
    let c0 = cfg.c0[class][0];
    let c1 = cfg.c1[class];
    if c1 > 0.0 {
        let b = sc.classes[class].allocations[0][0];
        let x = state.x[class][0] as f64;
        let y = state.y[class] as f64;
        if x / c0 > y / c1 + (c0 / c1).ln() / (cfg.beta * b) {
            return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
        }
    }
    Ok(if state.fits(sc, class, 0) {
        PolicyDecision::Accept(0)
    } else {
        PolicyDecision::Reject(RejectCause::Capacity)
    })
}

/// `log(sum exp(t))` with the largest term factored out.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    if terms.len() == 1 {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Network penalty rule: the cheapest retained allocation by marginal
/// penalty is compared with the marginal penalty of the fictitious system.
pub fn network_penalty_decide(
    cfg: &PenaltyConfig,
    sc: &Scenario,
    state: &SimState,
    class: usize,
) -> Result<PolicyDecision> {
    check_class(sc, class)?;
    if !cfg.active[class] {
        return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
    }
    let cl = &sc.classes[class];
    let s = sc.num_resources();
    let beta = cfg.beta;
    let mut w = vec![0.0; s];
    for (j, a) in cl.allocations.iter().enumerate() {
        let n = state.x[class][j] as f64;
        if n > 0.0 {
            for k in 0..s {
                w[k] += n * a[k];
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    let mut terms = Vec::with_capacity(s);
    for (j, a) in cl.allocations.iter().enumerate() {
        if !cfg.allowed[class][j] {
            continue;
        }
        terms.clear();
        for k in 0..s {
            let c0 = cfg.c0[class][k];
            if a[k] > 0.0 && c0.is_finite() {
                terms.push((beta * a[k] / c0).ln() + beta * w[k] / c0);
            }
        }
        let score = log_sum_exp(&terms);
        if best.map_or(true, |(_, b)| score < b) {
            best = Some((j, score));
        }
    }
    let Some((j, score)) = best else {
        return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
    };
    let c1 = cfg.c1[class];
    if c1 > 0.0 {
        let y = state.y[class] as f64;
        if score > (beta / c1).ln() + beta * y / c1 {
            return Ok(PolicyDecision::Reject(RejectCause::PenaltyRule));
        }
    }
    Ok(if state.fits(sc, class, j) {
        PolicyDecision::Accept(j)
    } else {
        PolicyDecision::Reject(RejectCause::Capacity)
    })
}

/// Thinning: the draw picks an allocation with probabilities `alpha[i][j]`
/// (or none), and the request is admitted if that allocation fits.
pub fn thinning_decide(
    alpha: &[Vec<f64>],
    sc: &Scenario,
    state: &SimState,
    class: usize,
    draw: f64,
) -> Result<PolicyDecision> {
    check_class(sc, class)?;
    let mut acc = 0.0;
    for (j, a) in alpha[class].iter().enumerate() {
        acc += a;
        if draw < acc {
            return Ok(if state.fits(sc, class, j) {
                PolicyDecision::Accept(j)
            } else {
                PolicyDecision::Reject(RejectCause::Capacity)
            });
        }
    }
    Ok(PolicyDecision::Reject(RejectCause::Thinned))
}

/// Accept into the first allocation that fits.
pub fn greedy_decide(sc: &Scenario, state: &SimState, class: usize) -> Result<PolicyDecision> {
    check_class(sc, class)?;
    Ok((0..sc.classes[class].allocations.len())
        .find(|&j| state.fits(sc, class, j))
        .map_or(
            PolicyDecision::Reject(RejectCause::Capacity),
            PolicyDecision::Accept,
        ))
}

/// Admission policy driven by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Greedy,
    Thinning { alpha: Vec<Vec<f64>> },
    Penalty(PenaltyConfig),
    Tracking(TrackingConfig),
}

impl Policy {
    /// Thinning with the steady-state LP fractions of `sc`.
    pub fn thinning_for(sc: &Scenario) -> Result<Policy> {
        Ok(Policy::Thinning {
            alpha: solve_steady(sc, 1.0)?.alpha,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Greedy => "greedy",
            Policy::Thinning { .. } => "thinning",
            Policy::Penalty(c) if c.network => "network-penalty",
            Policy::Penalty(_) => "penalty",
            Policy::Tracking(_) => "polytope",
        }
    }

    /// Initial fictitious load placed at time zero.
    pub fn initial_load(&self, m: usize) -> Vec<u64> {
        match self {
            Policy::Penalty(c) => c.y0.clone(),
            Policy::Tracking(t) => t.y0.clone(),
            _ => vec![0; m],
        }
    }

    pub fn decide(
        &self,
        sc: &Scenario,
        state: &SimState,
        class: usize,
        draw: f64,
    ) -> Result<PolicyDecision> {
        match self {
            Policy::Greedy => greedy_decide(sc, state, class),
            Policy::Thinning { alpha } => thinning_decide(alpha, sc, state, class, draw),
            Policy::Penalty(c) if c.network => network_penalty_decide(c, sc, state, class),
            Policy::Penalty(c) => penalty_decide(c, sc, state, class),
            Policy::Tracking(t) => crate::polytope::polytope_decide(t, sc, state, class),
        }
    }
}
