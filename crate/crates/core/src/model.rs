//! Scenario description shared by the LP, bound, policy and simulation code.
//!
//! A [`Scenario`] is a set of request classes competing for `s` resources.
//! Single-resource problems (the stochastic knapsack) are simply scenarios
//! with `s = 1` and one allocation per class.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Service-time distribution of a request class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ServiceModel {
    #[serde(rename = "exp")]
    Exponential { rate: f64 },
    #[serde(rename = "hyperexp")]
    HyperExponential { probs: Vec<f64>, rates: Vec<f64> },
    #[serde(rename = "det")]
    Deterministic { d: f64 },
    /// `G(s) = 1 - 1/(1+s)^2`, unit mean and infinite variance.
    #[serde(rename = "heavytail")]
    HeavyTail,
}

impl ServiceModel {
    pub fn exponential(rate: f64) -> Self {
        ServiceModel::Exponential { rate }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ServiceModel::Exponential { rate } => 1.0 / rate,
            ServiceModel::HyperExponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p / r).sum()
            }
            ServiceModel::Deterministic { d } => *d,
            ServiceModel::HeavyTail => 1.0,
        }
    }

    /// Reciprocal of the mean service time.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.tail(t)
    }

    /// `P(S > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            ServiceModel::Exponential { rate } => (-rate * t).exp(),
            ServiceModel::HyperExponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * (-r * t).exp())
                .sum(),
            ServiceModel::Deterministic { d } => {
                if t < *d {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceModel::HeavyTail => 1.0 / ((1.0 + t) * (1.0 + t)),
        }
    }

    /// Tail of the equilibrium (stationary-excess) distribution,
    /// `(1/mean) * int_t^inf P(S > u) du`.
    pub fn equilibrium_tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            ServiceModel::Exponential { rate } => (-rate * t).exp(),
            ServiceModel::HyperExponential { probs, rates } => {
                let mean = self.mean();
                probs
                    .iter()
                    .zip(rates)
                    .map(|(p, r)| p / r * (-r * t).exp())
                    .sum::<f64>()
                    / mean
            }
            ServiceModel::Deterministic { d } => (1.0 - t / d).max(0.0),
            ServiceModel::HeavyTail => 1.0 / (1.0 + t),
        }
    }

    /// Tail of the remaining service time of a request that has already
    /// been in service for `age` time units.
    pub fn remaining_tail(&self, age: f64, s: f64) -> f64 {
        let survived = self.tail(age);
        if survived <= 0.0 {
            0.0
        } else {
            self.tail(age + s) / survived
        }
    }

    /// Draws a service time by inverse transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match self {
            ServiceModel::Exponential { rate } => -(1.0 - u).ln() / rate,
            ServiceModel::HyperExponential { probs, rates } => {
                let mut acc = 0.0;
                let mut branch = rates.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        branch = k;
                        break;
                    }
                }
                let v: f64 = rng.gen();
                -(1.0 - v).ln() / rates[branch]
            }
            ServiceModel::Deterministic { d } => *d,
            ServiceModel::HeavyTail => (1.0 - u).powf(-0.5) - 1.0,
        }
    }

    fn check(&self) -> Option<&'static str> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            ServiceModel::Exponential { rate } if !pos(*rate) => Some("service rate nonpositive"),
            ServiceModel::HyperExponential { probs, rates } => {
                if probs.is_empty() || probs.len() != rates.len() {
                    Some("hyperexponential branch count mismatch")
                } else if rates.iter().any(|r| !pos(*r)) {
                    Some("service rate nonpositive")
                } else if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                    || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    Some("branch probabilities must be nonnegative and sum to 1")
                } else {
                    None
                }
            }
            ServiceModel::Deterministic { d } if !pos(*d) => Some("service duration nonpositive"),
            _ => None,
        }
    }
}

/// One Poisson arrival class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestClass {
    #[serde(rename = "lambda")]
    pub arrival_rate: f64,
    pub service: ServiceModel,
    pub reward: f64,
    /// Admissible capacity vectors, each of length `s`.
    pub allocations: Vec<Vec<f64>>,
}

impl RequestClass {
    /// Single-resource class with exponential service.
    pub fn simple(arrival_rate: f64, service_rate: f64, reward: f64, size: f64) -> Self {
        RequestClass {
            arrival_rate,
            service: ServiceModel::exponential(service_rate),
            reward,
            allocations: vec![vec![size]],
        }
    }

    pub fn offered_load(&self) -> f64 {
        self.arrival_rate * self.service.mean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Infinite entries are written as the string `"inf"`.
    #[serde(with = "capacity_serde")]
    pub capacity: Vec<f64>,
    pub classes: Vec<RequestClass>,
}

mod capacity_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| {
                if *x == f64::INFINITY {
                    Entry::Text("inf".into())
                } else {
                    Entry::Num(*x)
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| match e {
                Entry::Num(x) => Ok(x),
                Entry::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
                Entry::Text(t) => Err(D::Error::custom(format!("bad capacity entry {t:?}"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NoResources,
    NoClasses,
    BadCapacity,
    ArrivalRate,
    Service(&'static str),
    Reward,
    NoAllocations,
    AllocationDimension,
    AllocationNegative,
    AllocationZero,
    NoFittingAllocation,
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub class: Option<usize>,
    pub index: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.class {
            write!(f, "class {}", i + 1)?;
            if let Some(j) = self.index {
                write!(f, " allocation {}", j + 1)?;
            }
            write!(f, ": ")?;
        } else if let Some(k) = self.index {
            write!(f, "resource {}: ", k + 1)?;
        }
        let msg = match self.kind {
            ViolationKind::NoResources => "scenario has no resources",
            ViolationKind::NoClasses => "scenario has no classes",
            ViolationKind::BadCapacity => "capacity must be nonnegative",
            ViolationKind::ArrivalRate => "arrival rate nonpositive",
            ViolationKind::Service(m) => m,
            ViolationKind::Reward => "reward rate must be finite and nonnegative",
            ViolationKind::NoAllocations => "empty allocation set",
            ViolationKind::AllocationDimension => {
                "allocation dimension differs from resource count"
            }
            ViolationKind::AllocationNegative => "allocation has a negative or non-finite entry",
            ViolationKind::AllocationZero => "allocation has no positive entry",
            ViolationKind::NoFittingAllocation => "no fitting allocation",
        };
        f.write_str(msg)
    }
}

impl Scenario {
    /// Single-resource scenario from per-class vectors with exponential service.
    pub fn knapsack(
        capacity: f64,
        lambda: &[f64],
        mu: &[f64],
        reward: &[f64],
        size: &[f64],
    ) -> Scenario {
        let classes = (0..lambda.len())
            .map(|i| RequestClass::simple(lambda[i], mu[i], reward[i], size[i]))
            .collect();
        Scenario {
            capacity: vec![capacity],
            classes,
        }
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.ensure_valid()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn num_resources(&self) -> usize {
        self.capacity.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// True when `s = 1` and every class has exactly one allocation.
    pub fn is_single_resource(&self) -> bool {
        self.capacity.len() == 1 && self.classes.iter().all(|c| c.allocations.len() == 1)
    }

    /// Request sizes of a single-resource scenario.
    pub fn sizes(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.allocations[0][0]).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.service.rate()).collect()
    }

    pub fn mu_min(&self) -> f64 {
        self.rates().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn mu_max(&self) -> f64 {
        self.rates().into_iter().fold(0.0, f64::max)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.reward).collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_scenario(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }

    /// Same scenario with every capacity replaced by `+inf`.
    pub fn with_infinite_capacity(&self) -> Scenario {
        let mut sc = self.clone();
        sc.capacity.iter_mut().for_each(|c| *c = f64::INFINITY);
        sc
    }
}

/// Returns every violated invariant; an empty list means the scenario is valid.
pub fn validate_scenario(sc: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = sc.capacity.len();
    let push =
        |out: &mut Vec<Violation>, class, index, kind| out.push(Violation { class, index, kind });
    if s == 0 {
        push(&mut out, None, None, ViolationKind::NoResources);
    }
    if sc.classes.is_empty() {
        push(&mut out, None, None, ViolationKind::NoClasses);
    }
    for (k, &b) in sc.capacity.iter().enumerate() {
        if b.is_nan() || b < 0.0 {
            push(&mut out, None, Some(k), ViolationKind::BadCapacity);
        }
    }
    for (i, c) in sc.classes.iter().enumerate() {
        if !(c.arrival_rate.is_finite() && c.arrival_rate > 0.0) {
            push(&mut out, Some(i), None, ViolationKind::ArrivalRate);
        }
        if let Some(msg) = c.service.check() {
            push(&mut out, Some(i), None, ViolationKind::Service(msg));
        }
        if !(c.reward.is_finite() && c.reward >= 0.0) {
            push(&mut out, Some(i), None, ViolationKind::Reward);
        }
        if c.allocations.is_empty() {
            push(&mut out, Some(i), None, ViolationKind::NoAllocations);
            continue;
        }
        let mut any_fits = false;
        let mut shape_ok = true;
        for (j, a) in c.allocations.iter().enumerate() {
            if a.len() != s {
                push(
                    &mut out,
                    Some(i),
                    Some(j),
                    ViolationKind::AllocationDimension,
                );
                shape_ok = false;
                continue;
            }
            if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                push(
                    &mut out,
                    Some(i),
                    Some(j),
                    ViolationKind::AllocationNegative,
                );
                shape_ok = false;
                continue;
            }
            if a.iter().all(|x| *x == 0.0) {
                push(&mut out, Some(i), Some(j), ViolationKind::AllocationZero);
            }
            if a.iter().zip(&sc.capacity).all(|(x, b)| x <= b) {
                any_fits = true;
            }
        }
        if shape_ok && !any_fits {
            push(&mut out, Some(i), None, ViolationKind::NoFittingAllocation);
        }
    }
    out
}

/// Per-class offered load `rho_i = lambda_i * E[S_i]`.
pub fn offered_loads(sc: &Scenario) -> Vec<f64> {
    sc.classes.iter().map(RequestClass::offered_load).collect()
}

/// The `n`-th system of the many-small-requests scaling: arrival rates
/// multiplied by `n`, allocation vectors divided by `n`, capacities and
/// service unchanged; rewards divided by `n` when `rescale_reward` is set.
pub fn scale_scenario(sc: &Scenario, n: f64, rescale_reward: bool) -> Result<Scenario> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {n}"
        )));
    }
    let mut out = sc.clone();
    for c in &mut out.classes {
        c.arrival_rate *= n;
        for a in &mut c.allocations {
            a.iter_mut().for_each(|x| *x /= n);
        }
        if rescale_reward {
            c.reward /= n;
        }
    }
    Ok(out)
}

/// Admission fractions that make class `i` occupy `f_i * b` in steady state.
pub fn load_balancing_alphas(sc: &Scenario, fractions: &[f64]) -> Result<Vec<f64>> {
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    if fractions.len() != sc.num_classes() {
        return Err(Error::InvalidParameter(format!(
            "expected {} target fractions, got {}",
            sc.num_classes(),
            fractions.len()
        )));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::InvalidParameter(
            "target fractions must be nonnegative".into(),
        ));
    }
    if fractions.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(
            "target fractions sum to more than 1".into(),
        ));
    }
    let b = sc.capacity[0];
    let rho = offered_loads(sc);
    let sizes = sc.sizes();
    let mut alpha = Vec::with_capacity(fractions.len());
    for (i, f) in fractions.iter().enumerate() {
        let a = b * f / (sizes[i] * rho[i]);
        if a > 1.0 + 1e-12 {
            return Err(Error::InfeasibleTarget { class: i, alpha: a });
        }
        alpha.push(a.min(1.0));
    }
    Ok(alpha)
}
