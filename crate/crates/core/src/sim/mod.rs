//! Discrete-event simulation of the loss network together with the
//! fictitious infinite-capacity system that holds rejected requests.

mod engine;
mod ensemble;
mod rng;

pub use engine::{simulate_run, RunConfig, RunTrace};
pub(crate) use ensemble::fmt_num;
pub use ensemble::{
    pairwise_sum, scale_sweep, simulate_coupled, simulate_ensemble, trace_csv, Ensemble, Estimate,
    TraceSeries,
};
pub use rng::{stream, StreamRole};

use crate::model::Scenario;

/// Absolute slack allowed when checking that an allocation fits.
pub const FIT_TOL: f64 = 1e-9;

/// Instantaneous state of the accepted and fictitious systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// `x[i][j]`: class `i` requests in service on allocation `j`.
    pub x: Vec<Vec<u64>>,
    /// Class `i` requests in the fictitious system.
    pub y: Vec<u64>,
    /// Capacity in use per resource.
    pub occupied: Vec<f64>,
    /// Cumulative rejections by the penalty rule.
    pub xi: Vec<u64>,
    /// Cumulative rejections for lack of capacity.
    pub eta: Vec<u64>,
    /// Cumulative rejections by a thinning draw.
    pub thinned: Vec<u64>,
    pub clock: f64,
}

impl SimState {
    pub fn new(sc: &Scenario) -> Self {
        let m = sc.num_classes();
        SimState {
            x: sc
                .classes
                .iter()
                .map(|c| vec![0; c.allocations.len()])
                .collect(),
            y: vec![0; m],
            occupied: vec![0.0; sc.num_resources()],
            xi: vec![0; m],
            eta: vec![0; m],
            thinned: vec![0; m],
            clock: 0.0,
        }
    }

    /// Rebuilds `occupied` from the counts.
    pub fn recompute(&mut self, sc: &Scenario) {
        self.occupied.iter_mut().for_each(|o| *o = 0.0);
        for (i, c) in sc.classes.iter().enumerate() {
            for (j, a) in c.allocations.iter().enumerate() {
                let n = self.x[i][j];
                if n > 0 {
                    for (o, b) in self.occupied.iter_mut().zip(a) {
                        *o += n as f64 * b;
                    }
                }
            }
        }
    }

    /// Whether one more class `i` request on allocation `j` fits.
    pub fn fits(&self, sc: &Scenario, class: usize, alloc: usize) -> bool {
        let a = &sc.classes[class].allocations[alloc];
        self.occupied
            .iter()
            .zip(a)
            .zip(&sc.capacity)
            .all(|((o, b), cap)| *b == 0.0 || o + b <= cap + FIT_TOL)
    }

    /// Instantaneous reward rate `sum_i r_i sum_j x_ij`.
    pub fn reward(&self, sc: &Scenario) -> f64 {
        sc.classes
            .iter()
            .zip(&self.x)
            .map(|(c, x)| c.reward * x.iter().sum::<u64>() as f64)
            .sum()
    }

    pub fn class_count(&self, class: usize) -> u64 {
        self.x[class].iter().sum()
    }
}
