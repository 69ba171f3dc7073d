//! Built-in scenarios.
//!
//! `s4` and `s5` carry no reward rates of their own; both classes earn 1.

use crate::model::Scenario;

/// Three-class knapsack with capacity 100.
pub fn eq52() -> Scenario {
    Scenario::knapsack(
        100.0,
        &[40.0, 80.0, 60.0],
        &[0.5, 2.0, 0.3],
        &[1.0, 0.25, 0.75],
        &[0.1, 0.15, 0.55],
    )
}

pub fn s1() -> Scenario {
    Scenario::knapsack(
        1.0,
        &[4.0, 8.0, 6.0],
        &[0.5, 2.0, 0.3],
        &[1.0, 0.25, 0.75],
        &[0.1, 0.015, 0.055],
    )
}

pub fn s2() -> Scenario {
    Scenario::knapsack(
        1.0,
        &[4.0, 8.0, 6.0],
        &[1.0, 2.0, 0.3],
        &[1.0, 0.25, 0.75],
        &[0.01, 0.015, 0.055],
    )
}

pub fn s3() -> Scenario {
    Scenario::knapsack(
        1.0,
        &[4.0, 8.0, 6.0, 4.0],
        &[0.5, 2.0, 0.3, 0.2],
        &[1.0, 0.25, 0.75, 0.67],
        &[0.02, 0.015, 0.055, 0.045],
    )
}

/// Load balancing with equal service rates.
pub fn s4() -> Scenario {
    Scenario::knapsack(
        100.0,
        &[1000.0, 1000.0],
        &[10.0, 10.0],
        &[1.0, 1.0],
        &[1.0, 1.0],
    )
}

/// Load balancing with service rates an order of magnitude apart.
pub fn s5() -> Scenario {
    Scenario::knapsack(
        190.0,
        &[100.0, 100.0],
        &[0.1, 1.0],
        &[1.0, 1.0],
        &[1.0, 1.0],
    )
}

/// Target admission fractions that accompany the load-balancing scenarios.
pub const LOAD_BALANCING_ALPHA: [f64; 2] = [0.1, 0.9];

pub const NAMES: [&str; 6] = ["eq52", "s1", "s2", "s3", "s4", "s5"];

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "eq52" => Some(eq52()),
        "s1" => Some(s1()),
        "s2" => Some(s2()),
        "s3" => Some(s3()),
        "s4" => Some(s4()),
        "s5" => Some(s5()),
        _ => None,
    }
}
