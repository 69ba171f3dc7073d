#![allow(dead_code)]

use lossnet::{RequestClass, Scenario, ServiceModel};
use proptest::prelude::*;

/// Random knapsack with `1..=max_classes` classes.
pub fn knapsack(max_classes: usize) -> impl Strategy<Value = Scenario> {
    (1..=max_classes)
        .prop_flat_map(|m| {
            (
                2.0f64..50.0,
                prop::collection::vec((0.1f64..50.0, 0.2f64..5.0, 0.1f64..5.0, 0.05f64..2.0), m),
            )
        })
        .prop_map(|(cap, cls)| Scenario {
            capacity: vec![cap],
            classes: cls
                .into_iter()
                .map(|(l, mu, r, b)| RequestClass::simple(l, mu, r, b))
                .collect(),
        })
}

/// Random two-resource network where every class has one or two routes.
pub fn network() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(1.0f64..20.0, 2),
        prop::collection::vec(
            (
                0.5f64..10.0,
                0.5f64..3.0,
                0.1f64..3.0,
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..=2),
            ),
            1..=4,
        ),
    )
        .prop_map(|(capacity, cls)| Scenario {
            capacity,
            classes: cls
                .into_iter()
                .map(|(l, mu, r, allocs)| RequestClass {
                    arrival_rate: l,
                    service: ServiceModel::exponential(mu),
                    reward: r,
                    allocations: allocs
                        .into_iter()
                        .map(|a| a.into_iter().map(|v| 0.05 + v).collect())
                        .collect(),
                })
                .collect(),
        })
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
