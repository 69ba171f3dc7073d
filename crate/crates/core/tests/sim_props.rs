mod common;

use common::{knapsack, network};
use lossnet::policy::{build_network_penalty_config, build_penalty_config, BetaChoice, Policy};
use lossnet::sim::{simulate_ensemble, simulate_run, RunConfig, RunTrace, FIT_TOL};
use lossnet::{scale_scenario, scenarios, Scenario, ServiceModel};
use proptest::prelude::*;

fn policies(sc: &Scenario) -> Vec<Policy> {
    let mut out = vec![Policy::Greedy, Policy::thinning_for(sc).unwrap()];
    let penalty = if sc.is_single_resource() {
        build_penalty_config(sc, 0.2, BetaChoice::Max)
    } else {
        build_network_penalty_config(sc, 0.2, BetaChoice::Max)
    };
    if let Ok(cfg) = penalty {
        out.push(Policy::Penalty(cfg));
    }
    out
}

fn check_trace(sc: &Scenario, tr: &RunTrace) -> Result<(), TestCaseError> {
    for occ in &tr.occupied {
        for (o, c) in occ.iter().zip(&sc.capacity) {
            prop_assert!(*o <= c + FIT_TOL, "occupancy {o} over capacity {c}");
        }
    }
    let last = tr.times.len() - 1;
    for i in 0..sc.num_classes() {
        prop_assert_eq!(
            tr.arrivals[i],
            tr.accepted[i] + tr.xi[last][i] + tr.eta[last][i] + tr.thinned[last][i]
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn knapsack_runs_stay_feasible(sc in knapsack(4), n in 1.0f64..30.0, seed in any::<u64>()) {
        let sc = scale_scenario(&sc, n, true).unwrap();
        let cfg = RunConfig::linspace(seed, 5.0 / sc.mu_min(), 60);
        for pol in policies(&sc) {
            let tr = simulate_run(&sc, &pol, &cfg, 0).unwrap();
            check_trace(&sc, &tr)?;
        }
    }

    #[test]
    fn network_runs_stay_feasible(sc in network(), n in 1.0f64..30.0, seed in any::<u64>()) {
        let sc = scale_scenario(&sc, n, true).unwrap();
        let cfg = RunConfig::linspace(seed, 5.0 / sc.mu_min(), 60);
        for pol in policies(&sc) {
            let tr = simulate_run(&sc, &pol, &cfg, 0).unwrap();
            check_trace(&sc, &tr)?;
        }
    }
}

#[test]
fn builtin_scenarios_stay_feasible() {
    for name in scenarios::NAMES {
        let sc = scale_scenario(&scenarios::by_name(name).unwrap(), 10.0, true).unwrap();
        let cfg = RunConfig::linspace(17, 10.0 / sc.mu_min(), 100);
        for pol in policies(&sc) {
            for rep in 0..3 {
                let tr = simulate_run(&sc, &pol, &cfg, rep).unwrap();
                check_trace(&sc, &tr).unwrap();
            }
        }
    }
}

#[test]
fn fictitious_load_decays_without_arrivals() {
    let base = scale_scenario(&scenarios::eq52(), 10.0, true).unwrap();
    let cfg = build_penalty_config(&base, 0.2, BetaChoice::Max).unwrap();
    assert!(cfg.y0.iter().any(|v| *v > 0));
    let mut quiet = base.clone();
    for c in &mut quiet.classes {
        c.arrival_rate = 1e-12;
    }
    let run = RunConfig::linspace(4, 30.0, 300);
    let tr = simulate_run(&quiet, &Policy::Penalty(cfg.clone()), &run, 0).unwrap();
    assert_eq!(tr.y[0], cfg.y0);
    for w in tr.y.windows(2) {
        for i in 0..3 {
            assert!(w[1][i] <= w[0][i]);
        }
    }
    assert!(tr.y.last().unwrap().iter().all(|v| *v == 0));
}

#[test]
fn infinite_server_mean_small() {
    let sc = Scenario {
        capacity: vec![f64::INFINITY],
        classes: vec![
            lossnet::RequestClass::simple(20.0, 1.0, 1.0, 1.0),
            lossnet::RequestClass {
                service: ServiceModel::HyperExponential {
                    probs: vec![0.3, 0.7],
                    rates: vec![0.5, 3.0],
                },
                ..lossnet::RequestClass::simple(10.0, 1.0, 1.0, 1.0)
            },
        ],
    };
    let cfg = RunConfig::linspace(8, 6.0, 25);
    let ens = simulate_ensemble(&sc, &Policy::Greedy, 60, &cfg).unwrap();
    let ser = ens.series(&sc);
    for (t, row) in ser.times.iter().zip(&ser.x) {
        for (i, c) in sc.classes.iter().enumerate() {
            let target = c.offered_load() * (1.0 - c.service.equilibrium_tail(*t));
            let e = row[i];
            assert!(
                (e.mean - target).abs() <= 4.0 * e.se + 1e-12,
                "t {t} class {i}: {} vs {target} (se {})",
                e.mean,
                e.se
            );
        }
    }
}
