use crate::error::{Error, Result};
use crate::model::Scenario;

use super::{check_inputs, horizon_caps, LpSolution};

/// Fractional knapsack: fills capacity `b / shrink` in nonincreasing reward
/// density `r_i / b_i` (lower index first on ties), each class capped at
/// `1 - exp(-mu_i horizon)`.
///
/// The resource price is the density of the class left fractionally
/// accepted, or of the last full class when capacity runs out exactly on a
/// class boundary, or zero when capacity never binds.
pub fn solve_knapsack(sc: &Scenario, horizon: f64, shrink: f64) -> Result<LpSolution> {
    if !sc.is_single_resource() {
        return Err(Error::NotSingleResource);
    }
    check_inputs(horizon, shrink)?;
    let caps = horizon_caps(sc, horizon);
    let m = sc.num_classes();
    let size = sc.sizes();
    let rho: Vec<f64> = sc.classes.iter().map(|c| c.offered_load()).collect();
    let r = sc.rewards();
    let budget = sc.capacity[0] / shrink;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        (r[b] / size[b])
            .total_cmp(&(r[a] / size[a]))
            .then(a.cmp(&b))
    });

    let mut alpha = vec![0.0; m];
    let mut remaining = budget;
    let mut price = 0.0;
    let exhausted = |rem: f64| rem <= 1e-12 * budget.max(1.0);
    for &i in &order {
        let need = size[i] * rho[i] * caps[i];
        if need <= remaining {
            alpha[i] = caps[i];
            remaining -= need;
            if exhausted(remaining) && need > 0.0 {
                price = r[i] / size[i];
                break;
            }
        } else {
            alpha[i] = remaining / (size[i] * rho[i]);
            price = r[i] / size[i];
            break;
        }
    }
    let value = (0..m).map(|i| r[i] * rho[i] * alpha[i]).sum();
    let dual_v = (0..m)
        .map(|i| (rho[i] * (r[i] - size[i] * price)).max(0.0))
        .collect();
    Ok(LpSolution::new(
        alpha.into_iter().map(|a| vec![a]).collect(),
        value,
        vec![price],
        dual_v,
        caps,
        shrink,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use approx::assert_relative_eq;

    #[test]
    fn eq52_steady() {
        let lp = solve_knapsack(&scenarios::eq52(), f64::INFINITY, 1.0).unwrap();
        let a = lp.class_alpha();
        assert_eq!(a[0], 1.0);
        assert_eq!(a[1], 1.0);
        assert_relative_eq!(a[2], 86.0 / 110.0, max_relative = 1e-12);
        assert!((a[2] - 0.7818).abs() < 5e-5);
        assert!((lp.value - 207.2727).abs() < 1e-3);
        assert_eq!(lp.saturated, vec![0, 1]);
    }

    #[test]
    fn eq52_dual() {
        let sc = scenarios::eq52();
        let lp = solve_knapsack(&sc, f64::INFINITY, 1.0).unwrap();
        let u = 0.75 / 0.55;
        assert_relative_eq!(lp.dual_u[0], u, max_relative = 1e-12);
        assert_relative_eq!(lp.dual_v[0], 80.0 * (1.0 - 0.1 * u), max_relative = 1e-12);
        assert_relative_eq!(lp.dual_v[1], 40.0 * (0.25 - 0.15 * u), max_relative = 1e-12);
        assert!((lp.dual_v[0] - 69.0909).abs() < 1e-4);
        assert!((lp.dual_v[1] - 1.8182).abs() < 1e-4);
        assert_eq!(lp.dual_v[2], 0.0);
        assert_relative_eq!(lp.dual_value(&sc), lp.value, max_relative = 1e-12);
        assert!(lp.dual_infeasibility(&sc) <= 1e-9);
    }

    #[test]
    fn nonbinding_capacity() {
        let sc = Scenario::knapsack(1e3, &[1.0, 2.0], &[1.0, 1.0], &[3.0, 1.0], &[1.0, 2.0]);
        let lp = solve_knapsack(&sc, f64::INFINITY, 1.0).unwrap();
        assert_eq!(lp.class_alpha(), vec![1.0, 1.0]);
        assert_eq!(lp.dual_u[0], 0.0);
        assert_eq!(lp.dual_v, vec![3.0, 2.0]);
    }

    #[test]
    fn eq52_perturbed() {
        let lp = solve_knapsack(&scenarios::eq52(), f64::INFINITY, 2.0).unwrap();
        let a = lp.class_alpha();
        assert_eq!(&a[..2], &[1.0, 1.0]);
        assert_relative_eq!(a[2], 36.0 / 110.0, max_relative = 1e-12);
    }

    #[test]
    fn exact_boundary_uses_last_full_class() {
        let sc = Scenario::knapsack(8.0, &[8.0, 8.0], &[1.0, 1.0], &[2.0, 1.0], &[1.0, 1.0]);
        let lp = solve_knapsack(&sc, f64::INFINITY, 1.0).unwrap();
        assert_eq!(lp.class_alpha(), vec![1.0, 0.0]);
        assert_eq!(lp.dual_u[0], 2.0);
        assert_relative_eq!(lp.dual_value(&sc), lp.value);
    }

    #[test]
    fn rejects_network() {
        let mut sc = scenarios::eq52();
        sc.classes[0].allocations.push(vec![0.2]);
        assert!(matches!(
            solve_knapsack(&sc, f64::INFINITY, 1.0),
            Err(Error::NotSingleResource)
        ));
    }
}
