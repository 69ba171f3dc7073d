use crate::error::Result;
use crate::model::Scenario;

use super::{check_inputs, horizon_caps, solve_simplex, LpSolution};

/// Network LP over `alpha_ij`: resource rows `sum rho_i b_ij(k) alpha_ij <= b_k / shrink`
/// and class rows `sum_j alpha_ij <= 1 - Ge_i(horizon)`.
pub fn solve_network_lp(sc: &Scenario, horizon: f64, shrink: f64) -> Result<LpSolution> {
    sc.ensure_valid()?;
    check_inputs(horizon, shrink)?;
    let caps = horizon_caps(sc, horizon);
    let s = sc.num_resources();
    let m = sc.num_classes();

    let mut index = Vec::with_capacity(m);
    let mut c = Vec::new();
    for cl in &sc.classes {
        let start = c.len();
        for _ in &cl.allocations {
            c.push(cl.reward * cl.offered_load());
        }
        index.push(start..c.len());
    }
    let n = c.len();

    let finite: Vec<usize> = (0..s).filter(|&k| sc.capacity[k].is_finite()).collect();
    let mut a = Vec::with_capacity(finite.len() + m);
    let mut d = Vec::with_capacity(finite.len() + m);
    for &k in &finite {
        let mut row = vec![0.0; n];
        for (i, cl) in sc.classes.iter().enumerate() {
            let rho = cl.offered_load();
            for (j, alloc) in cl.allocations.iter().enumerate() {
                row[index[i].start + j] = rho * alloc[k];
            }
        }
        a.push(row);
        d.push(sc.capacity[k] / shrink);
    }
    for i in 0..m {
        let mut row = vec![0.0; n];
        for v in index[i].clone() {
            row[v] = 1.0;
        }
        a.push(row);
        d.push(caps[i]);
    }

    let sol = solve_simplex(&c, &a, &d, &vec![f64::INFINITY; n])?;
    let mut dual_u = vec![0.0; s];
    for (r, &k) in finite.iter().enumerate() {
        dual_u[k] = sol.row_duals[r];
    }
    let dual_v = sol.row_duals[finite.len()..].to_vec();
    let alpha = index.iter().map(|rg| sol.x[rg.clone()].to_vec()).collect();
    Ok(LpSolution::new(
        alpha, sol.value, dual_u, dual_v, caps, shrink,
    ))
}
