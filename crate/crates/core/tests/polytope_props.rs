use lossnet::polytope::{gamma_star, interior_margin, lift, Polytope};
use proptest::prelude::*;

fn polytope_and_rho() -> impl Strategy<Value = (Polytope, Vec<f64>)> {
    (2usize..=3, 1usize..=4)
        .prop_flat_map(|(m, rows)| {
            (
                prop::collection::vec(prop::collection::vec(-2.0f64..2.0, m), rows),
                prop::collection::vec(0.0f64..20.0, rows),
                prop::collection::vec(1.0f64..20.0, m),
            )
        })
        .prop_map(|(d, h, rho)| (Polytope::new(d, h).unwrap(), rho))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn interior_implies_gamma_below_one((p, rho) in polytope_and_rho()) {
        let margin = interior_margin(&p, &rho).unwrap();
        prop_assume!(margin > 1e-6);
        let g = gamma_star(&p, &rho).unwrap();
        prop_assert!(g.gamma < 1.0, "gamma {}", g.gamma);
        prop_assert!(g.gamma >= 0.0);
        prop_assert!(g.gamma_lifted.abs() < 1e-12);
        for (x, r) in g.x.iter().zip(&rho) {
            prop_assert!(*x >= 0.0 && *x <= r + 1e-9);
        }
    }

    #[test]
    fn gamma_invariant_under_row_scaling(
        (p, rho) in polytope_and_rho(),
        scales in prop::collection::vec(0.1f64..10.0, 4),
    ) {
        prop_assume!(interior_margin(&p, &rho).unwrap() > 1e-6);
        let q = Polytope::new(
            p.d.iter().zip(&scales).map(|(r, s)| r.iter().map(|v| v * s).collect()).collect(),
            p.h.iter().zip(&scales).map(|(h, s)| h * s).collect(),
        ).unwrap();
        let a = gamma_star(&p, &rho).unwrap().gamma;
        let b = gamma_star(&q, &rho).unwrap().gamma;
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn lift_substitution(
        (p, rho) in polytope_and_rho(),
        frac in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let l = lift(&p, &rho).unwrap();
        let x: Vec<f64> = rho.iter().zip(&frac).map(|(r, f)| r * f).collect();
        let y: Vec<f64> = rho.iter().zip(&x).map(|(r, v)| r - v).collect();
        for j in 0..p.rows() {
            let dx: f64 = p.d[j].iter().zip(&x).map(|(a, b)| a * b).sum();
            let lifted: f64 = l.d_plus[j].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                + l.d_minus[j].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            // d+ x + d- (rho - x) - (h + d- rho) = d x - h
            prop_assert!(((lifted - l.rhs[j]) - (dx - p.h[j])).abs() <= 1e-9 * (1.0 + l.rhs[j].abs()));
        }
        let inside = (0..p.rows()).all(|j| {
            p.d[j].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= p.h[j] + 1e-9
        });
        prop_assert_eq!(inside, l.contains(&x, &y, 1e-9));
    }
}
