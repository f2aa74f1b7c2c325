use proptest::collection::vec;
use proptest::prelude::*;

use r2ch::config::{parse_config, Resolution, RunConfig, Stepping};
use r2ch::experiments::InitCondition;
use r2ch::grid::{self, GridFn, GridSpec};
use r2ch::invariants;
use r2ch::scheme::{PhysParams, State};
use r2ch::selftest::{bilinear_defect, embedding_slack, sbp_defects, temporal_defect};

fn grid_and_values(count: usize) -> impl Strategy<Value = (GridSpec, Vec<Vec<f64>>)> {
    (4usize..200, 0.5f64..80.0, -40.0f64..40.0).prop_flat_map(move |(m, length, x_left)| {
        let spec = GridSpec::new(x_left, length, m).unwrap();
        (Just(spec), vec(vec(-5.0f64..5.0, m), count))
    })
}

fn f(spec: GridSpec, v: &[f64]) -> GridFn {
    GridFn::new(spec, v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn summation_by_parts((spec, vals) in grid_and_values(2)) {
        for d in sbp_defects(&f(spec, &vals[0]), &f(spec, &vals[1])) {
            prop_assert!(d <= 1e-12, "defect {}", d);
        }
    }

    #[test]
    fn psi_is_bilinear((spec, vals) in grid_and_values(3), a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let d = bilinear_defect(&f(spec, &vals[0]), &f(spec, &vals[1]), &f(spec, &vals[2]), a, b);
        prop_assert!(d <= 1e-13, "defect {}", d);
    }

    #[test]
    fn embedding_inequality((spec, vals) in grid_and_values(1), eps in 0.01f64..100.0) {
        prop_assert!(embedding_slack(&f(spec, &vals[0]), eps) >= 0.0);
    }

    #[test]
    fn two_level_product((spec, vals) in grid_and_values(4), tau in 1e-4f64..2.0) {
        let g: Vec<GridFn> = vals.iter().map(|v| f(spec, v)).collect();
        let d = temporal_defect(&g[0], &g[1], &g[2], &g[3], tau);
        prop_assert!(d <= 1e-12, "defect {}", d);
    }

    #[test]
    fn shifted_invariants_differ_by_mass(
        (spec, vals) in grid_and_values(2),
        kappa in 0.0f64..2.0,
        omega in 0.0f64..0.24,
        mu in 0.0f64..2.0,
    ) {
        let p = PhysParams::new(kappa, 1.0, mu, omega);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let s = State::new(f(spec, &vals[0]), f(spec, &vals[1]), 0.0).unwrap();
        let e = invariants::energy(&s, &p);
        let h = invariants::momentum(&s, &p);
        let i = invariants::mass(&s);
        let hm = spec.h() * spec.nodes() as f64;
        let c = p.coupling();
        let scale_e = e.raw.abs() + e.shifted.abs() + c * (0.5 * hm + i.abs());
        prop_assert!((e.shifted - e.raw - c * (0.5 * hm - i)).abs() <= 1e-12 * scale_e);
        let scale_h = h.raw.abs() + h.shifted.abs() + omega * (hm + 2.0 * i.abs());
        prop_assert!((h.shifted - h.raw - omega * (hm - 2.0 * i)).abs() <= 1e-12 * scale_h.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn inner_product_is_symmetric_and_positive((spec, vals) in grid_and_values(2)) {
        let (u, v) = (f(spec, &vals[0]), f(spec, &vals[1]));
        prop_assert_eq!(grid::inner(&u, &v).unwrap(), grid::inner(&v, &u).unwrap());
        prop_assert!(grid::inner(&u, &u).unwrap() >= 0.0);
        prop_assert!(grid::inner_h1(&u, &u).unwrap() >= 0.0);
    }
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let init = prop_oneof![
        (-3.0f64..3.0).prop_map(|a| InitCondition::DamBreak { a }),
        Just(InitCondition::PeakonAntipeakon),
        Just(InitCondition::Zero),
    ];
    let res = prop_oneof![
        (4usize..5000).prop_map(Resolution::Nodes),
        (1e-3f64..0.5).prop_map(Resolution::Spacing),
    ];
    (
        init,
        -50.0f64..0.0,
        10.0f64..100.0,
        res,
        1.0f64..50.0,
        (0.0f64..2.0, 0.1f64..3.0, 0.0f64..2.0, 0.0f64..0.2),
        (1e-14f64..1e-8, 1usize..500),
        vec(0.0f64..1.0, 0..5),
        any::<bool>(),
        prop::bool::ANY,
        1usize..1000,
    )
        .prop_map(|(init, x_left, length, resolution, t_final, (kappa, sigma, mu, omega), (tol, max_iter), fr, emit, by_steps, steps)| {
            // keep 1 - 2 omega kappa positive
            let omega = if 2.0 * omega * kappa >= 1.0 { 0.0 } else { omega };
            RunConfig {
                case: "custom".into(),
                init,
                x_left,
                length,
                resolution,
                stepping: if by_steps {
                    Stepping::Steps(steps)
                } else {
                    Stepping::Step(t_final / steps as f64)
                },
                t_final,
                kappa,
                sigma,
                mu,
                omega,
                tol,
                max_iter,
                snapshot_times: fr.iter().map(|x| x * t_final).collect(),
                out_dir: "runs/out".into(),
                emit_fields: emit,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn config_round_trip(cfg in arb_config()) {
        prop_assume!(cfg.grid().is_ok() && cfg.time_grid().is_ok());
        let back = parse_config(&cfg.emit());
        prop_assert_eq!(back, Ok(cfg));
    }
}
