//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use r2ch::experiments::{preset, run_convergence_study, symmetry_probe, unconditional_probe, Axis, ConvergenceRow};
use r2ch::grid::GridSpec;
use r2ch::invariants::{self, max_drift};
use r2ch::linalg::CyclicBandSystem;
use r2ch::scheme::{newton_step, picard_step, simulate, SolverCfg, State, TimeGrid, TrajectoryOptions};
use r2ch::selftest;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn c1_operator_identities() -> Outcome {
    let checks = selftest::operator_suite(1, 1000, &[8, 64, 1024]);
    let worst = checks.iter().map(|c| c.max_defect).fold(0.0, f64::max);
    outcome(
        checks.iter().all(|c| c.passed()),
        format!("{} identity/size pairs, 1000 pairs each, worst relative defect {worst:.2e} (tol 1e-12)", checks.len()),
    )
}

fn c2_temporal_identity() -> Outcome {
    let c = selftest::temporal_suite(2, 1000, 64);
    outcome(c.passed(), format!("1000 pairs, worst relative defect {:.2e} (tol 1e-12)", c.max_defect))
}

fn c3_initial_invariants() -> Outcome {
    // (case, h, E0, H0, I0)
    let table: [(&str, f64, f64, f64, Option<f64>); 3] = [
        ("exA51", 0.2, 6.426590811396586, 0.0, Some(12.39999498602724)),
        ("exC51", 0.1, 8.905545767953516, 0.001300209682121, Some(16.79999981448777)),
        // the listed Case D values are those of the h = 1/10 grid
        ("exD51", 0.1, 14.14719145331662, 0.002065791557752, None),
    ];
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, h, e0, h0, i0) in table {
        let c = preset(name).unwrap();
        let s = c.initial_state(c.grid(h).unwrap());
        let p = c.params();
        let e = invariants::energy(&s, &p).raw;
        let m = invariants::momentum(&s, &p).raw;
        worst = worst.max(rel_err(e, e0)).max(rel_err(m, h0));
        if let Some(i0) = i0 {
            worst = worst.max(rel_err(invariants::mass(&s), i0));
        }
    }
    let d = preset("exD51").unwrap();
    let coarse = d.initial_state(d.grid(0.2).unwrap());
    notes.push(format!(
        "Case D on h = 1/5 would give E0 rel. error {:.1e}",
        rel_err(invariants::energy(&coarse, &d.params()).raw, 14.14719145331662)
    ));
    outcome(
        worst <= 1e-12,
        format!("worst relative error {worst:.2e} (tol 1e-12); {}", notes.join("; ")),
    )
}

fn drift_run(name: &str, h: f64, tau: f64, horizon: f64) -> (Vec<invariants::InvariantSample>, usize) {
    let c = preset(name).unwrap();
    let s = c.initial_state(c.grid(h).unwrap());
    let tg = TimeGrid::with_step(horizon, tau).unwrap();
    let traj = simulate(&s, &c.params(), &tg, &SolverCfg::default(), &TrajectoryOptions::default()).unwrap();
    (traj.invariants, traj.warnings.len())
}

fn c4_conservation() -> Outcome {
    let (a, a_warn) = drift_run("exA51", 0.2, 1.0 / 256.0, 10.0);
    let (da_e, da_h, da_i) = max_drift(&a);
    let max_h_a = a.iter().map(|s| s.momentum.abs()).fold(0.0, f64::max);
    let (d, _) = drift_run("exD51", 0.1, 1.0 / 256.0, 10.0);
    let (dd_e, dd_h, dd_i) = max_drift(&d);
    let (b, _) = drift_run("exB51", 0.2, 1.0 / 256.0, 10.0);
    let (db_e, _, _) = max_drift(&b);
    let db_rel = db_e / b[0].energy;
    let ok_a = da_e.max(da_h).max(da_i).max(max_h_a) <= 1e-10 && a_warn == 0;
    let ok_d = dd_e.max(dd_h).max(dd_i) <= 1e-9;
    let ok_b = db_rel <= 5e-4;
    outcome(
        ok_a && ok_d && ok_b,
        format!(
            "A: dE {da_e:.1e} dH {da_h:.1e} dI {da_i:.1e} (tol 1e-10, {a_warn} uniqueness warnings); \
             D: dE {dd_e:.1e} dH {dd_h:.1e} dI {dd_i:.1e} (tol 1e-9); B: rel dE {db_rel:.1e} (tol 5e-4)"
        ),
    )
}

/// Compare a study against reference errors (5 % relative) and orders (0.1).
fn check_rows(rows: &[ConvergenceRow], errs: &[f64], ords: &[f64]) -> (bool, f64, f64) {
    let mut worst_e: f64 = 0.0;
    let mut worst_o: f64 = 0.0;
    for (r, e) in rows.iter().zip(errs) {
        worst_e = worst_e.max(rel_err(r.err_u_inf, *e));
    }
    for (r, o) in rows.iter().skip(1).zip(ords) {
        worst_o = worst_o.max(r.ord_u.map_or(f64::INFINITY, |v| (v - o).abs()));
    }
    (rows.len() == errs.len() && worst_e <= 0.05 && worst_o <= 0.1, worst_e, worst_o)
}

fn study(name: &str, axis: Axis, h: f64, tau: f64, horizon: f64) -> Vec<ConvergenceRow> {
    let c = preset(name).unwrap();
    run_convergence_study(
        &c.setup(),
        axis,
        5,
        c.grid(h).unwrap(),
        TimeGrid::with_step(horizon, tau).unwrap(),
        &SolverCfg::default(),
    )
    .unwrap()
}

fn c5_spatial_convergence() -> Outcome {
    let a = study("exA51", Axis::Space, 0.6, 1.0 / 50.0, 20.0);
    let (ok_a, ea, oa) = check_rows(
        &a,
        &[3.1656e-02, 8.0761e-03, 2.2533e-03, 5.7025e-04, 1.4320e-04],
        &[1.9707, 1.8416, 1.9824, 1.9936],
    );
    let d = study("exD51", Axis::Space, 0.4, 1.0 / 1000.0, 1.0);
    let (ok_d, ed, od) = check_rows(
        &d,
        &[1.6694e-02, 4.9151e-03, 1.3122e-03, 3.3245e-04, 8.3398e-05],
        &[1.7640, 1.9053, 1.9808, 1.9951],
    );
    outcome(
        ok_a && ok_d,
        format!("A: worst err rel. dev. {ea:.1e}, order dev. {oa:.1e}; D: {ed:.1e}, {od:.1e} (tol 5e-2, 0.1)"),
    )
}

fn c6_temporal_convergence() -> Outcome {
    let a = study("exA51", Axis::Time, 6.0 / 25.0, 0.25, 20.0);
    let (ok, e, o) = check_rows(
        &a,
        &[1.2391e-03, 3.1403e-04, 7.8767e-05, 1.9708e-05, 4.9280e-06],
        &[1.9803, 1.9952, 1.9988, 1.9997],
    );
    outcome(ok, format!("A: worst err rel. dev. {e:.1e}, order dev. {o:.1e} (tol 5e-2, 0.1)"))
}

fn c7_picard_newton() -> Outcome {
    let cfg = SolverCfg::default();
    let mut worst: f64 = 0.0;
    for (name, m) in [("exA51", 60), ("exB51", 128), ("exC51", 128), ("exD51", 128)] {
        let c = preset(name).unwrap();
        let g = GridSpec::new(c.x_left, c.length, m).unwrap();
        let p = c.params();
        let tau = c.default_tau;
        let mut sp: State = c.initial_state(g);
        let mut sn = sp.clone();
        for _ in 0..10 {
            // one step from the shared state, then the trajectories separately
            let a = picard_step(&sp, &p, tau, &cfg).unwrap().next;
            let b = newton_step(&sp, &p, tau, &cfg).unwrap().next;
            worst = worst.max(a.max_diff(&b).unwrap());
            sn = newton_step(&sn, &p, tau, &cfg).unwrap().next;
            sp = a;
        }
        worst = worst.max(sp.max_diff(&sn).unwrap());
    }
    outcome(worst <= 1e-10, format!("max disagreement {worst:.2e} (tol 1e-10)"))
}

fn c8_cyclic_solver() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst_res: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(8..=512);
        let (lo, up) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let mut sys = CyclicBandSystem::new(n, lo, up);
        for r in 0..n {
            let mut off_sum = 0.0;
            for k in -(lo as isize)..=(up as isize) {
                if k != 0 {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off_sum += v.abs();
                    sys.add(r, k, v);
                }
            }
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sys.add(r, 0, sign * (0.5 + off_sum * rng.gen_range(0.6..1.5)));
        }
        sys.set_rhs((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let x = sys.solve().unwrap();
        let y = sys.solve_dense().unwrap();
        worst_res = worst_res.max(sys.relative_residual(&x));
        let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let diff = x.iter().zip(&y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst_diff = worst_diff.max(diff / scale);
    }
    outcome(
        worst_res <= 1e-13 && worst_diff <= 1e-12,
        format!("residual {worst_res:.2e} (tol 1e-13), dense agreement {worst_diff:.2e} (tol 1e-12)"),
    )
}

fn c9_unconditional() -> Outcome {
    let c = preset("exA51").unwrap();
    let tg = TimeGrid::with_step(c.horizon, 5.0 / 64.0).unwrap();
    let probe = unconditional_probe(&c.setup(), c.grid(0.6).unwrap(), tg, 4, 8, &SolverCfg::default()).unwrap();
    let (fu, fr) = {
        let last = probe.errors.last().unwrap();
        (last.1, last.2)
    };
    let (pu, pr) = probe.plateau;
    let flat = probe.non_increasing(0.1);
    let ok = flat && fu <= 2.0 * pu && fr <= 2.0 * pr;
    let seq: Vec<String> = probe.errors.iter().map(|e| format!("{:.2e}", e.1)).collect();
    outcome(
        ok,
        format!(
            "err_u over h: [{}], plateau {pu:.2e}; finest/plateau u {:.2}, rho {:.2} (tol 2)",
            seq.join(", "),
            fu / pu,
            fr / pr
        ),
    )
}

fn peakon_defect(name: &str) -> f64 {
    let c = preset(name).unwrap();
    let s = c.initial_state(c.grid(0.1).unwrap());
    let tg = TimeGrid::with_step(8.0, 0.01).unwrap();
    let traj = simulate(
        &s,
        &c.params(),
        &tg,
        &SolverCfg::default(),
        &TrajectoryOptions {
            store_fields: true,
            snapshot_times: Vec::new(),
        },
    )
    .unwrap();
    symmetry_probe(&traj).unwrap()
}

fn c10_peakon_symmetry() -> Outcome {
    let a = peakon_defect("exA52");
    let b = peakon_defect("exB52");
    outcome(
        a <= 1e-6 && b > 1e-2,
        format!("Omega = 0 defect {a:.2e} (tol 1e-6); Omega = 0.2 defect {b:.2e} (needs > 1e-2)"),
    )
}

fn c11_case_f_smoke() -> Outcome {
    let c = preset("exF51").unwrap();
    let (inv, _) = drift_run("exF51", c.default_h, c.default_tau, 50.0);
    let (de, dh, di) = max_drift(&inv);
    let first = inv[0];
    let re = de / first.energy.abs();
    let rh = dh / first.momentum.abs().max(1.0);
    let ri = di / first.mass.abs();
    let worst = re.max(rh).max(ri);
    outcome(
        worst <= 1e-6,
        format!("{} steps, relative drift E {re:.1e} H {rh:.1e} I {ri:.1e} (tol 1e-6)", inv.len() - 1),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 operator identities", c1_operator_identities),
        ("2 two-level product identity", c2_temporal_identity),
        ("3 initial invariants", c3_initial_invariants),
        ("4 conservation", c4_conservation),
        ("5 spatial convergence", c5_spatial_convergence),
        ("6 temporal convergence", c6_temporal_convergence),
        ("7 picard vs newton", c7_picard_newton),
        ("8 cyclic solver vs dense", c8_cyclic_solver),
        ("9 unconditional convergence", c9_unconditional),
        ("10 peakon symmetry", c10_peakon_symmetry),
        ("11 scaled case F", c11_case_f_smoke),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {name}: {} [{secs:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
