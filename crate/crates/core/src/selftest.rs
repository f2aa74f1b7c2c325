//! Randomized checks of the discrete summation-by-parts, embedding and
//! two-level product identities the conservation argument rests on.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::grid::{self, centered_diff, psi, second_diff, GridFn, GridSpec};

/// Worst relative defect of one identity over a batch of random inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub nodes: usize,
    pub cases: usize,
    pub max_defect: f64,
    pub tol: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.max_defect <= self.tol
    }
}

pub const SBP_TOL: f64 = 1e-12;
pub const TEMPORAL_TOL: f64 = 1e-12;
pub const BILINEAR_TOL: f64 = 1e-13;

fn abs_inner(a: &GridFn, b: &GridFn) -> f64 {
    let h = a.spec().h();
    h * a.values().iter().zip(b.values()).map(|(x, y)| (x * y).abs()).sum::<f64>()
}

fn abs_inner_h1(a: &GridFn, b: &GridFn) -> f64 {
    let (da, db) = (grid::backward_diff(a), grid::backward_diff(b));
    abs_inner(&da, &db)
}

fn rel(defect: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        defect
    } else {
        defect / scale
    }
}

/// Relative defects of `(psi(u,v),v) = 0`, `(Du,u) = 0`, `(Du,v) = -(u,Dv)`
/// and `(d2 u, v) = -<du, dv>`. Each defect is divided by the sum of the
/// absolute values of the terms that make up the inner products.
pub fn sbp_defects(u: &GridFn, v: &GridFn) -> [f64; 4] {
    let p = psi(u, v).expect("shared grid");
    let du = centered_diff(u);
    let dv = centered_diff(v);
    let d2u = second_diff(u);
    let ip = |a: &GridFn, b: &GridFn| grid::inner(a, b).expect("shared grid");
    [
        rel(ip(&p, v).abs(), abs_inner(&p, v)),
        rel(ip(&du, u).abs(), abs_inner(&du, u)),
        rel((ip(&du, v) + ip(u, &dv)).abs(), abs_inner(&du, v) + abs_inner(u, &dv)),
        rel(
            (ip(&d2u, v) + grid::inner_h1(u, v).expect("shared grid")).abs(),
            abs_inner(&d2u, v) + abs_inner_h1(u, v),
        ),
    ]
}

pub const SBP_NAMES: [&str; 4] = ["(psi(u,v),v)=0", "(Du,u)=0", "(Du,v)=-(u,Dv)", "(d2u,v)=-<du,dv>"];

/// Relative defect of the two-level product identity
///
/// `(d_t u, u_m v_m) = [(u1, u1 v1) - (u0, u0 v0)] / (2 tau)
///   - (u1 - u0, (u1 - u0) d_t v) / 4 - (u1 u0, d_t v) / 2`
///
/// with `d_t w = (w1 - w0) / tau` and `w_m = (w0 + w1) / 2`.
pub fn temporal_defect(u0: &GridFn, u1: &GridFn, v0: &GridFn, v1: &GridFn, tau: f64) -> f64 {
    let dt = |a: &GridFn, b: &GridFn| b.axpby(1.0 / tau, a, -1.0 / tau).expect("shared grid");
    let mid = |a: &GridFn, b: &GridFn| a.axpby(0.5, b, 0.5).expect("shared grid");
    let mul = |a: &GridFn, b: &GridFn| a.mul(b).expect("shared grid");
    let ip = |a: &GridFn, b: &GridFn| grid::inner(a, b).expect("shared grid");

    let dtu = dt(u0, u1);
    let dtv = dt(v0, v1);
    let jump = u1.axpby(1.0, u0, -1.0).expect("shared grid");
    let lhs_w = mul(&mid(u0, u1), &mid(v0, v1));
    let lhs = ip(&dtu, &lhs_w);

    let t1 = ip(u1, &mul(u1, v1)) / (2.0 * tau);
    let t0 = ip(u0, &mul(u0, v0)) / (2.0 * tau);
    let t2 = 0.25 * ip(&jump, &mul(&jump, &dtv));
    let t3 = 0.5 * ip(&mul(u1, u0), &dtv);
    let rhs = t1 - t0 - t2 - t3;

    let scale = abs_inner(&dtu, &lhs_w)
        + abs_inner(u1, &mul(u1, v1)) / (2.0 * tau)
        + abs_inner(u0, &mul(u0, v0)) / (2.0 * tau)
        + 0.25 * abs_inner(&jump, &mul(&jump, &dtv))
        + 0.5 * abs_inner(&mul(u1, u0), &dtv);
    rel((lhs - rhs).abs(), scale)
}

/// Slack of `|v|_inf^2 <= eps |v|_1^2 + (1/eps + 1/L) |v|^2`; non-negative
/// when the bound holds.
pub fn embedding_slack(v: &GridFn, eps: f64) -> f64 {
    let n = grid::norms(v);
    let l = v.spec().length();
    eps * n.h1_semi * n.h1_semi + (1.0 / eps + 1.0 / l) * n.l2 * n.l2 - n.linf * n.linf
}

/// Relative defect of bilinearity of `psi` in both slots for
/// `alpha u + beta w` against `v`.
pub fn bilinear_defect(u: &GridFn, w: &GridFn, v: &GridFn, alpha: f64, beta: f64) -> f64 {
    let comb = u.axpby(alpha, w, beta).expect("shared grid");
    let check = |direct: GridFn, fu: GridFn, fw: GridFn| {
        let split = fu.axpby(alpha, &fw, beta).expect("shared grid");
        let scale = alpha.abs() * grid::linf_norm(&fu) + beta.abs() * grid::linf_norm(&fw);
        rel(direct.max_abs_diff(&split).expect("shared grid"), scale)
    };
    let ps = |a: &GridFn, b: &GridFn| psi(a, b).expect("shared grid");
    let left = check(ps(&comb, v), ps(u, v), ps(w, v));
    let right = check(ps(v, &comb), ps(v, u), ps(v, w));
    left.max(right)
}

/// A random grid with `m` nodes and a random period and origin.
pub fn random_spec(rng: &mut impl Rng, m: usize) -> GridSpec {
    let length = rng.gen_range(1.0..100.0);
    let x_left = rng.gen_range(-50.0..0.0);
    GridSpec::new(x_left, length, m).expect("valid random grid")
}

/// Entries uniform in `[-amp, amp]`.
pub fn random_fn(rng: &mut impl Rng, spec: GridSpec, amp: f64) -> GridFn {
    GridFn::new(spec, (0..spec.nodes()).map(|_| rng.gen_range(-amp..amp)).collect()).expect("finite")
}

/// The four summation-by-parts identities on `pairs` random pairs for each
/// node count.
pub fn operator_suite(seed: u64, pairs: usize, sizes: &[usize]) -> Vec<IdentityCheck> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &m in sizes {
        let mut worst = [0.0_f64; 4];
        for _ in 0..pairs {
            let spec = random_spec(&mut rng, m);
            let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
            let u = random_fn(&mut rng, spec, amp);
            let v = random_fn(&mut rng, spec, 1.0);
            for (w, d) in worst.iter_mut().zip(sbp_defects(&u, &v)) {
                *w = w.max(d);
            }
        }
        for (k, name) in SBP_NAMES.iter().enumerate() {
            out.push(IdentityCheck {
                name,
                nodes: m,
                cases: pairs,
                max_defect: worst[k],
                tol: SBP_TOL,
            });
        }
    }
    out
}

/// The two-level product identity on `pairs` random inputs.
pub fn temporal_suite(seed: u64, pairs: usize, m: usize) -> IdentityCheck {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let spec = random_spec(&mut rng, m);
        let tau = 10f64.powf(rng.gen_range(-4.0..0.0));
        let u0 = random_fn(&mut rng, spec, 1.0);
        let v0 = random_fn(&mut rng, spec, 1.0);
        // second level close to the first, as in a time step
        let u1 = u0.axpby(1.0, &random_fn(&mut rng, spec, 1.0), tau).expect("shared grid");
        let v1 = v0.axpby(1.0, &random_fn(&mut rng, spec, 1.0), tau).expect("shared grid");
        worst = worst.max(temporal_defect(&u0, &u1, &v0, &v1, tau));
    }
    IdentityCheck {
        name: "two-level product",
        nodes: m,
        cases: pairs,
        max_defect: worst,
        tol: TEMPORAL_TOL,
    }
}

/// Embedding inequality for `eps` in `{0.1, 1, 10}`; the defect is the
/// largest relative violation (zero when the bound always holds).
pub fn embedding_suite(seed: u64, cases: usize, m: usize) -> IdentityCheck {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let spec = random_spec(&mut rng, m);
        let v = random_fn(&mut rng, spec, 1.0);
        for eps in [0.1, 1.0, 10.0] {
            let slack = embedding_slack(&v, eps);
            let linf = grid::linf_norm(&v);
            worst = worst.max((-slack).max(0.0) / (linf * linf).max(f64::MIN_POSITIVE));
        }
    }
    IdentityCheck {
        name: "embedding",
        nodes: m,
        cases,
        max_defect: worst,
        tol: 0.0,
    }
}

pub fn bilinear_suite(seed: u64, cases: usize, m: usize) -> IdentityCheck {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let spec = random_spec(&mut rng, m);
        let u = random_fn(&mut rng, spec, 1.0);
        let w = random_fn(&mut rng, spec, 1.0);
        let v = random_fn(&mut rng, spec, 1.0);
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        worst = worst.max(bilinear_defect(&u, &w, &v, a, b));
    }
    IdentityCheck {
        name: "psi bilinearity",
        nodes: m,
        cases,
        max_defect: worst,
        tol: BILINEAR_TOL,
    }
}

/// Everything the `selftest` command runs.
pub fn full_suite(seed: u64) -> Vec<IdentityCheck> {
    let mut checks = operator_suite(seed, 1000, &[8, 64, 1024]);
    checks.push(temporal_suite(seed.wrapping_add(1), 1000, 64));
    checks.push(embedding_suite(seed.wrapping_add(2), 300, 64));
    checks.push(bilinear_suite(seed.wrapping_add(3), 300, 64));
    checks
}
