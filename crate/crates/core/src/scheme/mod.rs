//! The two-level implicit scheme and its nonlinear solvers.
//!
//! One time step solves, for the midpoint pair `(u, rho)` at `t + tau/2`,
//!
//! ```text
//! (2/tau)(u - u^n) - (2/tau) d2(u - u^n) - kappa D u + 3 psi(u, u)
//!     - 3 sigma psi(d2 u, u) + mu D d2 u + (1 - 2 Omega kappa) rho D rho
//!     - 2 Omega rho D(rho u) = 0,
//! (2/tau)(rho - rho^n) + D(rho u) = 0,
//! ```
//!
//! with `D` the centered difference and `d2` the second difference, then
//! extrapolates `u^{n+1} = 2u - u^n` (same for `rho`). [`picard_step`] solves
//! it by the lagged-coefficient linear iteration; [`newton_step`] by Newton's
//! method with an analytic Jacobian and serves as the cross-check.

mod run;

pub use run::{
    run, simulate, FieldRecorder, InvariantRecorder, RunError, SnapshotRecorder, StepObserver,
    StepRecord, Trajectory, TrajectoryOptions, UniquenessMonitor,
};

use thiserror::Error;

use crate::grid::{self, GridError, GridFn, GridSpec};
use crate::linalg::{CyclicBandSystem, SolveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("rotation omega must lie in [0, 1/4), got {0}")]
    Omega(f64),
    #[error("1 - 2 omega kappa must be positive, got {0}")]
    Coupling(f64),
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("parameter {0} is not finite")]
    NonFinite(&'static str),
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("time step must be positive and finite, got {0}")]
    Step(f64),
    #[error("step count must be at least 1")]
    Steps,
    #[error("{0} must be positive")]
    Tolerance(&'static str),
    #[error("{0} must be at least 1")]
    IterationCap(&'static str),
}

/// Model coefficients: shear `kappa`, balance index `sigma`, dispersion `mu`,
/// rotation `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    kappa: f64,
    sigma: f64,
    mu: f64,
    omega: f64,
}

impl PhysParams {
    pub fn new(kappa: f64, sigma: f64, mu: f64, omega: f64) -> Result<Self, ParamError> {
        for (name, v) in [("kappa", kappa), ("sigma", sigma), ("mu", mu), ("omega", omega)] {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        if !(0.0..0.25).contains(&omega) {
            return Err(ParamError::Omega(omega));
        }
        let coupling = 1.0 - 2.0 * omega * kappa;
        if coupling <= 0.0 {
            return Err(ParamError::Coupling(coupling));
        }
        if sigma <= 0.0 {
            return Err(ParamError::Sigma(sigma));
        }
        Ok(Self {
            kappa,
            sigma,
            mu,
            omega,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `1 - 2 omega kappa`.
    pub fn coupling(&self) -> f64 {
        1.0 - 2.0 * self.omega * self.kappa
    }
}

/// Uniform time levels `t_n = n tau`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, ParamError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ParamError::Horizon(horizon));
        }
        if steps == 0 {
            return Err(ParamError::Steps);
        }
        Ok(Self {
            horizon,
            steps,
            tau: horizon / steps as f64,
        })
    }

    /// `N = round(T / tau)`, then `tau = T / N`.
    pub fn with_step(horizon: f64, tau: f64) -> Result<Self, ParamError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(ParamError::Step(tau));
        }
        let steps = (horizon / tau).round();
        if !steps.is_finite() || steps < 1.0 {
            return Err(ParamError::Steps);
        }
        Self::new(horizon, steps as usize)
    }

    pub fn refined(&self) -> Self {
        Self {
            steps: 2 * self.steps,
            tau: self.horizon / (2 * self.steps) as f64,
            ..*self
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }
}

/// Velocity and surface elevation at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: GridFn,
    pub rho: GridFn,
    pub t: f64,
}

impl State {
    pub fn new(u: GridFn, rho: GridFn, t: f64) -> Result<Self, GridError> {
        if u.spec() != rho.spec() {
            return Err(GridError::SpecMismatch);
        }
        Ok(Self { u, rho, t })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            u: GridFn::zeros(spec),
            rho: GridFn::zeros(spec),
            t: 0.0,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.u.spec()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.rho.is_finite() && self.t.is_finite()
    }

    /// `max(|u - u'|_inf, |rho - rho'|_inf)`.
    pub fn max_diff(&self, other: &State) -> Result<f64, GridError> {
        Ok(self
            .u
            .max_abs_diff(&other.u)?
            .max(self.rho.max_abs_diff(&other.rho)?))
    }

    /// `2 * mid - self`, the extrapolation from a midpoint back to a full level.
    fn extrapolate(&self, mid_u: &[f64], mid_rho: &[f64], tau: f64) -> State {
        let spec = *self.spec();
        let ext = |mid: &[f64], old: &GridFn| -> GridFn {
            GridFn::from_raw(spec, mid.iter().zip(old.values()).map(|(m, o)| 2.0 * m - o).collect())
        };
        State {
            u: ext(mid_u, &self.u),
            rho: ext(mid_rho, &self.rho),
            t: self.t + tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverCfg {
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for SolverCfg {
    fn default() -> Self {
        Self {
            picard_tol: 1e-12,
            max_picard_iters: 100,
            newton_tol: 1e-12,
            max_newton_iters: 25,
        }
    }
}

impl SolverCfg {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.picard_tol > 0.0) {
            return Err(ParamError::Tolerance("picard_tol"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(ParamError::Tolerance("newton_tol"));
        }
        if self.max_picard_iters == 0 {
            return Err(ParamError::IterationCap("max_picard_iters"));
        }
        if self.max_newton_iters == 0 {
            return Err(ParamError::IterationCap("max_newton_iters"));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("Picard iteration did not converge in {iters} iterations (last increment {last_increment:.3e})")]
    PicardDiverged { iters: usize, last_increment: f64 },
    #[error("Newton iteration did not converge in {iters} iterations (last residual {last_residual:.3e})")]
    NewtonDiverged { iters: usize, last_residual: f64 },
    #[error("non-finite values after the step")]
    NonFinite,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Scalar bandwidth of the interleaved systems (`u_i -> 2i`, `rho_i -> 2i+1`).
const BANDWIDTH: usize = 4;

#[inline]
fn wrap(i: usize, d: isize, m: usize) -> usize {
    (i as isize + d).rem_euclid(m as isize) as usize
}

/// Rows `2i` (momentum) and `2i+1` (continuity) share the linear part
/// `(2/tau)(I - d2) - kappa D + mu D d2` in `u` and `(2/tau) I` in `rho`.
fn add_linear_part(sys: &mut CyclicBandSystem, m: usize, h: f64, p: &PhysParams, tau: f64) {
    let two_tau = 2.0 / tau;
    let h2 = h * h;
    let disp = p.mu / (2.0 * h2 * h);
    for i in 0..m {
        let r = 2 * i;
        sys.add(r, 0, two_tau * (1.0 + 2.0 / h2));
        sys.add(r, 2, -two_tau / h2 - p.kappa / (2.0 * h) - 2.0 * disp);
        sys.add(r, -2, -two_tau / h2 + p.kappa / (2.0 * h) + 2.0 * disp);
        sys.add(r, 4, disp);
        sys.add(r, -4, -disp);
        sys.add(r + 1, 0, two_tau);
    }
}

/// Right-hand side `(2/tau)(u^n - d2 u^n)`, `(2/tau) rho^n`.
fn known_rhs(prev: &State, tau: f64) -> Vec<f64> {
    let two_tau = 2.0 / tau;
    let d2u = grid::second_diff(&prev.u);
    let m = prev.u.len();
    let mut b = vec![0.0; 2 * m];
    for i in 0..m {
        b[2 * i] = two_tau * (prev.u[i] - d2u[i]);
        b[2 * i + 1] = two_tau * prev.rho[i];
    }
    b
}

/// Linear system of one Picard iterate: unknowns `(u^{(l+1)}, rho^{(l+1)})`,
/// coefficients frozen at `iterate = (u^{(l)}, rho^{(l)})`.
pub fn assemble_picard_system(
    prev: &State,
    iterate: &State,
    p: &PhysParams,
    tau: f64,
) -> Result<CyclicBandSystem, GridError> {
    let spec = prev.spec();
    if spec != iterate.spec() || prev.u.spec() != prev.rho.spec() || iterate.u.spec() != iterate.rho.spec() {
        return Err(GridError::SpecMismatch);
    }
    let m = spec.nodes();
    let h = spec.h();
    let inv2h = 0.5 / h;
    let a = iterate.u.values();
    let b = grid::second_diff(&iterate.u);
    let r = iterate.rho.values();
    let c = p.coupling();
    let om2 = 2.0 * p.omega;

    let mut sys = CyclicBandSystem::new(2 * m, BANDWIDTH, BANDWIDTH);
    add_linear_part(&mut sys, m, h, p, tau);
    for i in 0..m {
        let (ip, im) = (wrap(i, 1, m), wrap(i, -1, m));
        let row = 2 * i;
        // 3 psi(a, u) - 3 sigma psi(b, u) - 2 Omega r D(r u)
        let up = (a[i] + a[ip]) - p.sigma * (b[i] + b[ip]) - om2 * r[i] * r[ip];
        let um = -(a[i] + a[im]) + p.sigma * (b[i] + b[im]) + om2 * r[i] * r[im];
        sys.add(row, 2, up * inv2h);
        sys.add(row, -2, um * inv2h);
        // (1 - 2 Omega kappa) r D rho
        sys.add(row, 3, c * r[i] * inv2h);
        sys.add(row, -1, -c * r[i] * inv2h);
        // continuity: D(r u)
        sys.add(row + 1, 1, r[ip] * inv2h);
        sys.add(row + 1, -3, -r[im] * inv2h);
    }
    sys.set_rhs(known_rhs(prev, tau)).expect("rhs sized to the system");
    Ok(sys)
}

fn split(z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = z.iter().step_by(2).copied().collect();
    let rho = z.iter().skip(1).step_by(2).copied().collect();
    (u, rho)
}

/// Result of one converged time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: State,
    pub iters: usize,
    /// Midpoint velocity `u^{n+1/2}`.
    pub mid_u: GridFn,
}

/// Advance one step with the linearized fixed-point iteration.
///
/// Starts from the previous level and stops once successive iterates differ
/// by at most `cfg.picard_tol` in the max norm. Negative `tau` integrates
/// backwards.
pub fn picard_step(prev: &State, p: &PhysParams, tau: f64, cfg: &SolverCfg) -> Result<Step, StepError> {
    let spec = *prev.spec();
    if prev.u.spec() != prev.rho.spec() {
        return Err(GridError::SpecMismatch.into());
    }
    let mut iterate = State {
        u: prev.u.clone(),
        rho: prev.rho.clone(),
        t: prev.t,
    };
    let mut last = f64::INFINITY;
    for l in 0..cfg.max_picard_iters {
        let sys = assemble_picard_system(prev, &iterate, p, tau)?;
        let z = sys.solve()?;
        let (u, rho) = split(&z);
        let next_iter = State {
            u: GridFn::from_raw(spec, u),
            rho: GridFn::from_raw(spec, rho),
            t: prev.t,
        };
        last = next_iter.max_diff(&iterate)?;
        if !last.is_finite() {
            return Err(StepError::NonFinite);
        }
        iterate = next_iter;
        if last <= cfg.picard_tol {
            let next = prev.extrapolate(iterate.u.values(), iterate.rho.values(), tau);
            return Ok(Step {
                next,
                iters: l + 1,
                mid_u: iterate.u,
            });
        }
    }
    Err(StepError::PicardDiverged {
        iters: cfg.max_picard_iters,
        last_increment: last,
    })
}

/// Residual of the midpoint system at `(u, rho)` given the previous level.
pub fn midpoint_residual(
    prev: &State,
    u: &GridFn,
    rho: &GridFn,
    p: &PhysParams,
    tau: f64,
) -> Result<(GridFn, GridFn), GridError> {
    let two_tau = 2.0 / tau;
    let du = u.axpby(1.0, &prev.u, -1.0)?;
    let drho = rho.axpby(1.0, &prev.rho, -1.0)?;
    let d2u = grid::second_diff(u);
    let rho_u = rho.mul(u)?;
    let flux = grid::centered_diff(&rho_u);

    let time_u = du.axpby(two_tau, &grid::second_diff(&du), -two_tau)?;
    let shear = grid::centered_diff(u);
    let conv = grid::psi(u, u)?;
    let bal = grid::psi(&d2u, u)?;
    let disp = grid::centered_diff(&d2u);
    let press = rho.mul(&grid::centered_diff(rho))?;
    let rot = rho.mul(&flux)?;

    let m = u.len();
    let c = p.coupling();
    let fu: Vec<f64> = (0..m)
        .map(|i| {
            time_u[i] - p.kappa * shear[i] + 3.0 * conv[i] - 3.0 * p.sigma * bal[i]
                + p.mu * disp[i]
                + c * press[i]
                - 2.0 * p.omega * rot[i]
        })
        .collect();
    let frho: Vec<f64> = (0..m).map(|i| two_tau * drho[i] + flux[i]).collect();
    Ok((GridFn::from_raw(*u.spec(), fu), GridFn::from_raw(*u.spec(), frho)))
}

/// Analytic Jacobian of [`midpoint_residual`] at `(u, rho)`.
pub fn midpoint_jacobian(u: &GridFn, rho: &GridFn, p: &PhysParams, tau: f64) -> Result<CyclicBandSystem, GridError> {
    if u.spec() != rho.spec() {
        return Err(GridError::SpecMismatch);
    }
    let spec = u.spec();
    let m = spec.nodes();
    let h = spec.h();
    let inv2h = 0.5 / h;
    let ih2 = 1.0 / (h * h);
    let uv = u.values();
    let rv = rho.values();
    let b = grid::second_diff(u);
    let du = grid::centered_diff(u);
    let dr = grid::centered_diff(rho);
    let dflux = grid::centered_diff(&rho.mul(u)?);
    let c = p.coupling();
    let om2 = 2.0 * p.omega;
    let sig = p.sigma;

    let mut sys = CyclicBandSystem::new(2 * m, BANDWIDTH, BANDWIDTH);
    add_linear_part(&mut sys, m, h, p, tau);
    for i in 0..m {
        let (ip, im) = (wrap(i, 1, m), wrap(i, -1, m));
        let row = 2 * i;

        // 3 psi(u, du) - 3 sigma psi(d2 u, du) - 2 Omega rho D(rho du)
        let up = (uv[i] + uv[ip]) - sig * (b[i] + b[ip]) - om2 * rv[i] * rv[ip];
        let um = -(uv[i] + uv[im]) + sig * (b[i] + b[im]) + om2 * rv[i] * rv[im];
        sys.add(row, 2, up * inv2h);
        sys.add(row, -2, um * inv2h);

        // 3 psi(du, u)
        sys.add(row, 0, du[i]);
        sys.add(row, 2, uv[ip] * inv2h);
        sys.add(row, -2, -uv[im] * inv2h);

        // -3 sigma psi(d2 du, u): weights on w = d2 du at i, i+1, i-1
        for (d, wgt) in [(0isize, du[i]), (1, uv[ip] * inv2h), (-1, -uv[im] * inv2h)] {
            let wgt = -sig * wgt * ih2;
            sys.add(row, 2 * (d + 1), wgt);
            sys.add(row, 2 * d, -2.0 * wgt);
            sys.add(row, 2 * (d - 1), wgt);
        }

        // (1 - 2 Omega kappa) rho D rho
        sys.add(row, 1, c * dr[i]);
        sys.add(row, 3, c * rv[i] * inv2h);
        sys.add(row, -1, -c * rv[i] * inv2h);

        // -2 Omega rho D(rho u), derivative in rho
        sys.add(row, 1, -om2 * dflux[i]);
        sys.add(row, 3, -om2 * rv[i] * uv[ip] * inv2h);
        sys.add(row, -1, om2 * rv[i] * uv[im] * inv2h);

        // continuity: D(rho u)
        let cr = row + 1;
        sys.add(cr, 1, rv[ip] * inv2h);
        sys.add(cr, -3, -rv[im] * inv2h);
        sys.add(cr, 2, uv[ip] * inv2h);
        sys.add(cr, -2, -uv[im] * inv2h);
    }
    Ok(sys)
}

/// Advance one step by Newton's method on the midpoint system.
pub fn newton_step(prev: &State, p: &PhysParams, tau: f64, cfg: &SolverCfg) -> Result<Step, StepError> {
    let spec = *prev.spec();
    if prev.u.spec() != prev.rho.spec() {
        return Err(GridError::SpecMismatch.into());
    }
    let m = spec.nodes();
    let mut u = prev.u.clone();
    let mut rho = prev.rho.clone();
    let mut res = f64::INFINITY;
    for k in 0..=cfg.max_newton_iters {
        let (fu, frho) = midpoint_residual(prev, &u, &rho, p, tau)?;
        res = grid::linf_norm(&fu).max(grid::linf_norm(&frho));
        if !res.is_finite() {
            return Err(StepError::NonFinite);
        }
        if res <= cfg.newton_tol {
            let next = prev.extrapolate(u.values(), rho.values(), tau);
            return Ok(Step {
                next,
                iters: k,
                mid_u: u,
            });
        }
        if k == cfg.max_newton_iters {
            break;
        }
        let mut jac = midpoint_jacobian(&u, &rho, p, tau)?;
        let mut rhs = vec![0.0; 2 * m];
        for i in 0..m {
            rhs[2 * i] = -fu[i];
            rhs[2 * i + 1] = -frho[i];
        }
        jac.set_rhs(rhs)?;
        let dz = jac.solve()?;
        let (du, dr) = split(&dz);
        u = GridFn::from_raw(spec, u.values().iter().zip(&du).map(|(a, b)| a + b).collect());
        rho = GridFn::from_raw(spec, rho.values().iter().zip(&dr).map(|(a, b)| a + b).collect());
    }
    Err(StepError::NewtonDiverged {
        iters: cfg.max_newton_iters,
        last_residual: res,
    })
}

/// Raised when the midpoint velocity is large enough that the continuity
/// equation may lose its unique solution: `r = |tau| |u|_inf / (2h) >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessWarning {
    pub ratio: f64,
    pub t: f64,
}

/// The ratio `|tau| |u_mid|_inf / (2h)`.
pub fn uniqueness_ratio(u_mid: &GridFn, tau: f64) -> f64 {
    tau.abs() * grid::linf_norm(u_mid) / (2.0 * u_mid.spec().h())
}

pub fn uniqueness_guard(u_mid: &GridFn, tau: f64, t: f64) -> Option<UniquenessWarning> {
    let ratio = uniqueness_ratio(u_mid, tau);
    (ratio >= 1.0).then_some(UniquenessWarning { ratio, t })
}
