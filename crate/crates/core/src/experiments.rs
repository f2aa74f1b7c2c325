//! Benchmark cases, grid-doubling error measurement and convergence studies.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{GridError, GridFn, GridSpec};
use crate::scheme::{simulate, ParamError, PhysParams, RunError, SolverCfg, State, TimeGrid, Trajectory, TrajectoryOptions};

/// Earth's rotation rate in the model's units.
pub const OMEGA_EARTH: f64 = 73e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("trajectories are not aligned: {0}")]
    Misaligned(String),
    #[error("trajectory has no stored field history")]
    NoFields,
    #[error("errors must be positive to form an order (got {0}, {1})")]
    NonPositiveError(f64, f64),
    #[error("a study needs at least 2 levels, got {0}")]
    Levels(usize),
    #[error("grid is not symmetric about x = 0: {0}")]
    Asymmetric(String),
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("run {run} failed after {} completed rows: {source}", completed.len())]
    Run {
        run: usize,
        completed: Vec<ConvergenceRow>,
        source: RunError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitCondition {
    /// `u = 0`, `rho = 1 + tanh(x + a) - tanh(x - a)`.
    DamBreak { a: f64 },
    /// `u = exp(-|x - 5|) - exp(-|x + 5|)`, `rho = 0.5`.
    PeakonAntipeakon,
    Zero,
}

impl InitCondition {
    pub fn tag(&self) -> &'static str {
        match self {
            InitCondition::DamBreak { .. } => "dam_break",
            InitCondition::PeakonAntipeakon => "peakon",
            InitCondition::Zero => "zero",
        }
    }

    pub fn build(&self, grid: GridSpec) -> State {
        match *self {
            InitCondition::DamBreak { a } => init_dam_break(a, grid),
            InitCondition::PeakonAntipeakon => init_peakon_antipeakon(grid),
            InitCondition::Zero => State::zeros(grid),
        }
    }
}

pub fn init_dam_break(a: f64, grid: GridSpec) -> State {
    State {
        u: GridFn::zeros(grid),
        rho: GridFn::from_fn(grid, |x| 1.0 + (x + a).tanh() - (x - a).tanh()),
        t: 0.0,
    }
}

pub fn init_peakon_antipeakon(grid: GridSpec) -> State {
    State {
        u: GridFn::from_fn(grid, |x| (-(x - 5.0).abs()).exp() - (-(x + 5.0).abs()).exp()),
        rho: GridFn::constant(grid, 0.5),
        t: 0.0,
    }
}

/// A named benchmark: initial data, domain, horizon, coefficients and the
/// default discretization used when none is given.
#[derive(Debug, Clone, PartialEq)]
pub struct CasePreset {
    pub name: &'static str,
    pub init: InitCondition,
    pub x_left: f64,
    pub length: f64,
    pub horizon: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub mu: f64,
    pub omega: f64,
    pub default_h: f64,
    pub default_tau: f64,
    pub snapshot_times: &'static [f64],
}

/// Initial data, domain and coefficients: everything a study needs besides
/// the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub init: InitCondition,
    pub x_left: f64,
    pub length: f64,
    pub params: PhysParams,
}

impl Setup {
    pub fn grid(&self, h: f64) -> Result<GridSpec, GridError> {
        GridSpec::with_spacing(self.x_left, self.length, h)
    }
}

impl CasePreset {
    pub fn setup(&self) -> Setup {
        Setup {
            init: self.init,
            x_left: self.x_left,
            length: self.length,
            params: self.params(),
        }
    }

    pub fn params(&self) -> PhysParams {
        PhysParams::new(self.kappa, self.sigma, self.mu, self.omega).expect("catalog parameters are admissible")
    }

    pub fn grid(&self, h: f64) -> Result<GridSpec, GridError> {
        GridSpec::with_spacing(self.x_left, self.length, h)
    }

    pub fn initial_state(&self, grid: GridSpec) -> State {
        self.init.build(grid)
    }
}

const DAM_SNAPSHOTS: &[f64] = &[];
const PEAKON_SNAPSHOTS: &[f64] = &[1.0, 3.0, 6.0, 8.0];

fn dam(name: &'static str, a: f64, half: f64, horizon: f64, kmso: [f64; 4], h: f64, tau: f64) -> CasePreset {
    CasePreset {
        name,
        init: InitCondition::DamBreak { a },
        x_left: -half,
        length: 2.0 * half,
        horizon,
        kappa: kmso[0],
        mu: kmso[1],
        sigma: kmso[2],
        omega: kmso[3],
        default_h: h,
        default_tau: tau,
        snapshot_times: DAM_SNAPSHOTS,
    }
}

fn peakon(name: &'static str, kappa: f64, mu: f64, omega: f64) -> CasePreset {
    CasePreset {
        name,
        init: InitCondition::PeakonAntipeakon,
        x_left: -20.0,
        length: 40.0,
        horizon: 8.0,
        kappa,
        sigma: 1.0,
        mu,
        omega,
        default_h: 0.1,
        default_tau: 0.02,
        snapshot_times: PEAKON_SNAPSHOTS,
    }
}

/// The full catalog: dam-break cases `exA51`..`exF51` and peakon/anti-peakon
/// cases `exA52`..`exE52`.
pub fn catalog() -> Vec<CasePreset> {
    let w = OMEGA_EARTH;
    // [kappa, mu, sigma, omega]
    vec![
        dam("exA51", 0.1, 6.0, 20.0, [0.0, 0.0, 1.0, 0.0], 0.2, 1.0 / 256.0),
        dam("exB51", 4.0, 12.0 * PI, 2.0, [0.0, 0.0, 1.0, 0.0], 0.2, 1.0 / 256.0),
        dam("exC51", 0.2, 8.0, 1.0, [0.0, 1.0, 1.0, w], 0.1, 1.0 / 256.0),
        dam("exD51", 1.0, 8.0, 1.0, [1.0, 1.0, 1.0, w], 0.1, 1.0 / 256.0),
        dam("exE51", 1.0, 12.0 * PI, 50.0, [0.0, 1.0, 1.0, w], 1.0 / 16.0, 1.0 / 20.0),
        dam("exF51", 1.0, 100.0, 1000.0, [1.0, 1.0, 1.0, w], 0.1, 1.0 / 50.0),
        peakon("exA52", 0.0, 0.0, 0.0),
        peakon("exB52", 0.0, 0.0, 0.2),
        peakon("exC52", 0.0, 0.0, w),
        peakon("exD52", 1.0, 0.0, w),
        peakon("exE52", 1.0, 1.0, w),
    ]
}

pub fn preset(name: &str) -> Result<CasePreset, ExperimentError> {
    catalog()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| ExperimentError::UnknownCase(name.to_string()))
}

/// Max-norm velocity error and L2 elevation error between two trajectories
/// whose grids nest: coarse node `i` (1-based) sits on fine node `r i`, coarse
/// level `k` on fine level `q k`, for integer ratios `r`, `q`. Maxima run over
/// all coarse levels; the L2 norm uses the coarse spacing.
pub fn compare_nested(coarse: &Trajectory, fine: &Trajectory) -> Result<(f64, f64), ExperimentError> {
    let (cs, fs) = (coarse.spec, fine.spec);
    if cs.x_left() != fs.x_left() || cs.length() != fs.length() {
        return Err(ExperimentError::Misaligned("different domains".into()));
    }
    if fs.nodes() % cs.nodes() != 0 {
        return Err(ExperimentError::Misaligned(format!(
            "{} fine nodes do not refine {} coarse nodes",
            fs.nodes(),
            cs.nodes()
        )));
    }
    let (ct, ft) = (coarse.time, fine.time);
    if ct.horizon() != ft.horizon() || ft.steps() % ct.steps() != 0 {
        return Err(ExperimentError::Misaligned(format!(
            "{} fine steps do not refine {} coarse steps",
            ft.steps(),
            ct.steps()
        )));
    }
    let r = fs.nodes() / cs.nodes();
    let q = ft.steps() / ct.steps();
    let cl = coarse.levels.as_ref().ok_or(ExperimentError::NoFields)?;
    let fl = fine.levels.as_ref().ok_or(ExperimentError::NoFields)?;
    let h = cs.h();
    let mut err_u: f64 = 0.0;
    let mut err_rho: f64 = 0.0;
    for (k, c) in cl.iter().enumerate() {
        let f = &fl[q * k];
        let mut ssq = 0.0;
        for s in 0..cs.nodes() {
            let fs_idx = r * (s + 1) - 1;
            err_u = err_u.max((c.u[s] - f.u[fs_idx]).abs());
            let d = c.rho[s] - f.rho[fs_idx];
            ssq += d * d;
        }
        err_rho = err_rho.max((h * ssq).sqrt());
    }
    Ok((err_u, err_rho))
}

/// Errors between runs at `h` and `h/2` with the same time grid.
pub fn refine_error_space(coarse: &Trajectory, fine: &Trajectory) -> Result<(f64, f64), ExperimentError> {
    if fine.spec.nodes() != 2 * coarse.spec.nodes() {
        return Err(ExperimentError::Misaligned(format!(
            "fine grid has {} nodes, expected {}",
            fine.spec.nodes(),
            2 * coarse.spec.nodes()
        )));
    }
    if fine.time.steps() != coarse.time.steps() {
        return Err(ExperimentError::Misaligned("step counts differ".into()));
    }
    compare_nested(coarse, fine)
}

/// Errors between runs at `tau` and `tau/2` on the same spatial grid.
pub fn refine_error_time(coarse: &Trajectory, fine: &Trajectory) -> Result<(f64, f64), ExperimentError> {
    if fine.time.steps() != 2 * coarse.time.steps() {
        return Err(ExperimentError::Misaligned(format!(
            "fine run has {} steps, expected {}",
            fine.time.steps(),
            2 * coarse.time.steps()
        )));
    }
    if fine.spec.nodes() != coarse.spec.nodes() {
        return Err(ExperimentError::Misaligned("node counts differ".into()));
    }
    compare_nested(coarse, fine)
}

/// `log2(err_coarse / err_fine)`.
pub fn convergence_order(err_coarse: f64, err_fine: f64) -> Result<f64, ExperimentError> {
    if !(err_coarse > 0.0 && err_fine > 0.0) {
        return Err(ExperimentError::NonPositiveError(err_coarse, err_fine));
    }
    Ok((err_coarse / err_fine).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Space => "space",
            Axis::Time => "time",
        }
    }
}

/// One row of a refinement table. Orders are absent on the first row and
/// whenever an error vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub step: f64,
    pub err_u_inf: f64,
    pub ord_u: Option<f64>,
    pub err_rho_l2: f64,
    pub ord_rho: Option<f64>,
}

/// Run `setup` on one grid pair with full field history.
pub fn run_full(setup: &Setup, grid: GridSpec, tg: TimeGrid, cfg: &SolverCfg) -> Result<Trajectory, RunError> {
    let init = setup.init.build(grid);
    simulate(
        &init,
        &setup.params,
        &tg,
        cfg,
        &TrajectoryOptions {
            store_fields: true,
            snapshot_times: Vec::new(),
        },
    )
}

/// Halve the step along `axis` `levels` times (holding the other fixed), pair
/// adjacent runs by grid doubling and return one row per coarse run.
///
/// `levels` rows need `levels + 1` runs; they execute on the current rayon
/// pool.
pub fn run_convergence_study(
    setup: &Setup,
    axis: Axis,
    levels: usize,
    grid0: GridSpec,
    time0: TimeGrid,
    cfg: &SolverCfg,
) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    if levels < 2 {
        return Err(ExperimentError::Levels(levels));
    }
    let mut grids = vec![(grid0, time0)];
    for k in 0..levels {
        let (g, t) = grids[k];
        grids.push(match axis {
            Axis::Space => (g.refined(), t),
            Axis::Time => (g, t.refined()),
        });
    }
    let runs: Vec<Result<Trajectory, RunError>> = grids
        .par_iter()
        .map(|&(g, t)| run_full(setup, g, t, cfg))
        .collect();

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    let mut prev_errs: Option<(f64, f64)> = None;
    for k in 0..levels {
        let pair = (&runs[k], &runs[k + 1]);
        let (coarse, fine) = match pair {
            (Ok(c), Ok(f)) => (c, f),
            (Err(e), _) | (_, Err(e)) => {
                let run = if runs[k].is_err() { k } else { k + 1 };
                return Err(ExperimentError::Run {
                    run,
                    completed: rows,
                    source: e.clone(),
                });
            }
        };
        let (eu, er) = match axis {
            Axis::Space => refine_error_space(coarse, fine)?,
            Axis::Time => refine_error_time(coarse, fine)?,
        };
        let step = match axis {
            Axis::Space => coarse.spec.h(),
            Axis::Time => coarse.time.tau(),
        };
        let (ord_u, ord_rho) = match prev_errs {
            Some((pu, pr)) => (convergence_order(pu, eu).ok(), convergence_order(pr, er).ok()),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            step,
            err_u_inf: eu,
            ord_u,
            err_rho_l2: er,
            ord_rho,
        });
        prev_errs = Some((eu, er));
    }
    Ok(rows)
}

/// Errors of a fixed-`tau` sequence of spatial grids against a reference
/// computed on a finer grid in both space and time.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementProbe {
    pub tau: f64,
    /// `(h, err_u_inf, err_rho_l2)` for each spatial grid, coarse to fine.
    pub errors: Vec<(f64, f64, f64)>,
    /// Error of the reference-grid run at the probe `tau`: the pure temporal
    /// error the sequence should level off at.
    pub plateau: (f64, f64),
}

impl RefinementProbe {
    /// True when no error grows by more than `slack` as `h` shrinks.
    pub fn non_increasing(&self, slack: f64) -> bool {
        self.errors
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 * (1.0 + slack) && w[1].2 <= w[0].2 * (1.0 + slack))
    }
}

/// Probe convergence without a grid-ratio restriction: for the fixed time
/// grid `tg` the errors against a reference run at
/// `(h_finest / 2, tau / time_ratio)` should settle onto the temporal error
/// instead of growing as `h -> 0`.
pub fn unconditional_probe(
    setup: &Setup,
    grid0: GridSpec,
    tg: TimeGrid,
    halvings: usize,
    time_ratio: usize,
    cfg: &SolverCfg,
) -> Result<RefinementProbe, ExperimentError> {
    let ref_time = TimeGrid::new(tg.horizon(), tg.steps() * time_ratio)?;
    let mut grids = vec![grid0];
    for k in 0..halvings {
        grids.push(grids[k].refined());
    }
    let ref_grid = grids[halvings].refined();

    let mut jobs: Vec<(GridSpec, TimeGrid)> = grids.iter().map(|&g| (g, tg)).collect();
    jobs.push((ref_grid, tg));
    jobs.push((ref_grid, ref_time));
    let runs: Vec<Result<Trajectory, RunError>> = jobs
        .par_iter()
        .map(|&(g, t)| run_full(setup, g, t, cfg))
        .collect();
    let mut runs = runs
        .into_iter()
        .enumerate()
        .map(|(run, r)| {
            r.map_err(|source| ExperimentError::Run {
                run,
                completed: Vec::new(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reference = runs.pop().expect("reference run");
    let plateau_run = runs.pop().expect("plateau run");
    let errors = runs
        .iter()
        .map(|t| compare_nested(t, &reference).map(|(eu, er)| (t.spec.h(), eu, er)))
        .collect::<Result<Vec<_>, _>>()?;
    let plateau = compare_nested(&plateau_run, &reference)?;
    Ok(RefinementProbe {
        tau: tg.tau(),
        errors,
        plateau,
    })
}

/// Largest odd-symmetry defect `|u(x) + u(-x)|` over every stored level (or,
/// without a field history, the snapshots and the final state).
pub fn symmetry_probe(traj: &Trajectory) -> Result<f64, ExperimentError> {
    let g = traj.spec;
    let m = g.nodes();
    if !m.is_multiple_of(2) {
        return Err(ExperimentError::Asymmetric(format!("odd node count {m}")));
    }
    if (g.x_left() + 0.5 * g.length()).abs() > 1e-12 * g.length() {
        return Err(ExperimentError::Asymmetric(format!(
            "domain starts at {} with length {}",
            g.x_left(),
            g.length()
        )));
    }
    let defect = |s: &State| -> f64 {
        // node i mirrors node M - i (1-based); storage index s = i - 1
        (0..m)
            .map(|k| {
                let mirror = (2 * m - k - 2) % m;
                (s.u[k] + s.u[mirror]).abs()
            })
            .fold(0.0, f64::max)
    };
    let stored: Vec<&State> = match &traj.levels {
        Some(levels) => levels.iter().collect(),
        None => traj
            .snapshots
            .iter()
            .map(|(_, s)| s)
            .chain(std::iter::once(&traj.final_state))
            .collect(),
    };
    Ok(stored.into_iter().map(defect).fold(0.0, f64::max))
}
