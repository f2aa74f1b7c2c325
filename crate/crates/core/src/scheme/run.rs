//! Time loop and the observers that record what a run produces.

use thiserror::Error;

use super::{picard_step, uniqueness_guard, PhysParams, SolverCfg, State, StepError, TimeGrid, UniquenessWarning};
use crate::grid::{GridError, GridSpec};
use crate::invariants::{self, InvariantSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("step {step} failed: {source}")]
    Step { step: usize, source: StepError },
    #[error("initial state must start at t = 0 (got {0})")]
    InitialTime(f64),
    #[error("initial state is not finite")]
    NonFinite,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Params(#[from] super::ParamError),
}

/// What an observer sees after level `index` has been computed. The initial
/// level is reported with `index = 0`, `iters = 0` and no midpoint.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub index: usize,
    pub state: &'a State,
    pub iters: usize,
    pub mid_u: Option<&'a crate::grid::GridFn>,
    pub tau: f64,
}

pub trait StepObserver {
    fn observe(&mut self, rec: &StepRecord<'_>);
}

/// Records the invariant series, one sample per level.
#[derive(Debug, Clone)]
pub struct InvariantRecorder {
    params: PhysParams,
    pub samples: Vec<InvariantSample>,
}

impl InvariantRecorder {
    pub fn new(params: PhysParams) -> Self {
        Self {
            params,
            samples: Vec::new(),
        }
    }
}

impl StepObserver for InvariantRecorder {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        self.samples
            .push(invariants::sample(rec.state, &self.params, rec.iters));
    }
}

/// Keeps every level.
#[derive(Debug, Clone, Default)]
pub struct FieldRecorder {
    pub levels: Vec<State>,
}

impl StepObserver for FieldRecorder {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        self.levels.push(rec.state.clone());
    }
}

/// Keeps the levels nearest to the requested times.
#[derive(Debug, Clone)]
pub struct SnapshotRecorder {
    targets: Vec<(usize, f64)>,
    pub snapshots: Vec<(f64, State)>,
}

impl SnapshotRecorder {
    pub fn new(times: &[f64], tg: &TimeGrid) -> Self {
        let targets = times
            .iter()
            .map(|&t| (((t / tg.tau()).round().max(0.0) as usize).min(tg.steps()), t))
            .collect();
        Self {
            targets,
            snapshots: Vec::new(),
        }
    }
}

impl StepObserver for SnapshotRecorder {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        for &(idx, t) in &self.targets {
            if idx == rec.index {
                self.snapshots.push((t, rec.state.clone()));
            }
        }
    }
}

/// Watches the uniqueness ratio of the midpoint velocity.
#[derive(Debug, Clone, Default)]
pub struct UniquenessMonitor {
    pub warnings: Vec<UniquenessWarning>,
    pub max_ratio: f64,
}

impl StepObserver for UniquenessMonitor {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        let Some(mid) = rec.mid_u else { return };
        let t_mid = rec.state.t - 0.5 * rec.tau;
        self.max_ratio = self.max_ratio.max(super::uniqueness_ratio(mid, rec.tau));
        if let Some(w) = uniqueness_guard(mid, rec.tau, t_mid) {
            log::warn!(
                "uniqueness ratio {:.3} >= 1 at t = {:.6}; the continuity solve may not be unique",
                w.ratio,
                w.t
            );
            self.warnings.push(w);
        }
    }
}

/// Advance `init` through every level of `tg`, handing each level to the
/// observers in order. Returns the final state and the largest Picard count.
pub fn run(
    init: &State,
    p: &PhysParams,
    tg: &TimeGrid,
    cfg: &SolverCfg,
    observers: &mut [&mut dyn StepObserver],
) -> Result<(State, usize), RunError> {
    cfg.validate()?;
    if init.t != 0.0 {
        return Err(RunError::InitialTime(init.t));
    }
    if !init.is_finite() {
        return Err(RunError::NonFinite);
    }
    if init.u.spec() != init.rho.spec() {
        return Err(GridError::SpecMismatch.into());
    }
    let tau = tg.tau();
    let first = StepRecord {
        index: 0,
        state: init,
        iters: 0,
        mid_u: None,
        tau,
    };
    for o in observers.iter_mut() {
        o.observe(&first);
    }
    let mut state = init.clone();
    let mut max_iters = 0;
    for n in 1..=tg.steps() {
        let step = picard_step(&state, p, tau, cfg).map_err(|source| RunError::Step { step: n, source })?;
        let mut next = step.next;
        next.t = tg.time(n);
        if !next.is_finite() {
            return Err(RunError::Step {
                step: n,
                source: StepError::NonFinite,
            });
        }
        max_iters = max_iters.max(step.iters);
        let rec = StepRecord {
            index: n,
            state: &next,
            iters: step.iters,
            mid_u: Some(&step.mid_u),
            tau,
        };
        for o in observers.iter_mut() {
            o.observe(&rec);
        }
        state = next;
    }
    Ok((state, max_iters))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryOptions {
    pub store_fields: bool,
    pub snapshot_times: Vec<f64>,
}

/// Everything a run recorded.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: GridSpec,
    pub time: TimeGrid,
    /// Every level, only when requested.
    pub levels: Option<Vec<State>>,
    pub snapshots: Vec<(f64, State)>,
    pub invariants: Vec<InvariantSample>,
    pub warnings: Vec<UniquenessWarning>,
    pub max_uniqueness_ratio: f64,
    pub max_picard_iters: usize,
    pub final_state: State,
}

/// [`run`] with the standard recorders attached.
pub fn simulate(
    init: &State,
    p: &PhysParams,
    tg: &TimeGrid,
    cfg: &SolverCfg,
    opts: &TrajectoryOptions,
) -> Result<Trajectory, RunError> {
    let mut inv = InvariantRecorder::new(*p);
    let mut snaps = SnapshotRecorder::new(&opts.snapshot_times, tg);
    let mut guard = UniquenessMonitor::default();
    let mut fields = FieldRecorder::default();
    let (final_state, max_iters) = {
        let mut obs: Vec<&mut dyn StepObserver> = vec![&mut inv, &mut snaps, &mut guard];
        if opts.store_fields {
            obs.push(&mut fields);
        }
        run(init, p, tg, cfg, &mut obs)?
    };
    Ok(Trajectory {
        spec: *init.spec(),
        time: *tg,
        levels: opts.store_fields.then_some(fields.levels),
        snapshots: snaps.snapshots,
        invariants: inv.samples,
        warnings: guard.warnings,
        max_uniqueness_ratio: guard.max_ratio,
        max_picard_iters: max_iters,
        final_state,
    })
}
