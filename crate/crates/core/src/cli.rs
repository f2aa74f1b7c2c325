//! Command-line surface: `run`, `invariants`, `converge` and `selftest`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{parse_config, ConfigError, RunConfig, Stepping};
use crate::experiments::{run_convergence_study, Axis, ConvergenceRow, ExperimentError};
use crate::grid::GridError;
use crate::invariants;
use crate::output::{self, OutputError};
use crate::scheme::{simulate, ParamError, RunError, Trajectory, TrajectoryOptions};
use crate::selftest;

#[derive(Debug, Parser)]
#[command(name = "r2ch", version, about = "Conservative finite-difference solver for the rotation two-component Camassa-Holm system")]
pub struct Cli {
    /// Worker threads for parallel studies (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one case; write the invariant series and snapshots.
    Run(RunArgs),
    /// Integrate one case; write only the invariant series.
    Invariants(RunArgs),
    /// Grid-doubling refinement study along one axis.
    Converge(ConvergeArgs),
    /// Randomized check of the discrete operator identities.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Source {
    /// Configuration file.
    #[arg(long, conflicts_with = "case", required_unless_present = "case")]
    pub config: Option<PathBuf>,
    /// Catalog case with its default settings (exA51..exF51, exA52..exE52).
    #[arg(long)]
    pub case: Option<String>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the data.
    #[arg(long)]
    pub gnuplot_script: bool,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Space,
    Time,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Space => Axis::Space,
            AxisArg::Time => Axis::Time,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Table rows; the study performs `levels + 1` runs.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub levels: u32,
}

#[derive(Debug, Args, Clone)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Case(ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Study(#[from] ExperimentError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0} identity checks failed")]
    SelfTest(usize),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

pub fn load_config(src: &Source) -> Result<RunConfig, CliError> {
    let mut cfg = match (&src.config, &src.case) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            parse_config(&text).map_err(|source| CliError::Config {
                path: path.clone(),
                source,
            })?
        }
        (None, Some(name)) => RunConfig::for_case(name).map_err(CliError::Case)?,
        (None, None) => unreachable!("clap requires --config or --case"),
    };
    if let Some(out) = &src.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Execute a parsed command line and return the summary to print.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j as usize);
    }
    let pool = pool.build().map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Run(a) => cmd_run(&load_config(&a.source)?, a.source.gnuplot_script, true),
        Command::Invariants(a) => cmd_run(&load_config(&a.source)?, a.source.gnuplot_script, false),
        Command::Converge(a) => {
            let cfg = load_config(&a.source)?;
            cmd_converge(&cfg, a.axis.into(), a.levels as usize, a.source.gnuplot_script).map(|(s, _)| s)
        }
        Command::Selftest(a) => cmd_selftest(a.seed),
    })
}

fn integrate(cfg: &RunConfig, snapshots: bool) -> Result<Trajectory, CliError> {
    let grid = cfg.grid()?;
    let tg = cfg.time_grid()?;
    let params = cfg.params()?;
    let init = cfg.initial_state()?;
    log::info!(
        "{}: M = {}, h = {}, N = {}, tau = {}, T = {}",
        cfg.case,
        grid.nodes(),
        grid.h(),
        tg.steps(),
        tg.tau(),
        tg.horizon()
    );
    let opts = TrajectoryOptions {
        store_fields: cfg.emit_fields,
        snapshot_times: if snapshots { cfg.snapshot_times.clone() } else { Vec::new() },
    };
    Ok(simulate(&init, &params, &tg, &cfg.solver(), &opts)?)
}

fn fields_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,x,u,rho\n");
    for level in traj.levels.iter().flatten() {
        let body = output::snapshot_csv(level);
        for line in body.lines().skip(1) {
            s.push_str(&crate::config::fmt_f64(level.t));
            s.push(',');
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

/// `run` (with snapshots) and `invariants` (series only).
pub fn cmd_run(cfg: &RunConfig, gnuplot: bool, snapshots: bool) -> Result<String, CliError> {
    let start = Instant::now();
    let traj = integrate(cfg, snapshots)?;
    let dir = &cfg.out_dir;
    output::write_file(dir, output::INVARIANTS_FILE, &output::invariants_csv(&traj.invariants))?;
    let mut snap_files = Vec::new();
    if snapshots {
        for (t, s) in &traj.snapshots {
            let name = output::snapshot_name(*t);
            output::write_file(dir, &name, &output::snapshot_csv(s))?;
            snap_files.push(name);
        }
        if cfg.emit_fields {
            output::write_file(dir, "fields.csv", &fields_csv(&traj))?;
        }
    }
    if gnuplot {
        output::write_file(dir, "plot.gp", &output::run_gnuplot(&snap_files))?;
    }
    let (de, dh, di) = invariants::max_drift(&traj.invariants);
    let mut summary = format!(
        "{}: {} steps, drift E {:.3e} H {:.3e} I {:.3e}, max Picard iterations {}, wall {:.2} s",
        cfg.case,
        traj.time.steps(),
        de,
        dh,
        di,
        traj.max_picard_iters,
        start.elapsed().as_secs_f64()
    );
    if !traj.warnings.is_empty() {
        summary.push_str(&format!(
            ", {} uniqueness warnings (max ratio {:.3})",
            traj.warnings.len(),
            traj.max_uniqueness_ratio
        ));
    }
    Ok(summary)
}

/// Refinement study from the configured grid and time grid.
pub fn cmd_converge(
    cfg: &RunConfig,
    axis: Axis,
    levels: usize,
    gnuplot: bool,
) -> Result<(String, Vec<ConvergenceRow>), CliError> {
    let start = Instant::now();
    let grid0 = cfg.grid()?;
    let time0 = cfg.time_grid()?;
    if let (Axis::Time, Stepping::Step(tau)) = (axis, cfg.stepping) {
        if (time0.tau() - tau).abs() > 1e-12 * tau {
            log::warn!("tau = {tau} does not divide T = {}; using {}", cfg.t_final, time0.tau());
        }
    }
    let rows = run_convergence_study(&cfg.setup()?, axis, levels, grid0, time0, &cfg.solver())?;
    output::write_file(&cfg.out_dir, &output::orders_name(axis), &output::orders_csv(&rows))?;
    if gnuplot {
        output::write_file(&cfg.out_dir, "plot.gp", &output::orders_gnuplot(axis))?;
    }
    let last = rows.last().expect("at least two rows");
    let summary = format!(
        "{} {} study: {} rows, finest err_u {:.4e} (order {}), err_rho {:.4e} (order {}), wall {:.2} s",
        cfg.case,
        axis.name(),
        rows.len(),
        last.err_u_inf,
        last.ord_u.map_or("-".into(), |o| format!("{o:.4}")),
        last.err_rho_l2,
        last.ord_rho.map_or("-".into(), |o| format!("{o:.4}")),
        start.elapsed().as_secs_f64()
    );
    Ok((summary, rows))
}

pub fn cmd_selftest(seed: u64) -> Result<String, CliError> {
    let checks = selftest::full_suite(seed);
    let mut failed = 0;
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed());
        println!(
            "{verdict} {:<20} M={:<5} cases={:<5} max={:.3e} tol={:.0e}",
            c.name, c.nodes, c.cases, c.max_defect, c.tol
        );
    }
    if failed > 0 {
        return Err(CliError::SelfTest(failed));
    }
    Ok(format!("selftest: {} checks passed (seed {seed})", checks.len()))
}
