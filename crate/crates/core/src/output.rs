//! Plain-text outputs. Numbers use the shortest decimal that parses back to
//! the same `f64`, so files are both exact and stable.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::fmt_f64;
use crate::experiments::{Axis, ConvergenceRow};
use crate::invariants::InvariantSample;
use crate::scheme::State;

pub const INVARIANTS_FILE: &str = "invariants.csv";
pub const INVARIANTS_HEADER: &str = "t,E,H,I,E_shift,H_shift,picard_iters";
pub const SNAPSHOT_HEADER: &str = "x,u,rho";
pub const ORDERS_HEADER: &str = "step,err_u_inf,ord_u,err_rho_l2,ord_rho";

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

pub fn invariants_csv(samples: &[InvariantSample]) -> String {
    let mut s = String::with_capacity(64 * (samples.len() + 1));
    s.push_str(INVARIANTS_HEADER);
    s.push('\n');
    for r in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.energy),
            fmt_f64(r.momentum),
            fmt_f64(r.mass),
            fmt_f64(r.energy_shift),
            fmt_f64(r.momentum_shift),
            r.picard_iters
        );
    }
    s
}

pub fn snapshot_csv(state: &State) -> String {
    let spec = state.spec();
    let mut s = String::with_capacity(48 * (spec.nodes() + 1));
    s.push_str(SNAPSHOT_HEADER);
    s.push('\n');
    for k in 0..spec.nodes() {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(spec.x(k)),
            fmt_f64(state.u[k]),
            fmt_f64(state.rho[k])
        );
    }
    s
}

/// `snapshot_t<t>.csv`, with `t` in its shortest plain form.
pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

pub fn orders_name(axis: Axis) -> String {
    format!("orders_{}.csv", axis.name())
}

/// Missing orders (first row, vanishing errors) are empty fields.
pub fn orders_csv(rows: &[ConvergenceRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut s = String::new();
    s.push_str(ORDERS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.step),
            fmt_f64(r.err_u_inf),
            opt(r.ord_u),
            fmt_f64(r.err_rho_l2),
            opt(r.ord_rho)
        );
    }
    s
}

/// Gnuplot script for the invariant series and any snapshots of a run.
pub fn run_gnuplot(snapshot_files: &[String]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n");
    let _ = writeln!(s, "set terminal pngcairo size 900,600\nset output 'invariants.png'");
    let _ = writeln!(
        s,
        "plot '{INVARIANTS_FILE}' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines"
    );
    for f in snapshot_files {
        let png = f.trim_end_matches(".csv");
        let _ = writeln!(s, "set xlabel 'x'\nset output '{png}.png'");
        let _ = writeln!(s, "plot '{f}' using 1:2 with lines, '' using 1:3 with lines");
    }
    s
}

/// Log-log gnuplot script for a refinement table.
pub fn orders_gnuplot(axis: Axis) -> String {
    let file = orders_name(axis);
    let png = file.trim_end_matches(".csv");
    format!(
        "set datafile separator ','\nset key autotitle columnhead left\nset logscale xy\n\
         set xlabel '{}'\nset terminal pngcairo size 900,600\nset output '{png}.png'\n\
         plot '{file}' using 1:2 with linespoints, '' using 1:4 with linespoints\n",
        match axis {
            Axis::Space => "h",
            Axis::Time => "tau",
        }
    )
}

/// Write `contents` to `dir/name`, creating `dir` if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| OutputError {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
