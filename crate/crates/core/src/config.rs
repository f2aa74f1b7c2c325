//! Run configuration files.
//!
//! ```text
//! # Case A with a finer grid
//! case = exA51
//! h = 0.1
//! snapshot_times = 5, 10
//! ```
//!
//! One `key = value` per line, `#` starts a comment, lists are
//! comma-separated. A preset fills every field and any key overrides it;
//! without a preset the domain, grid, time grid and initial data are
//! mandatory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::experiments::{preset, CasePreset, InitCondition, Setup};
use crate::grid::{GridError, GridSpec};
use crate::scheme::{ParamError, PhysParams, SolverCfg, State, TimeGrid};

pub const CUSTOM: &str = "custom";

pub const KEYS: &[&str] = &[
    "case",
    "init",
    "a",
    "x_left",
    "length",
    "m",
    "h",
    "n",
    "tau",
    "t_final",
    "kappa",
    "sigma",
    "mu",
    "omega",
    "tol",
    "max_iter",
    "snapshot_times",
    "out_dir",
    "emit_fields",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("missing keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{}: `{key}` {msg}", match line { Some(l) => format!("line {l}"), None => "preset".to_string() })]
    Constraint { key: String, line: Option<usize>, msg: String },
}

/// Spatial resolution as given: a node count or a target spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Nodes(usize),
    Spacing(f64),
}

/// Temporal resolution as given: a step count or a target step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Steps(usize),
    Step(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: String,
    pub init: InitCondition,
    pub x_left: f64,
    pub length: f64,
    pub resolution: Resolution,
    pub stepping: Stepping,
    pub t_final: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub mu: f64,
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub snapshot_times: Vec<f64>,
    pub out_dir: PathBuf,
    pub emit_fields: bool,
}

impl RunConfig {
    /// Every field taken from a catalog preset.
    pub fn from_preset(c: &CasePreset) -> Self {
        let solver = SolverCfg::default();
        Self {
            case: c.name.to_string(),
            init: c.init,
            x_left: c.x_left,
            length: c.length,
            resolution: Resolution::Spacing(c.default_h),
            stepping: Stepping::Step(c.default_tau),
            t_final: c.horizon,
            kappa: c.kappa,
            sigma: c.sigma,
            mu: c.mu,
            omega: c.omega,
            tol: solver.picard_tol,
            max_iter: solver.max_picard_iters,
            snapshot_times: c.snapshot_times.to_vec(),
            out_dir: PathBuf::from("out"),
            emit_fields: false,
        }
    }

    pub fn for_case(name: &str) -> Result<Self, ConfigError> {
        preset(name)
            .map(|c| Self::from_preset(&c))
            .map_err(|_| ConfigError::Constraint {
                key: "case".into(),
                line: None,
                msg: format!("unknown case {name:?}"),
            })
    }

    pub fn grid(&self) -> Result<GridSpec, GridError> {
        match self.resolution {
            Resolution::Nodes(m) => GridSpec::new(self.x_left, self.length, m),
            Resolution::Spacing(h) => GridSpec::with_spacing(self.x_left, self.length, h),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ParamError> {
        match self.stepping {
            Stepping::Steps(n) => TimeGrid::new(self.t_final, n),
            Stepping::Step(tau) => TimeGrid::with_step(self.t_final, tau),
        }
    }

    pub fn params(&self) -> Result<PhysParams, ParamError> {
        PhysParams::new(self.kappa, self.sigma, self.mu, self.omega)
    }

    pub fn setup(&self) -> Result<Setup, ParamError> {
        Ok(Setup {
            init: self.init,
            x_left: self.x_left,
            length: self.length,
            params: self.params()?,
        })
    }

    pub fn solver(&self) -> SolverCfg {
        SolverCfg {
            picard_tol: self.tol,
            max_picard_iters: self.max_iter,
            ..SolverCfg::default()
        }
    }

    pub fn initial_state(&self) -> Result<State, GridError> {
        Ok(self.init.build(self.grid()?))
    }

    /// A config file that parses back to `self`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("case", self.case.clone());
        kv("init", self.init.tag().to_string());
        if let InitCondition::DamBreak { a } = self.init {
            kv("a", fmt_f64(a));
        }
        kv("x_left", fmt_f64(self.x_left));
        kv("length", fmt_f64(self.length));
        match self.resolution {
            Resolution::Nodes(m) => kv("m", m.to_string()),
            Resolution::Spacing(h) => kv("h", fmt_f64(h)),
        }
        match self.stepping {
            Stepping::Steps(n) => kv("n", n.to_string()),
            Stepping::Step(tau) => kv("tau", fmt_f64(tau)),
        }
        kv("t_final", fmt_f64(self.t_final));
        kv("kappa", fmt_f64(self.kappa));
        kv("sigma", fmt_f64(self.sigma));
        kv("mu", fmt_f64(self.mu));
        kv("omega", fmt_f64(self.omega));
        kv("tol", fmt_f64(self.tol));
        kv("max_iter", self.max_iter.to_string());
        kv(
            "snapshot_times",
            self.snapshot_times.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(", "),
        );
        kv("out_dir", self.out_dir.display().to_string());
        kv("emit_fields", self.emit_fields.to_string());
        s
    }
}

/// Shortest decimal that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

struct Entry {
    line: usize,
    value: String,
}

fn value_err(key: &str, e: &Entry, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        line: e.line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = e.value.parse().map_err(|_| value_err(key, e, format!("{:?} is not a number", e.value)))?;
    if !v.is_finite() {
        return Err(value_err(key, e, "must be finite"));
    }
    Ok(v)
}

fn parse_usize(key: &str, e: &Entry) -> Result<usize, ConfigError> {
    e.value
        .parse()
        .map_err(|_| value_err(key, e, format!("{:?} is not a non-negative integer", e.value)))
}

fn parse_bool(key: &str, e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(value_err(key, e, format!("{other:?} is not a boolean"))),
    }
}

fn parse_list(key: &str, e: &Entry) -> Result<Vec<f64>, ConfigError> {
    if e.value.trim().is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| value_err(key, e, format!("{t:?} is not a finite number")))
        })
        .collect()
}

fn tokenize(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut map: HashMap<String, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        if let Some(prev) = map.get(&key) {
            return Err(ConfigError::Duplicate {
                line,
                key,
                first: prev.line,
            });
        }
        map.insert(
            key,
            Entry {
                line,
                value: v.trim().to_string(),
            },
        );
    }
    Ok(map)
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let map = tokenize(text)?;
    let line_of = |k: &str| map.get(k).map(|e| e.line);

    let case = map.get("case").map(|e| e.value.clone());
    let mut cfg = match case.as_deref() {
        Some(CUSTOM) | None => {
            let mut missing: Vec<String> = ["init", "x_left", "length", "t_final"]
                .iter()
                .filter(|k| !map.contains_key(**k))
                .map(|k| k.to_string())
                .collect();
            if !map.contains_key("m") && !map.contains_key("h") {
                missing.push("m or h".into());
            }
            if !map.contains_key("n") && !map.contains_key("tau") {
                missing.push("n or tau".into());
            }
            if !missing.is_empty() {
                if case.is_none() {
                    missing.insert(0, "case (or a custom setup)".into());
                }
                return Err(ConfigError::Missing(missing));
            }
            let solver = SolverCfg::default();
            RunConfig {
                case: CUSTOM.to_string(),
                init: InitCondition::Zero,
                x_left: 0.0,
                length: 0.0,
                resolution: Resolution::Nodes(0),
                stepping: Stepping::Steps(0),
                t_final: 0.0,
                kappa: 0.0,
                sigma: 1.0,
                mu: 0.0,
                omega: 0.0,
                tol: solver.picard_tol,
                max_iter: solver.max_picard_iters,
                snapshot_times: Vec::new(),
                out_dir: PathBuf::from("out"),
                emit_fields: false,
            }
        }
        Some(name) => {
            let e = &map["case"];
            let c = preset(name).map_err(|_| value_err("case", e, format!("unknown case {name:?}")))?;
            RunConfig::from_preset(&c)
        }
    };

    if map.contains_key("m") && map.contains_key("h") {
        return Err(ConfigError::Constraint {
            key: "h".into(),
            line: line_of("h"),
            msg: "conflicts with `m`; give only one".into(),
        });
    }
    if map.contains_key("n") && map.contains_key("tau") {
        return Err(ConfigError::Constraint {
            key: "tau".into(),
            line: line_of("tau"),
            msg: "conflicts with `n`; give only one".into(),
        });
    }

    if let Some(e) = map.get("init") {
        cfg.init = match e.value.as_str() {
            "dam_break" => InitCondition::DamBreak {
                a: match cfg.init {
                    InitCondition::DamBreak { a } => a,
                    _ => f64::NAN,
                },
            },
            "peakon" => InitCondition::PeakonAntipeakon,
            "zero" => InitCondition::Zero,
            other => return Err(value_err("init", e, format!("{other:?} is not one of dam_break, peakon, zero"))),
        };
    }
    if let Some(e) = map.get("a") {
        let a = parse_f64("a", e)?;
        match cfg.init {
            InitCondition::DamBreak { .. } => cfg.init = InitCondition::DamBreak { a },
            _ => return Err(value_err("a", e, "only applies to init = dam_break")),
        }
    }
    if let InitCondition::DamBreak { a } = cfg.init {
        if a.is_nan() {
            return Err(ConfigError::Missing(vec!["a".into()]));
        }
    }

    for (key, slot) in [
        ("x_left", &mut cfg.x_left),
        ("length", &mut cfg.length),
        ("t_final", &mut cfg.t_final),
        ("kappa", &mut cfg.kappa),
        ("sigma", &mut cfg.sigma),
        ("mu", &mut cfg.mu),
        ("omega", &mut cfg.omega),
        ("tol", &mut cfg.tol),
    ] {
        if let Some(e) = map.get(key) {
            *slot = parse_f64(key, e)?;
        }
    }
    if let Some(e) = map.get("m") {
        cfg.resolution = Resolution::Nodes(parse_usize("m", e)?);
    }
    if let Some(e) = map.get("h") {
        cfg.resolution = Resolution::Spacing(parse_f64("h", e)?);
    }
    if let Some(e) = map.get("n") {
        cfg.stepping = Stepping::Steps(parse_usize("n", e)?);
    }
    if let Some(e) = map.get("tau") {
        cfg.stepping = Stepping::Step(parse_f64("tau", e)?);
    }
    if let Some(e) = map.get("max_iter") {
        cfg.max_iter = parse_usize("max_iter", e)?;
    }
    if let Some(e) = map.get("snapshot_times") {
        cfg.snapshot_times = parse_list("snapshot_times", e)?;
    }
    if let Some(e) = map.get("out_dir") {
        if e.value.is_empty() {
            return Err(value_err("out_dir", e, "empty path"));
        }
        cfg.out_dir = PathBuf::from(&e.value);
    }
    if let Some(e) = map.get("emit_fields") {
        cfg.emit_fields = parse_bool("emit_fields", e)?;
    }

    validate(&cfg, &line_of)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, line_of: &dyn Fn(&str) -> Option<usize>) -> Result<(), ConfigError> {
    let fail = |key: &str, msg: String| ConfigError::Constraint {
        key: key.to_string(),
        line: line_of(key),
        msg,
    };
    if let Err(e) = cfg.params() {
        let key = match e {
            ParamError::Omega(_) => "omega",
            ParamError::Coupling(_) => {
                if line_of("kappa").is_some() && line_of("omega").is_none() {
                    "kappa"
                } else {
                    "omega"
                }
            }
            ParamError::Sigma(_) => "sigma",
            _ => "kappa",
        };
        return Err(fail(key, e.to_string()));
    }
    if !(cfg.length > 0.0) {
        return Err(fail("length", format!("must be positive, got {}", cfg.length)));
    }
    if let Err(e) = cfg.grid() {
        let key = match cfg.resolution {
            Resolution::Nodes(_) => "m",
            Resolution::Spacing(_) => "h",
        };
        return Err(fail(key, e.to_string()));
    }
    if !(cfg.t_final > 0.0) {
        return Err(fail("t_final", format!("must be positive, got {}", cfg.t_final)));
    }
    if let Err(e) = cfg.time_grid() {
        let key = match cfg.stepping {
            Stepping::Steps(_) => "n",
            Stepping::Step(_) => "tau",
        };
        return Err(fail(key, e.to_string()));
    }
    if !(cfg.tol > 0.0) {
        return Err(fail("tol", format!("must be positive, got {}", cfg.tol)));
    }
    if cfg.max_iter == 0 {
        return Err(fail("max_iter", "must be at least 1".into()));
    }
    if let Some(t) = cfg.snapshot_times.iter().find(|t| !(0.0..=cfg.t_final).contains(*t)) {
        return Err(fail("snapshot_times", format!("{t} lies outside [0, {}]", cfg.t_final)));
    }
    Ok(())
}
