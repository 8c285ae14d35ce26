//! JSON job configuration.
//!
//! ```json
//! {
//!   "task": "analyze",
//!   "m": 3, "n": 5, "p": 2.5, "rho": 1.0, "R": "inf",
//!   "mode": "extrinsic",
//!   "warping": {"type": "space_form", "b": -1},
//!   "bounds": {"g": "1", "h": "0.1", "lambda": "0.2"},
//!   "boundary_flux": 12.5,
//!   "grid": 101,
//!   "sweep": {"m": [2, 3], "p": [2, 3], "b": [-1], "h0": [0, 0.1], "lambda0": [0]},
//!   "numerics": {"rel_tol": 1e-10, "tail_doublings": 20, "dead_band": 0.05},
//!   "output": "report.json"
//! }
//! ```
//!
//! `R` is a number or the string `"inf"`. Missing bounds mean the intrinsic
//! data `g = 1, h = 0, lambda = 0`; missing `n` means `n = m`; missing `mode`
//! is intrinsic when the data allow it and extrinsic otherwise. All
//! expressions are parsed while loading.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityOptions;
use crate::classifier::Mode;
use crate::constellation::{Annulus, Bounds, Constellation, DEFAULT_BALANCE_GRID};
use crate::error::{Error, Result};
use crate::expr::{parse, RadialExpr};
use crate::model::{ModelSpace, WarpingFunction, WarpingSpec};
use crate::quadrature::{
    QuadratureOptions, TailOptions, DEFAULT_DEAD_BAND, DEFAULT_DOUBLINGS, DEFAULT_MAX_SUBDIVISIONS, DEFAULT_REL_TOL,
};

pub const DEFAULT_TABLE_GRID: usize = 101;
pub const DEFAULT_ORACLE_NODES: usize = 2000;
pub const DEFAULT_RESIDUAL_NODES: usize = 1024;
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Analyze,
    Capacity,
    Sweep,
    Verify,
    Table,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Analyze => "analyze",
            Task::Capacity => "capacity",
            Task::Sweep => "sweep",
            Task::Verify => "verify",
            Task::Table => "table",
        }
    }
}

/// Outer radius: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Radius {
    Finite(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    g: Option<String>,
    h: Option<String>,
    lambda: Option<String>,
}

/// Parameter axes of a sweep; absent axes take the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<f64>>,
}

/// Numerical tolerances; every field has a documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Relative tolerance of every adaptive quadrature.
    pub rel_tol: f64,
    /// Panel budget of one adaptive quadrature.
    pub max_subdivisions: usize,
    /// Tail integrals are examined up to `rho * 2^tail_doublings`.
    pub tail_doublings: u32,
    /// Half-width of the undecided slope band around -1.
    pub dead_band: f64,
    /// Number of balance samples.
    pub balance_grid: usize,
    /// Grid size of the energy-minimisation oracle.
    pub oracle_nodes: usize,
    /// Grid size of the finite-difference residual.
    pub residual_nodes: usize,
    /// Lower limit of the exponent integral in `Lambda`; defaults to `rho`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_limit: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
            tail_doublings: DEFAULT_DOUBLINGS,
            dead_band: DEFAULT_DEAD_BAND,
            balance_grid: DEFAULT_BALANCE_GRID,
            oracle_nodes: DEFAULT_ORACLE_NODES,
            residual_nodes: DEFAULT_RESIDUAL_NODES,
            lower_limit: None,
        }
    }
}

impl Numerics {
    pub fn capacity_options(&self) -> CapacityOptions {
        let quadrature = QuadratureOptions {
            rel_tol: self.rel_tol,
            max_subdivisions: self.max_subdivisions,
        };
        CapacityOptions {
            lower_limit: self.lower_limit,
            quadrature,
            tail: TailOptions {
                doublings: self.tail_doublings,
                dead_band: self.dead_band,
                quadrature,
            },
            balance_grid: self.balance_grid,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13 && self.rel_tol < 1.0) {
            return Err(Error::config("/numerics/rel_tol", format!("must lie in [1e-13, 1), got {}", self.rel_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::config("/numerics/max_subdivisions", "must be positive"));
        }
        if !(3..=60).contains(&self.tail_doublings) {
            return Err(Error::config("/numerics/tail_doublings", format!("must lie in [3, 60], got {}", self.tail_doublings)));
        }
        if !(self.dead_band > 0.0 && self.dead_band < 1.0) {
            return Err(Error::config("/numerics/dead_band", format!("must lie in (0, 1), got {}", self.dead_band)));
        }
        if self.balance_grid < 2 {
            return Err(Error::config("/numerics/balance_grid", "needs at least 2 samples"));
        }
        if self.oracle_nodes < 16 {
            return Err(Error::config("/numerics/oracle_nodes", "needs at least 16 nodes"));
        }
        if self.residual_nodes < 64 {
            return Err(Error::config("/numerics/residual_nodes", "needs at least 64 nodes"));
        }
        if let Some(l) = self.lower_limit {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config("/numerics/lower_limit", format!("must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<Task>,
    m: Option<u32>,
    n: Option<u32>,
    p: Option<f64>,
    rho: Option<f64>,
    #[serde(rename = "R")]
    outer: Option<Radius>,
    mode: Option<Mode>,
    warping: Option<WarpingSpec>,
    bounds: Option<RawBounds>,
    boundary_flux: Option<f64>,
    grid: Option<usize>,
    sweep: Option<SweepAxes>,
    #[serde(default)]
    numerics: Numerics,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

/// The constellation-level part of a job.
#[derive(Debug, Clone)]
pub struct Problem {
    pub constellation: Constellation,
    pub annulus: Annulus,
    pub mode: Mode,
    pub warping: WarpingSpec,
}

/// A validated job.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub task: Task,
    /// Absent only for `verify`.
    pub problem: Option<Problem>,
    pub boundary_flux: Option<f64>,
    pub grid: usize,
    pub sweep: Option<SweepAxes>,
    pub numerics: Numerics,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Non-fatal findings of the model-space axiom check.
    pub warnings: Vec<String>,
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<JobConfig> {
    load_config_for(path, None)
}

/// Like [`load_config`], with the task supplied on the command line.
pub fn load_config_for(path: &Path, task: Option<Task>) -> Result<JobConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, task)
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut pointer = String::new();
    for segment in path.iter() {
        use serde_path_to_error::Segment;
        match segment {
            Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => pointer.push_str(&format!("/{key}")),
            Segment::Unknown => pointer.push_str("/?"),
        }
    }
    pointer
}

/// Validates a config given as JSON text.
pub fn parse_config(text: &str, task: Option<Task>) -> Result<JobConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        Error::config(pointer, e.into_inner().to_string())
    })?;
    validate(raw, task)
}

fn expression(pointer: &str, text: &str) -> Result<RadialExpr> {
    parse(text).map_err(|e| Error::config(pointer, e.to_string()))
}

fn require<T>(value: Option<T>, pointer: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(pointer, "missing required field"))
}

fn first<T: Copy>(axis: &Option<Vec<T>>) -> Option<T> {
    axis.as_ref().and_then(|v| v.first().copied())
}

fn validate(raw: RawConfig, cli_task: Option<Task>) -> Result<JobConfig> {
    let task = match (raw.task, cli_task) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::config(
                "/task",
                format!("config task `{}` differs from requested task `{}`", a.name(), b.name()),
            ))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => return Err(Error::config("/task", "missing required field")),
    };
    raw.numerics.validate()?;

    if task == Task::Sweep {
        let axes = raw.sweep.as_ref().ok_or_else(|| Error::config("/sweep", "task sweep needs sweep axes"))?;
        validate_axes(axes)?;
    }
    if let Some(flux) = raw.boundary_flux {
        if !(flux > 0.0 && flux.is_finite()) {
            return Err(Error::config("/boundary_flux", format!("must be positive, got {flux}")));
        }
    }
    let grid = raw.grid.unwrap_or(DEFAULT_TABLE_GRID);
    if grid < 2 {
        return Err(Error::config("/grid", "needs at least 2 points"));
    }

    let needs_problem = task != Task::Verify || raw.m.is_some() || raw.warping.is_some();
    let mut warnings = Vec::new();
    let problem = if needs_problem {
        Some(build_problem(&raw, task, &mut warnings)?)
    } else {
        None
    };

    if task == Task::Table && !problem.as_ref().is_some_and(|p| p.annulus.is_finite()) {
        return Err(Error::config("/R", "task table needs a finite outer radius R"));
    }

    Ok(JobConfig {
        task,
        problem,
        boundary_flux: raw.boundary_flux,
        grid,
        sweep: raw.sweep,
        numerics: raw.numerics,
        output: raw.output,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        warnings,
    })
}

fn validate_axes(axes: &SweepAxes) -> Result<()> {
    let lens = [
        ("m", axes.m.as_ref().map(Vec::len)),
        ("p", axes.p.as_ref().map(Vec::len)),
        ("b", axes.b.as_ref().map(Vec::len)),
        ("h0", axes.h0.as_ref().map(Vec::len)),
        ("lambda0", axes.lambda0.as_ref().map(Vec::len)),
    ];
    if lens.iter().all(|(_, l)| l.is_none()) {
        return Err(Error::config("/sweep", "at least one axis is required"));
    }
    for (name, len) in lens {
        if len == Some(0) {
            return Err(Error::config(format!("/sweep/{name}"), "axis must not be empty"));
        }
    }
    if let Some(ms) = &axes.m {
        if let Some(i) = ms.iter().position(|&m| m < 2) {
            return Err(Error::config(format!("/sweep/m/{i}"), "dimension must be at least 2"));
        }
    }
    if let Some(ps) = &axes.p {
        if let Some(i) = ps.iter().position(|&p| !(p >= 2.0 && p.is_finite())) {
            return Err(Error::config(format!("/sweep/p/{i}"), "the hyperbolicity criterion requires p >= 2"));
        }
    }
    if let Some(bs) = &axes.b {
        if let Some(i) = bs.iter().position(|b| !b.is_finite()) {
            return Err(Error::config(format!("/sweep/b/{i}"), "curvature must be finite"));
        }
    }
    Ok(())
}

fn build_problem(raw: &RawConfig, task: Task, warnings: &mut Vec<String>) -> Result<Problem> {
    let axes = raw.sweep.clone().unwrap_or_default();
    let sweeping = task == Task::Sweep;
    let m = match raw.m {
        Some(m) => m,
        None if sweeping => require(first(&axes.m), "/m")?,
        None => require(None, "/m")?,
    };
    if m < 2 {
        return Err(Error::config("/m", format!("dimension must be at least 2, got {m}")));
    }
    let n = raw.n.unwrap_or(m);
    if n < m {
        return Err(Error::config("/n", format!("ambient dimension {n} is below m = {m}")));
    }
    let p = match raw.p {
        Some(p) => p,
        None if sweeping => require(first(&axes.p), "/p")?,
        None => require(None, "/p")?,
    };
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::config("/p", format!("p = {p} is below 2; the hyperbolicity criterion requires p >= 2")));
    }
    let rho = require(raw.rho, "/rho")?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::config("/rho", format!("must be positive, got {rho}")));
    }
    let outer = match &raw.outer {
        None => f64::INFINITY,
        Some(Radius::Finite(r)) => *r,
        Some(Radius::Text(t)) if t == "inf" => f64::INFINITY,
        Some(Radius::Text(t)) => return Err(Error::config("/R", format!("expected a number or \"inf\", got \"{t}\""))),
    };
    let annulus = Annulus::new(rho, outer).map_err(|e| Error::config("/R", e.to_string()))?;

    let warping = match (&raw.warping, first(&axes.b)) {
        (Some(w), _) => w.clone(),
        (None, Some(b)) if sweeping => WarpingSpec::SpaceForm { b },
        (None, _) => require(None, "/warping")?,
    };
    if sweeping && axes.b.is_some() && matches!(warping, WarpingSpec::Expression { .. }) {
        return Err(Error::config("/sweep/b", "a curvature axis needs a space-form warping"));
    }
    let warping_fn = match &warping {
        WarpingSpec::Expression { formula } => {
            WarpingFunction::custom(expression("/warping/formula", formula)?)
        }
        spec => spec.build().map_err(|e| Error::config("/warping", e.to_string()))?,
    };
    let horizon = rho * 2f64.powi(raw.numerics.tail_doublings as i32);
    let upper = annulus.outer().min(horizon);
    warnings.extend(warping_fn.check_axioms(upper).map_err(|e| Error::config("/warping", e.to_string()))?);
    let model = ModelSpace::new(m, warping_fn).map_err(|e| Error::config("/m", e.to_string()))?;

    let raw_bounds = raw.bounds.clone().unwrap_or_default();
    let bounds = Bounds {
        g: expression("/bounds/g", raw_bounds.g.as_deref().unwrap_or("1"))?,
        h: expression("/bounds/h", raw_bounds.h.as_deref().unwrap_or("0"))?,
        lambda: expression("/bounds/lambda", raw_bounds.lambda.as_deref().unwrap_or("0"))?,
    };
    let constellation = Constellation::new(n, p, model, bounds, rho).map_err(|e| Error::config("/rho", e.to_string()))?;
    constellation
        .check_tangency_bound(upper)
        .map_err(|e| Error::config("/bounds/g", e.to_string()))?;

    let sweeps_bounds = sweeping && (axes.h0.is_some() || axes.lambda0.is_some());
    let mode = match raw.mode {
        Some(mode) => mode,
        None if constellation.is_intrinsic() && !sweeps_bounds => Mode::Intrinsic,
        None => Mode::Extrinsic,
    };
    if mode == Mode::Intrinsic {
        if !constellation.is_intrinsic() {
            return Err(Error::config(
                "/mode",
                "intrinsic mode needs n = m and bounds g = 1, h = 0, lambda = 0",
            ));
        }
        if sweeps_bounds {
            return Err(Error::config("/mode", "intrinsic mode cannot sweep h0 or lambda0"));
        }
    }
    Ok(Problem {
        constellation,
        annulus,
        mode,
        warping,
    })
}
