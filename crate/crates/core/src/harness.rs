//! Convergence sweeps over structured meshes and their CSV tables.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{assemble, AssemblyOptions, SparseSystem};
use crate::config::{load_problem, KeyValues};
use crate::error::{invalid, Error, Result};
use crate::estimate::{
    a_posteriori_estimate, elementwise_residual, l2_error, observed_order_between,
    EstimatorConstants,
};
use crate::linalg::{solve, SolveMethod, SolveOptions, SolveReport};
use crate::mesh::{Diagonal, Mesh};
use crate::problem::ProblemDefinition;
use crate::quadrature::QuadratureRule;
use crate::stabilization::compute_tau_elementwise;

/// First line of every convergence table.
pub const CSV_VERSION_LINE: &str = "# sgs-fem convergence table v1";
pub const CSV_COLUMNS: &str =
    "n,method,l2_error,observed_order,tau_used,estimate,effectivity,wall_time,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Galerkin,
    Sgs,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Method::Galerkin),
            "sgs" => Ok(Method::Sgs),
            other => Err(invalid(
                "method",
                format!("unknown method `{other}` (expected galerkin or sgs)"),
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Galerkin => "galerkin",
            Method::Sgs => "sgs",
        })
    }
}

/// A built-in case or a problem file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseSpec {
    Builtin(String),
    Custom(PathBuf),
}

impl CaseSpec {
    /// `case1` and `case2` are built in; anything else is read as a path.
    pub fn parse(s: &str) -> Self {
        match s {
            "case1" | "case2" => CaseSpec::Builtin(s.to_string()),
            path => CaseSpec::Custom(PathBuf::from(path)),
        }
    }

    pub fn problem(&self) -> Result<ProblemDefinition> {
        match self {
            CaseSpec::Builtin(name) => ProblemDefinition::builtin(name),
            CaseSpec::Custom(path) => load_problem(path),
        }
    }
}

impl fmt::Display for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseSpec::Builtin(name) => f.write_str(name),
            CaseSpec::Custom(path) => write!(f, "{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseSpec,
    pub method: Method,
    /// Subdivisions per side, strictly increasing.
    pub levels: Vec<usize>,
    /// Assembly quadrature degree.
    pub quad_degree: usize,
    /// Quadrature degree for errors and residuals.
    pub error_quad_degree: usize,
    pub constants: EstimatorConstants,
    pub solver: SolveOptions,
    /// Replaces the computed tau on every element (SGS only).
    pub tau_override: Option<f64>,
    pub diagonal: Diagonal,
    /// Keep the `grad D` terms when applying the operator to P1 functions.
    pub coefficient_gradients: bool,
    pub parallel_assembly: bool,
    pub parallel_levels: bool,
    /// Fill the wall-time column. Off by default so tables are reproducible.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseSpec::Builtin("case1".into()),
            method: Method::Sgs,
            levels: vec![10, 20, 40, 80],
            quad_degree: 4,
            error_quad_degree: 5,
            constants: EstimatorConstants::default(),
            solver: SolveOptions::default(),
            tau_override: None,
            diagonal: Diagonal::default(),
            coefficient_gradients: true,
            parallel_assembly: false,
            parallel_levels: false,
            timing: false,
            output: None,
        }
    }
}

const RUN_KEYS: &[&str] = &[
    "case",
    "method",
    "levels",
    "quad_degree",
    "error_quad_degree",
    "c_interp",
    "d_bar",
    "solver",
    "solver_tol",
    "pivot_threshold",
    "tau_override",
    "diagonal",
    "coefficient_gradients",
    "parallel_assembly",
    "parallel_levels",
    "timing",
    "output",
];

/// `10,20,40` or `10 20 40`
pub fn parse_levels(s: &str) -> Result<Vec<usize>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| {
            w.parse()
                .map_err(|_| invalid("levels", format!("`{w}` is not a positive integer")))
        })
        .collect()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(invalid("levels", "at least one level is required"));
        }
        if self.levels[0] == 0 {
            return Err(invalid("levels", "subdivisions must be positive"));
        }
        if let Some(w) = self.levels.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(
                "levels",
                format!("must be strictly increasing, got {} then {}", w[0], w[1]),
            ));
        }
        QuadratureRule::with_degree(self.quad_degree)?;
        QuadratureRule::with_degree(self.error_quad_degree)?;
        EstimatorConstants::new(self.constants.c_interp, self.constants.d_bar)?;
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver_tol", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.solver.pivot_threshold) {
            return Err(invalid("pivot_threshold", "must lie in [0, 1]"));
        }
        if let Some(t) = self.tau_override {
            if !(t >= 0.0) {
                return Err(invalid("tau_override", format!("must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    /// Applies the keys of a run config file on top of `self`.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.reject_unknown(RUN_KEYS)?;
        if let Some(c) = kv.get("case") {
            self.case = CaseSpec::parse(c);
        }
        if let Some(m) = kv.parse_value("method")? {
            self.method = m;
        }
        if let Some(l) = kv.get("levels") {
            self.levels = parse_levels(l)?;
        }
        if let Some(d) = kv.parse_value("quad_degree")? {
            self.quad_degree = d;
        }
        if let Some(d) = kv.parse_value("error_quad_degree")? {
            self.error_quad_degree = d;
        }
        if let Some(c) = kv.parse_value("c_interp")? {
            self.constants.c_interp = c;
        }
        if let Some(d) = kv.parse_value("d_bar")? {
            self.constants.d_bar = d;
        }
        match kv.get("solver") {
            Some("direct") => self.solver.method = SolveMethod::Direct,
            Some("iterative") => self.solver.method = SolveMethod::Iterative,
            Some(other) => {
                return Err(Error::Parse {
                    line: kv.line("solver"),
                    message: format!("unknown solver `{other}` (expected direct or iterative)"),
                })
            }
            None => {}
        }
        if let Some(t) = kv.parse_value("solver_tol")? {
            self.solver.tol = t;
        }
        if let Some(t) = kv.parse_value("pivot_threshold")? {
            self.solver.pivot_threshold = t;
        }
        if let Some(t) = kv.parse_value("tau_override")? {
            self.tau_override = Some(t);
        }
        if let Some(d) = kv.parse_value("diagonal")? {
            self.diagonal = d;
        }
        if let Some(b) = kv.parse_value("coefficient_gradients")? {
            self.coefficient_gradients = b;
        }
        if let Some(b) = kv.parse_value("parallel_assembly")? {
            self.parallel_assembly = b;
        }
        if let Some(b) = kv.parse_value("parallel_levels")? {
            self.parallel_levels = b;
        }
        if let Some(b) = kv.parse_value("timing")? {
            self.timing = b;
        }
        if let Some(o) = kv.get("output") {
            self.output = Some(PathBuf::from(o));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&KeyValues::read(path)?)?;
        Ok(cfg)
    }

    fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            coefficient_gradients: self.coefficient_gradients,
            parallel: self.parallel_assembly,
        }
    }
}

/// Per-element tau for a method: zero for Galerkin, the override if given,
/// otherwise the closed-form value from the global coefficient bounds.
pub fn element_tau(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    method: Method,
    tau_override: Option<f64>,
) -> Result<Vec<f64>> {
    match (method, tau_override) {
        (Method::Galerkin, _) => Ok(vec![0.0; mesh.n_elements()]),
        (Method::Sgs, Some(t)) => Ok(vec![t; mesh.n_elements()]),
        (Method::Sgs, None) => compute_tau_elementwise(mesh, &problem.sup_bounds()),
    }
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub mesh: Mesh,
    pub tau: Vec<f64>,
    pub system: SparseSystem,
    /// Nodal values including the boundary.
    pub solution: Vec<f64>,
    pub solve_report: SolveReport,
    pub residuals: Vec<f64>,
    pub element_sizes: Vec<f64>,
    pub estimate: f64,
    /// `None` without an exact solution.
    pub l2_error: Option<f64>,
}

impl LevelSolution {
    pub fn effectivity(&self) -> Option<f64> {
        self.l2_error.map(|e| self.estimate / e)
    }
}

/// Builds, assembles, solves and post-processes one level.
pub fn solve_level(
    problem: &ProblemDefinition,
    cfg: &RunConfig,
    n: usize,
) -> Result<LevelSolution> {
    let mesh = Mesh::structured_with(n, cfg.diagonal)?;
    let rule = QuadratureRule::with_degree(cfg.quad_degree)?;
    let error_rule = QuadratureRule::with_degree(cfg.error_quad_degree)?;
    let tau = element_tau(&mesh, problem, cfg.method, cfg.tau_override)?;
    let tau_arg = match cfg.method {
        Method::Galerkin => None,
        Method::Sgs => Some(tau.as_slice()),
    };
    let system = assemble(&mesh, problem, tau_arg, &rule, &cfg.assembly_options())?;
    let (free, solve_report) = solve(&system.matrix, &system.rhs, &cfg.solver)?;
    let solution = system.expand(&free);
    let residuals = elementwise_residual(
        &mesh,
        problem,
        &solution,
        &error_rule,
        cfg.coefficient_gradients,
    )?;
    let element_sizes = (0..mesh.n_elements())
        .map(|e| mesh.element_geometry(e).map(|g| g.diameter))
        .collect::<Result<Vec<_>>>()?;
    let estimate = a_posteriori_estimate(&residuals, &element_sizes, &tau, &cfg.constants)?;
    let l2 = problem
        .exact
        .as_ref()
        .map(|c| l2_error(&mesh, &solution, c.as_ref(), &error_rule))
        .transpose()?;
    Ok(LevelSolution {
        mesh,
        tau,
        system,
        solution,
        solve_report,
        residuals,
        element_sizes,
        estimate,
        l2_error: l2,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    /// The formulation actually assembled. SGS with tau identically zero is
    /// the Galerkin method and is recorded as such.
    pub method: Method,
    pub l2_error: Option<f64>,
    /// Present iff a coarser level with an error exists.
    pub observed_order: Option<f64>,
    /// Largest element tau (zero for Galerkin).
    pub tau_used: Option<f64>,
    pub estimate: Option<f64>,
    pub effectivity: Option<f64>,
    /// Seconds; only filled when timing is enabled.
    pub wall_time: Option<f64>,
    /// `None` on success, otherwise the failure message.
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

fn effective_method(method: Method, tau: &[f64]) -> Method {
    if method == Method::Sgs && tau.iter().all(|&t| t == 0.0) {
        Method::Galerkin
    } else {
        method
    }
}

fn record_level(problem: &ProblemDefinition, cfg: &RunConfig, n: usize) -> ConvergenceRecord {
    let start = Instant::now();
    let outcome = solve_level(problem, cfg, n);
    let wall_time = cfg.timing.then(|| start.elapsed().as_secs_f64());
    match outcome {
        Ok(level) => ConvergenceRecord {
            n,
            method: effective_method(cfg.method, &level.tau),
            l2_error: level.l2_error,
            observed_order: None,
            tau_used: Some(level.tau.iter().copied().fold(0.0, f64::max)),
            estimate: Some(level.estimate),
            effectivity: level.effectivity(),
            wall_time,
            failure: None,
        },
        Err(e) => ConvergenceRecord {
            n,
            method: cfg.method,
            l2_error: None,
            observed_order: None,
            tau_used: None,
            estimate: None,
            effectivity: None,
            wall_time,
            failure: Some(e.to_string()),
        },
    }
}

/// Runs every level. A failing level is recorded and the sweep continues.
pub fn run_convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let problem = cfg.case.problem()?;
    let mut records: Vec<ConvergenceRecord> = if cfg.parallel_levels {
        cfg.levels
            .par_iter()
            .map(|&n| record_level(&problem, cfg, n))
            .collect()
    } else {
        cfg.levels
            .iter()
            .map(|&n| record_level(&problem, cfg, n))
            .collect()
    };
    for i in 1..records.len() {
        let (coarse, fine) = (&records[i - 1], &records[i]);
        if let (Some(ec), Some(ef)) = (coarse.l2_error, fine.l2_error) {
            records[i].observed_order = observed_order_between(ec, ef, coarse.n, fine.n).ok();
        }
    }
    Ok(records)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes the version line, a line naming the case, the header and one row per record.
pub fn write_csv<W: Write>(
    case: &CaseSpec,
    records: &[ConvergenceRecord],
    mut out: W,
) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "# case={case}")?;
    writeln!(out, "{CSV_COLUMNS}")?;
    for r in records {
        let status = match &r.failure {
            None => "ok".to_string(),
            // Keep the row parseable: no separators inside the message.
            Some(msg) => format!("failed: {}", msg.replace([',', '\n', '\r'], ";")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.method,
            opt(r.l2_error),
            opt(r.observed_order),
            opt(r.tau_used),
            opt(r.estimate),
            opt(r.effectivity),
            opt(r.wall_time),
            status
        )?;
    }
    Ok(())
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<ConvergenceRecord>> {
    let mut records = Vec::new();
    let mut saw_version = false;
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if line.starts_with('#') {
            saw_version |= line == CSV_VERSION_LINE;
            continue;
        }
        if !saw_header {
            if !saw_version {
                return Err(err("missing version line".into()));
            }
            if line != CSV_COLUMNS {
                return Err(err(format!("unexpected header `{line}`")));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(9, ',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| err(format!("bad number `{s}`")))
            }
        };
        records.push(ConvergenceRecord {
            n: f[0].parse().map_err(|_| err(format!("bad n `{}`", f[0])))?,
            method: f[1].parse()?,
            l2_error: num(f[2])?,
            observed_order: num(f[3])?,
            tau_used: num(f[4])?,
            estimate: num(f[5])?,
            effectivity: num(f[6])?,
            wall_time: num(f[7])?,
            failure: match f[8] {
                "ok" => None,
                s => Some(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
            },
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 0,
            message: "empty table".into(),
        });
    }
    Ok(records)
}

/// Runs the sweep and writes the table to `cfg.output` (if set) or `out`.
pub fn run_and_write<W: Write>(cfg: &RunConfig, out: W) -> Result<Vec<ConvergenceRecord>> {
    let records = run_convergence(cfg)?;
    match &cfg.output {
        Some(path) => write_csv(&cfg.case, &records, std::fs::File::create(path)?)?,
        None => write_csv(&cfg.case, &records, out)?,
    }
    Ok(records)
}
