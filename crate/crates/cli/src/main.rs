use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sgs_fem::assembly::{element_systems, AssemblyOptions};
use sgs_fem::export::export_solution;
use sgs_fem::harness::{
    element_tau, parse_levels, run_and_write, solve_level, CaseSpec, Method, RunConfig,
};
use sgs_fem::linalg::SolveMethod;
use sgs_fem::mesh::{Diagonal, Mesh};
use sgs_fem::quadrature::QuadratureRule;
use sgs_fem::stabilization::{check_elements, check_system, compute_tau, TauParams};

/// Galerkin and SGS finite elements for steady advection-diffusion-reaction.
#[derive(Parser, Debug)]
#[command(name = "sgs-fem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one level and report error and estimate.
    Solve(RunArgs),
    /// Run a convergence sweep and write the CSV table.
    Convergence(RunArgs),
    /// Print tau and the dimensionless numbers Q and R.
    Tau(TauArgs),
    /// Summarise non-negative-type violations of the element and global matrices.
    DmpCheck(RunArgs),
    /// Solve one level and write per-element residuals.
    Estimate(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// key = value run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// case1, case2 or a problem file.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    /// Comma-separated subdivisions, e.g. 10,20,40.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_degree: Option<usize>,
    #[arg(long)]
    error_quad_degree: Option<usize>,
    /// Use this tau on every element instead of the computed one.
    #[arg(long)]
    tau_override: Option<f64>,
    /// ul-lr (default) or ll-ur.
    #[arg(long)]
    diagonal: Option<Diagonal>,
    /// direct or iterative.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    solver_tol: Option<f64>,
    /// Keep the diagonal pivot when it is at least this fraction of the column maximum.
    #[arg(long)]
    pivot_threshold: Option<f64>,
    #[arg(long)]
    c_interp: Option<f64>,
    #[arg(long)]
    d_bar: Option<f64>,
    /// Drop the grad D terms when applying the operator to P1 functions.
    #[arg(long)]
    no_coefficient_gradients: bool,
    #[arg(long)]
    parallel_assembly: bool,
    #[arg(long)]
    parallel_levels: bool,
    /// Fill the wall_time column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct TauArgs {
    /// Diffusion bound.
    #[arg(long = "D")]
    d: f64,
    /// Velocity bound.
    #[arg(long = "U")]
    u: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long)]
    h: f64,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(c) = &self.case {
            cfg.case = CaseSpec::parse(c);
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(l) = &self.levels {
            cfg.levels = parse_levels(l)?;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if let Some(d) = self.quad_degree {
            cfg.quad_degree = d;
        }
        if let Some(d) = self.error_quad_degree {
            cfg.error_quad_degree = d;
        }
        if let Some(t) = self.tau_override {
            cfg.tau_override = Some(t);
        }
        if let Some(d) = self.diagonal {
            cfg.diagonal = d;
        }
        match self.solver.as_deref() {
            Some("direct") => cfg.solver.method = SolveMethod::Direct,
            Some("iterative") => cfg.solver.method = SolveMethod::Iterative,
            Some(other) => bail!("unknown solver `{other}` (expected direct or iterative)"),
            None => {}
        }
        if let Some(t) = self.solver_tol {
            cfg.solver.tol = t;
        }
        if let Some(t) = self.pivot_threshold {
            cfg.solver.pivot_threshold = t;
        }
        if let Some(c) = self.c_interp {
            cfg.constants.c_interp = c;
        }
        if let Some(d) = self.d_bar {
            cfg.constants.d_bar = d;
        }
        if self.no_coefficient_gradients {
            cfg.coefficient_gradients = false;
        }
        cfg.parallel_assembly |= self.parallel_assembly;
        cfg.parallel_levels |= self.parallel_levels;
        cfg.timing |= self.timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn single_level(cfg: &RunConfig) -> Result<usize> {
    match cfg.levels.as_slice() {
        [n] => Ok(*n),
        _ => bail!(
            "this subcommand takes exactly one level, got {:?}",
            cfg.levels
        ),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

fn cmd_solve(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let n = single_level(&cfg)?;
    let problem = cfg.case.problem()?;
    let level = solve_level(&problem, &cfg, n)?;
    let tau_max = level.tau.iter().copied().fold(0.0, f64::max);
    println!("case           {}", cfg.case);
    println!("method         {}", cfg.method);
    println!("n              {n}");
    println!("unknowns       {}", level.system.n_free());
    println!("tau            {tau_max:.6e}");
    println!("l2_error       {}", fmt_opt(level.l2_error));
    println!("estimate       {:.6e}", level.estimate);
    println!("effectivity    {}", fmt_opt(level.effectivity()));
    println!(
        "solver         {} (relative residual {:.3e})",
        level.solve_report.method, level.solve_report.relative_residual
    );
    if let Some(path) = &cfg.output {
        let (grid, vtk) = export_solution(&level.mesh, &level.solution, path)?;
        println!("wrote          {} {}", grid.display(), vtk.display());
    }
    Ok(())
}

fn cmd_convergence(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let stdout = io::stdout();
    let records = run_and_write(&cfg, BufWriter::new(stdout.lock()))?;
    let failed: Vec<usize> = records.iter().filter(|r| r.failed()).map(|r| r.n).collect();
    if !failed.is_empty() {
        bail!("levels {failed:?} failed; see the status column");
    }
    Ok(())
}

fn cmd_tau(args: &TauArgs) -> Result<()> {
    let p = TauParams::new(args.d, args.u, args.mu, args.h);
    let tau = compute_tau(&p)?;
    println!("tau = {tau:.6e}");
    println!("Q   = {:.6e}", p.q());
    println!("R   = {:.6e}", p.r());
    Ok(())
}

fn cmd_dmp_check(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let n = single_level(&cfg)?;
    let problem = cfg.case.problem()?;
    let mesh = Mesh::structured_with(n, cfg.diagonal)?;
    let rule = QuadratureRule::with_degree(cfg.quad_degree)?;
    let opts = AssemblyOptions {
        coefficient_gradients: cfg.coefficient_gradients,
        parallel: cfg.parallel_assembly,
    };
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<10} {:>12} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "method", "tau", "elem_bad", "elem_off", "elem_row", "glob_off", "glob_row"
    )?;
    for method in [Method::Galerkin, Method::Sgs] {
        let tau = element_tau(&mesh, &problem, method, cfg.tau_override)?;
        let tau_arg = (method == Method::Sgs).then_some(tau.as_slice());
        let locals = element_systems(&mesh, &problem, tau_arg, &rule, &opts)?;
        let reports = check_elements(&locals);
        let (full, rhs) = sgs_fem::assembly::accumulate(&mesh, &locals);
        let system = sgs_fem::assembly::eliminate_dirichlet(&mesh, &problem, full, rhs);
        let global = check_system(&system);
        writeln!(
            out,
            "{:<10} {:>12.4e} {:>10} {:>10} {:>10} {:>10} {:>10}",
            method,
            tau.iter().copied().fold(0.0, f64::max),
            reports.iter().filter(|r| !r.satisfied()).count(),
            reports
                .iter()
                .map(|r| r.offdiag_violations.len())
                .sum::<usize>(),
            reports
                .iter()
                .map(|r| r.rowsum_violations.len())
                .sum::<usize>(),
            global.offdiag_violations.len(),
            global.rowsum_violations.len(),
        )?;
    }
    Ok(())
}

fn cmd_estimate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let n = single_level(&cfg)?;
    let problem = cfg.case.problem()?;
    let level = solve_level(&problem, &cfg, n)?;
    println!("l2_error    {}", fmt_opt(level.l2_error));
    println!("estimate    {:.6e}", level.estimate);
    println!("effectivity {}", fmt_opt(level.effectivity()));
    if let Some(path) = &cfg.output {
        let mut f = BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(f, "element,h,tau,residual_norm")?;
        for (e, ((h, t), r)) in level
            .element_sizes
            .iter()
            .zip(&level.tau)
            .zip(&level.residuals)
            .enumerate()
        {
            writeln!(f, "{e},{h:e},{t:e},{r:e}")?;
        }
        f.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Tau(a) => cmd_tau(a),
        Command::DmpCheck(a) => cmd_dmp_check(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
