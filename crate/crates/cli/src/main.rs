//! `prvem`: convergence tables and adaptive runs from the command line.
//!
//! Exit status: 0 on success, 2 for invalid flags or inputs, 1 when the
//! numerics fail (solver breakdown, degenerate refinement, I/O on output).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use prvem::assembly::{solve_problem, Discretization, RhsMode};
use prvem::bench::{
    adaptive_study, case_registry, export_vtk, table_to_csv, trace_to_csv, uniform_study,
    write_csv, CaseParams, KappaRaster, ManufacturedCase, MeshFamily, StudyOptions, CASE_NAMES,
};
use prvem::estimate::AdaptiveConfig;
use prvem::mesh::PolygonalMesh;
use prvem::quadrature::IntegrationOptions;
use prvem::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rhs {
    Robust,
    Standard,
}

impl From<Rhs> for RhsMode {
    fn from(r: Rhs) -> Self {
        match r {
            Rhs::Robust => RhsMode::Robust,
            Rhs::Standard => RhsMode::Standard,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "prvem",
    version,
    about = "Divergence-free virtual elements for the Brinkman equations"
)]
struct Args {
    /// One of ex61, ex64, ex65, ex66, fibrous, foam.
    #[arg(long, default_value = "ex61")]
    case: String,
    /// square, nonconvex or file:<path> (JSON mesh); defaults to the case's family.
    #[arg(long)]
    mesh: Option<String>,
    /// Subdivisions per side of the first (or starting) mesh.
    #[arg(long)]
    n: Option<usize>,
    /// Number of uniform refinement levels, each doubling n.
    #[arg(long, default_value_t = 1)]
    levels: usize,
    #[arg(long)]
    nu: Option<f64>,
    /// Constant permeability; the inverse enters the equations.
    #[arg(long)]
    kappa: Option<f64>,
    /// κ⁻¹ raster: "nx ny" then ny rows of nx positive values, bottom row first.
    #[arg(long)]
    kappa_raster: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "robust")]
    rhs: Rhs,
    /// Run Solve, Estimate, Mark, Refine instead of a uniform study.
    #[arg(long)]
    adaptive: bool,
    /// Dörfler marking fraction in (0, 1).
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    #[arg(long, default_value_t = 20)]
    max_iters: usize,
    /// Stop refining once the mesh has this many vertices.
    #[arg(long, default_value_t = 10_000)]
    tol: usize,
    /// CSV output: the convergence table, or the iteration trace with --adaptive.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Legacy VTK file of the solution on the finest (or final adaptive) mesh.
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Triangle quadrature degree for the data integrals.
    #[arg(long, default_value = "4", value_parser = parse_degree)]
    quad_degree: usize,
}

fn parse_degree(s: &str) -> Result<usize, String> {
    match s {
        "4" => Ok(4),
        "6" => Ok(6),
        _ => Err(format!("'{s}' is not a supported degree (4 or 6)")),
    }
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::UnknownCase(_)
            | Error::Raster(_)
            | Error::UnsupportedQuadrature(_)
            | Error::MeshFormat(_)
            | Error::Json(_)
            | Error::IndexOutOfRange { .. }
            | Error::DegenerateCell { .. }
            | Error::NonManifoldEdge(..) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn build_case(args: &Args) -> Result<ManufacturedCase, Failure> {
    if !CASE_NAMES.contains(&args.case.as_str()) {
        return Err(usage(format!(
            "unknown case '{}' (expected one of {})",
            args.case,
            CASE_NAMES.join(", ")
        )));
    }
    let raster = match &args.kappa_raster {
        // an unreadable raster is a bad input, not a numerical failure
        Some(p) => Some(KappaRaster::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let params = CaseParams {
        nu: args.nu,
        kappa: args.kappa,
        raster,
    };
    Ok(case_registry(&args.case, &params)?)
}

fn write_vtk(
    case: &ManufacturedCase,
    mesh: PolygonalMesh,
    opts: StudyOptions,
    path: &PathBuf,
) -> Result<(), Failure> {
    let data = case.problem(opts.rhs_mode, opts.quadrature);
    let disc = Discretization::new(mesh, &data.kappa_inv)?;
    let result = solve_problem(&disc, &data)?;
    export_vtk(&disc, &result, path).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_output(path: &PathBuf, text: &str) -> Result<(), Failure> {
    write_csv(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn run(args: Args) -> Result<(), Failure> {
    let case = build_case(&args)?;
    let family = match &args.mesh {
        Some(m) => MeshFamily::parse(m)?,
        None => case.mesh_hint.clone(),
    };
    if let MeshFamily::File(p) = &family {
        if !p.is_file() {
            return Err(usage(format!("mesh file {} not found", p.display())));
        }
    }
    let opts = StudyOptions {
        rhs_mode: args.rhs.into(),
        quadrature: IntegrationOptions::new(args.quad_degree, false)?,
    };
    if args.n == Some(0) {
        return Err(usage("--n must be positive"));
    }
    if args.adaptive {
        let config = AdaptiveConfig {
            delta: args.delta,
            max_iterations: args.max_iters,
            dof_tolerance: args.tol,
        };
        config.validate()?;
        let mesh0 = family.build(args.n.unwrap_or(3))?;
        let study = adaptive_study(&case, mesh0, &config, opts)?;
        print!("{}", study.table.render());
        let slope = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "slopes over the last 3 iterations: eta {}, error {}",
            slope(study.eta_slope),
            slope(study.error_slope)
        );
        if let Some(f) = &study.trace.failure {
            eprintln!("warning: adaptive loop stopped early: {f}");
        }
        if let Some(out) = &args.out {
            write_output(out, &trace_to_csv(&study.trace))?;
        }
        if let (Some(path), Some(mesh)) = (&args.vtk, study.trace.final_mesh) {
            write_vtk(&case, mesh, opts, path)?;
        }
    } else {
        let n0 = args.n.unwrap_or(10);
        let levels = args.levels;
        if levels == 0
            || levels > 12
            || n0
                .checked_shl(levels as u32 - 1)
                .is_none_or(|n| n > 1 << 14)
        {
            return Err(usage(format!(
                "--levels {levels} with --n {n0} is out of range"
            )));
        }
        let table = uniform_study(&case, &family, n0, levels, opts)?;
        print!("{}", table.render());
        if let Some(out) = &args.out {
            write_output(out, &table_to_csv(&table))?;
        }
        if let Some(path) = &args.vtk {
            write_vtk(&case, family.build(n0 << (levels - 1))?, opts, path)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
