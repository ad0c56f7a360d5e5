//! Command-line driver: `sample`, `curvature`, `op-convergence`, `stokes`
//! and `perturb-study`.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for
//! numerical failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_geometry_with_radius, resolve_radii};
use crate::manufactured::{l2_error, ConvergenceRecord};
use crate::output::{point_table_csv, write_json, write_text, write_vtk, Column};
use crate::point_cloud::{sampling_stats, write_ply, write_xyz, ManifoldShape, Vec3};
use crate::stokes::{hydro_pipeline, Formulation, SolveStats, SolverPath, StokesOperators, StokesSystem};
use crate::study::{
    curvature_fields, level_stage, operator_study, perturbation_csv, perturbation_study, sample_level, stokes_manufactured,
};
use crate::surface_ops::{OperatorAssembler, OperatorKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Name of the provenance copy of the resolved configuration.
pub const PROVENANCE_FILE: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(name = "gmls-surface", version, about = "GMLS geometry, surface operators and surface Stokes flow on point clouds")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config file and the environment).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Shape with default parameters: a, b, c, d or sphere.
    #[arg(long, global = true)]
    pub shape: Option<String>,
    /// Comma-separated target spacings, coarse to fine.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sets both polynomial orders.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub m1: Option<usize>,
    #[arg(long, global = true)]
    pub m2: Option<usize>,
    #[arg(long, global = true)]
    pub pbar: Option<f64>,
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CloudFormat {
    Xyz,
    Ply,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    Split,
    Biharmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Direct,
    Iterative,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate point clouds and spacing statistics for every level.
    Sample {
        #[arg(long, value_enum, default_value_t = CloudFormat::Both)]
        format: CloudFormat,
    },
    /// Gaussian curvature convergence.
    Curvature,
    /// Convergence of one surface operator on the test field.
    OpConvergence {
        /// lb, bh, curv_k, curl0 or curl1.
        #[arg(long)]
        operator: Option<String>,
        /// Write the operator at the coarsest level as MatrixMarket.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Surface Stokes solve with manufactured or zero forcing.
    Stokes {
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
        /// Also solve with the other formulation.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Solve with b = 0.
        #[arg(long)]
        zero_forcing: bool,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Write the system matrix at the coarsest level as MatrixMarket.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Solve errors on jittered samplings.
    PerturbStudy {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        order: Option<usize>,
    },
}

/// Resolve the configuration: file (or defaults), then the output-dir
/// environment variable, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(name) = &cli.shape {
        cfg.shape = ManifoldShape::by_name(name).ok_or_else(|| Error::Config(format!("unknown shape '{name}'")))?;
    }
    if let Some(l) = &cli.levels {
        cfg.levels = l.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(m) = cli.m {
        cfg.gmls.m1 = m;
        cfg.gmls.m2 = m;
    }
    if let Some(m) = cli.m1 {
        cfg.gmls.m1 = m;
    }
    if let Some(m) = cli.m2 {
        cfg.gmls.m2 = m;
    }
    if let Some(p) = cli.pbar {
        cfg.gmls.pbar = p;
    }
    if let Some(e) = cli.eps0 {
        cfg.gmls.eps0 = Some(e);
    }
    match &cli.command {
        Command::OpConvergence { operator: Some(op), .. } => {
            cfg.operator = OperatorKind::parse(op).ok_or_else(|| Error::Config(format!("unknown operator '{op}'")))?;
        }
        Command::Stokes {
            formulation,
            compare,
            mu,
            gamma,
            zero_forcing,
            solver,
            ..
        } => {
            if let Some(f) = formulation {
                cfg.hydro.formulation = match f {
                    FormulationArg::Split => Formulation::Split,
                    FormulationArg::Biharmonic => Formulation::Biharmonic,
                };
            }
            cfg.hydro.compare |= compare;
            if let Some(m) = mu {
                cfg.hydro.mu_m = *m;
            }
            if let Some(g) = gamma {
                cfg.hydro.gamma = *g;
            }
            if *zero_forcing {
                cfg.hydro.forcing = crate::config::ForcingMode::Zero;
            }
            if let Some(s) = solver {
                cfg.solver.path = match s {
                    SolverArg::Direct => SolverPath::Direct,
                    SolverArg::Iterative => SolverPath::Iterative,
                };
            }
        }
        Command::PerturbStudy { alphas, order } => {
            if let Some(a) = alphas {
                cfg.perturbation.alphas = a.clone();
            }
            if let Some(o) = order {
                cfg.perturbation.order = *o;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&cli.command, &cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Execute a command with a validated configuration.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    if cfg.threads > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out)?;
    write_text(&out.join(PROVENANCE_FILE), &(cfg.to_json() + "\n"))?;
    match command {
        Command::Sample { format } => cmd_sample(cfg, *format),
        Command::Curvature => cmd_curvature(cfg),
        Command::OpConvergence { export_matrix, .. } => cmd_op_convergence(cfg, *export_matrix),
        Command::Stokes { export_matrix, .. } => cmd_stokes(cfg, *export_matrix),
        Command::PerturbStudy { .. } => cmd_perturb_study(cfg),
    }
}

fn level_tag(h: f64) -> String {
    format!("h{h}")
}

fn record_json(rec: &ConvergenceRecord) -> serde_json::Value {
    let levels: Vec<_> = rec
        .levels
        .iter()
        .zip(rec.rates())
        .map(|(l, r)| json!({"h": l.h, "n": l.n, "l2_error": l.error, "rate": r}))
        .collect();
    json!({"label": rec.label, "levels": levels})
}

pub fn cmd_sample(cfg: &RunConfig, format: CloudFormat) -> Result<()> {
    let out = cfg.output_dir.as_path();
    let mut stats = Vec::new();
    for &h in &cfg.levels {
        let cloud = sample_level(&cfg.shape, h, cfg.seed).map_err(|e| level_stage(h, e))?;
        let tag = level_tag(h);
        if matches!(format, CloudFormat::Xyz | CloudFormat::Both) {
            write_xyz(&out.join(format!("cloud_{tag}.xyz")), &cloud.points, &cloud.normals)?;
        }
        if matches!(format, CloudFormat::Ply | CloudFormat::Both) {
            write_ply(&out.join(format!("cloud_{tag}.ply")), &cloud.points, &cloud.normals)?;
        }
        let s = sampling_stats(&cloud)?;
        println!(
            "{} h={h}: n={} min/mean/max nn distance {:.4}/{:.4}/{:.4}",
            cfg.shape.name(),
            cloud.len(),
            s.min_neighbor_distance,
            s.mean_neighbor_distance,
            s.fill_estimate
        );
        stats.push(json!({"h": h, "n": cloud.len(), "stats": s}));
    }
    write_json(&out.join("sample_stats.json"), &json!({"shape": cfg.shape, "seed": cfg.seed, "levels": stats}))
}

pub fn cmd_curvature(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir.as_path();
    let mut rec = ConvergenceRecord::new(format!("gauss_curvature/{}", cfg.shape.name()));
    let last = cfg.levels.len() - 1;
    for (k, &h) in cfg.levels.iter().enumerate() {
        let mut run = || -> Result<()> {
            let cloud = sample_level(&cfg.shape, h, cfg.seed)?;
            let (approx, exact) = curvature_fields(&cloud, &cfg.shape, &cfg.gmls)?;
            rec.push(h, cloud.len(), l2_error(&approx, &exact)?)?;
            if k == last {
                let err: Vec<f64> = approx.iter().zip(&exact).map(|(a, b)| a - b).collect();
                let cols = [
                    Column::Scalar("gauss_curvature", &approx),
                    Column::Scalar("gauss_curvature_exact", &exact),
                    Column::Scalar("error", &err),
                ];
                write_text(&out.join("curvature.csv"), &point_table_csv(&cloud.points, &cols))?;
                write_vtk(&out.join("curvature.vtk"), "gauss curvature", &cloud.points, &cols)?;
            }
            Ok(())
        };
        run().map_err(|e| level_stage(h, e))?;
    }
    print!("{}", rec.to_csv());
    write_text(&out.join("curvature_convergence.csv"), &rec.to_csv())?;
    write_json(&out.join("curvature_stats.json"), &record_json(&rec))
}

pub fn cmd_op_convergence(cfg: &RunConfig, export_matrix: bool) -> Result<()> {
    let out = cfg.output_dir.as_path();
    let levels = cfg.study_levels()?;
    let kind = cfg.operator;
    let rec = operator_study(&cfg.shape, kind, levels, &cfg.gmls, cfg.seed, &cfg.field)?;
    print!("{}", rec.to_csv());
    write_text(&out.join(format!("{}_convergence.csv", kind.name())), &rec.to_csv())?;
    write_json(&out.join(format!("{}_stats.json", kind.name())), &record_json(&rec))?;
    if export_matrix {
        let h = levels[0];
        let cloud = sample_level(&cfg.shape, h, cfg.seed)?;
        let (eg, ef) = resolve_radii(&cloud, &cfg.gmls)?;
        let geom = build_geometry_with_radius(&cloud, cfg.gmls.m1, eg, cfg.gmls.pbar)?;
        let op = OperatorAssembler::new(&cloud, &geom, ef, cfg.gmls.m2, cfg.gmls.pbar).assemble_one(kind)?;
        op.matrix
            .write_matrix_market(&out.join(format!("{}_{}.mtx", kind.name(), level_tag(h))))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct StokesLevelReport {
    h: f64,
    n: usize,
    formulation: Formulation,
    relative_velocity_error: Option<f64>,
    max_velocity: f64,
    solve: SolveStats,
}

pub fn cmd_stokes(cfg: &RunConfig, export_matrix: bool) -> Result<()> {
    use crate::config::ForcingMode;
    let out = cfg.output_dir.as_path();
    let params = cfg.hydro.params();
    let forms = cfg.hydro.formulations();
    if cfg.shape.torus_radii().is_some() && cfg.hydro.forcing != ForcingMode::Manufactured {
        eprintln!("warning: genus-1 surface; the stream-function solve omits harmonic flow components");
    }
    let mut records: Vec<ConvergenceRecord> = forms
        .iter()
        .map(|f| ConvergenceRecord::new(format!("stokes_{}/{}", f.name(), cfg.shape.name())))
        .collect();
    let mut reports = Vec::new();
    let last = cfg.levels.len() - 1;
    for (k, &h) in cfg.levels.iter().enumerate() {
        let mut run = || -> Result<()> {
            let cloud = sample_level(&cfg.shape, h, cfg.seed)?;
            let n = cloud.len();
            // (formulation, phi, velocity, exact velocity, forcing, error, stats)
            let mut solved = Vec::new();
            match cfg.hydro.forcing {
                ForcingMode::Manufactured => {
                    for r in stokes_manufactured(&cloud, &cfg.shape, &cfg.gmls, &params, &forms, &cfg.solver, &cfg.field)? {
                        solved.push((r.formulation, r.solution, Some(r.exact_velocity), r.forcing, Some(r.error)));
                    }
                }
                ForcingMode::Zero => {
                    let b = vec![Vec3::zeros(); n];
                    for &f in &forms {
                        let s = hydro_pipeline(&cloud, &cfg.gmls, &params, f, &b, &cfg.solver)?;
                        solved.push((f, s, None, b.clone(), None));
                    }
                }
            }
            for (i, (f, sol, _, _, err)) in solved.iter().enumerate() {
                if let Some(e) = err {
                    records[i].push(h, n, *e)?;
                }
                reports.push(StokesLevelReport {
                    h,
                    n,
                    formulation: *f,
                    relative_velocity_error: *err,
                    max_velocity: sol.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max),
                    solve: sol.stats.clone(),
                });
            }
            if k == last {
                let (f, sol, exact, forcing, _) = &solved[0];
                let mut cols = vec![Column::Scalar("phi", &sol.phi)];
                if let Some(psi) = &sol.psi {
                    cols.push(Column::Scalar("psi", psi));
                }
                cols.push(Column::Vector("v", &sol.velocity));
                if let Some(ex) = exact {
                    cols.push(Column::Vector("v_exact", ex));
                }
                cols.push(Column::Vector("b", forcing));
                write_text(&out.join("stokes_solution.csv"), &point_table_csv(&cloud.points, &cols))?;
                write_vtk(&out.join("stokes_solution.vtk"), &format!("surface stokes {}", f.name()), &cloud.points, &cols)?;
            }
            if k == 0 && export_matrix {
                let (eg, ef) = resolve_radii(&cloud, &cfg.gmls)?;
                let geom = build_geometry_with_radius(&cloud, cfg.gmls.m1, eg, cfg.gmls.pbar)?;
                let asm = OperatorAssembler::new(&cloud, &geom, ef, cfg.gmls.m2, cfg.gmls.pbar);
                for &f in &forms {
                    let ops = StokesOperators::assemble(&asm, f)?;
                    let sys = StokesSystem::build(&ops, &params, f, cfg.solver.gauge)?;
                    sys.matrix
                        .write_matrix_market(&out.join(format!("stokes_{}_{}.mtx", f.name(), level_tag(h))))?;
                }
            }
            Ok(())
        };
        run().map_err(|e| level_stage(h, e))?;
    }
    let trivial = cfg.hydro.forcing == ForcingMode::Zero;
    for rec in records.iter().filter(|r| !r.levels.is_empty()) {
        println!("{}", rec.label);
        print!("{}", rec.to_csv());
        let name = rec.label.split('/').next().unwrap_or("stokes");
        write_text(&out.join(format!("{name}_convergence.csv")), &rec.to_csv())?;
    }
    if trivial {
        println!("zero forcing: trivial solution");
    }
    let summary = json!({
        "shape": cfg.shape,
        "forcing": cfg.hydro.forcing,
        "trivial": trivial,
        "convergence": records.iter().filter(|r| !r.levels.is_empty()).map(record_json).collect::<Vec<_>>(),
        "levels": reports,
    });
    write_json(&out.join("stokes_stats.json"), &summary)
}

pub fn cmd_perturb_study(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir.as_path();
    let levels = cfg.study_levels()?;
    let mut gmls = cfg.gmls.clone();
    gmls.m1 = cfg.perturbation.order;
    gmls.m2 = cfg.perturbation.order;
    let recs = perturbation_study(
        &cfg.shape,
        levels,
        &cfg.perturbation.alphas,
        &gmls,
        cfg.seed,
        &crate::manufactured::AnalyticScalar::AngularHarmonic54,
    )?;
    let csv = perturbation_csv(&recs);
    print!("{csv}");
    write_text(&out.join("perturbation.csv"), &csv)?;
    write_json(&out.join("perturbation_stats.json"), &recs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("gmls-surface").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&["stokes", "--levels", "0.2,0.1", "--m", "4", "--formulation", "biharmonic", "--compare", "--shape", "b"]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.levels, vec![0.2, 0.1]);
        assert_eq!((cfg.gmls.m1, cfg.gmls.m2), (4, 4));
        assert_eq!(cfg.hydro.formulations(), vec![Formulation::Biharmonic, Formulation::Split]);
        assert_eq!(cfg.shape, ManifoldShape::radial_b());
    }

    #[test]
    fn negative_level_is_config_error() {
        let cli = parse(&["sample", "--levels", "-0.1"]);
        assert!(matches!(resolve_config(&cli), Err(Error::Config(_))));
        assert_eq!(main_with_args(["gmls-surface", "sample", "--levels", "-0.1"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["gmls-surface", "no-such-command"]), EXIT_CONFIG);
    }

    #[test]
    fn operator_names() {
        let cli = parse(&["op-convergence", "--operator", "curl1"]);
        assert_eq!(resolve_config(&cli).unwrap().operator, OperatorKind::Curl1);
        let cli = parse(&["op-convergence", "--operator", "div"]);
        assert!(resolve_config(&cli).is_err());
    }
}
