//! Convergence studies: sample each level, reconstruct, assemble, compare
//! with the exact oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_geometry_with_radius, resolve_radii};
use crate::gmls::GmlsConfig;
use crate::manufactured::{exact_values, l2_error, l2_error_vec, remove_mean, AnalyticScalar, ConvergenceRecord};
use crate::output::sci;
use crate::point_cloud::{perturb_and_project, sample_manifold, ManifoldShape, PointCloud, Vec3};
use crate::sparse::{CsrMatrix, Layout, MultifrontalLu};
use crate::stokes::{border_mean_zero, solve_stokes, Formulation, HydroParams, HydroSolution, SolverConfig, StokesOperators};
use crate::surface_ops::{flatten, unflatten, OperatorAssembler, OperatorKind};

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Config("a convergence study needs at least 2 levels".into()));
    }
    if levels.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Config("level spacings must be positive".into()));
    }
    Ok(())
}

pub fn level_stage(h: f64, e: Error) -> Error {
    e.at_stage(format!("level h={h}"))
}

pub fn sample_level(shape: &ManifoldShape, h: f64, seed: u64) -> Result<PointCloud> {
    sample_manifold(shape, h, seed).map_err(|e| e.at_stage("sampling"))
}

/// Reconstructed and exact Gaussian curvature at every point.
pub fn curvature_fields(cloud: &PointCloud, shape: &ManifoldShape, gmls: &GmlsConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let (eps, _) = resolve_radii(cloud, gmls)?;
    let geom = build_geometry_with_radius(cloud, gmls.m1, eps, gmls.pbar).map_err(|e| e.at_stage("geometry"))?;
    let exact = exact_values(shape, &cloud.points, |e| e.gauss_curvature())?;
    Ok((geom.gauss_curvature(), exact))
}

/// Gaussian curvature error at each level.
pub fn curvature_study(shape: &ManifoldShape, levels: &[f64], gmls: &GmlsConfig, seed: u64) -> Result<ConvergenceRecord> {
    check_levels(levels)?;
    let mut rec = ConvergenceRecord::new(format!("gauss_curvature/{}", shape.name()));
    for &h in levels {
        let run = || -> Result<(usize, f64)> {
            let cloud = sample_level(shape, h, seed)?;
            let (approx, exact) = curvature_fields(&cloud, shape, gmls)?;
            Ok((cloud.len(), l2_error(&approx, &exact)?))
        };
        let (n, err) = run().map_err(|e| level_stage(h, e))?;
        rec.push(h, n, err)?;
    }
    Ok(rec)
}

/// Error of one discrete operator applied to `field` (for `curl1`, applied
/// to the exact `curl0 field`). Vector results use the absolute
/// ambient-componentwise norm.
pub fn operator_error(cloud: &PointCloud, shape: &ManifoldShape, kind: OperatorKind, gmls: &GmlsConfig, field: &AnalyticScalar) -> Result<f64> {
    let (eps_g, eps_f) = resolve_radii(cloud, gmls)?;
    let geom = build_geometry_with_radius(cloud, gmls.m1, eps_g, gmls.pbar).map_err(|e| e.at_stage("geometry"))?;
    let op = OperatorAssembler::new(cloud, &geom, eps_f, gmls.m2, gmls.pbar)
        .assemble_one(kind)
        .map_err(|e| e.at_stage("assembly"))?;
    let phi = field.values(&cloud.points);
    match kind {
        OperatorKind::Curl0 => {
            let approx = unflatten(&op.apply(&phi)?);
            let exact = exact_values(shape, &cloud.points, |e| e.curl0(field))?;
            l2_error_vec(&approx, &exact, false)
        }
        OperatorKind::Curl1 => {
            let v = exact_values(shape, &cloud.points, |e| e.curl0(field))?;
            let approx = op.apply(&flatten(&v))?;
            let exact = exact_values(shape, &cloud.points, |e| e.curl1_of_curl0(field))?;
            l2_error(&approx, &exact)
        }
        _ => {
            let approx = op.apply(&phi)?;
            let exact = exact_values(shape, &cloud.points, |e| match kind {
                OperatorKind::LaplaceBeltrami => e.laplace_beltrami(field),
                OperatorKind::Biharmonic => e.biharmonic(field),
                _ => e.curv_k(field),
            })?;
            l2_error(&approx, &exact)
        }
    }
}

pub fn operator_study(
    shape: &ManifoldShape,
    kind: OperatorKind,
    levels: &[f64],
    gmls: &GmlsConfig,
    seed: u64,
    field: &AnalyticScalar,
) -> Result<ConvergenceRecord> {
    check_levels(levels)?;
    let mut rec = ConvergenceRecord::new(format!("{kind}/{}", shape.name()));
    for &h in levels {
        let run = || -> Result<(usize, f64)> {
            let cloud = sample_level(shape, h, seed)?;
            Ok((cloud.len(), operator_error(&cloud, shape, kind, gmls, field)?))
        };
        let (n, err) = run().map_err(|e| level_stage(h, e))?;
        rec.push(h, n, err)?;
    }
    Ok(rec)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudySummary {
    pub label: String,
    pub record: ConvergenceRecord,
}

/// One manufactured Stokes solve.
#[derive(Clone, Debug)]
pub struct StokesRun {
    pub formulation: Formulation,
    pub solution: HydroSolution,
    pub exact_velocity: Vec<Vec3>,
    pub forcing: Vec<Vec3>,
    /// Relative velocity error.
    pub error: f64,
}

/// Solve the manufactured problem for `v = curl0 field` with every listed
/// formulation, sharing geometry and operators.
pub fn stokes_manufactured(
    cloud: &PointCloud,
    shape: &ManifoldShape,
    gmls: &GmlsConfig,
    params: &HydroParams,
    formulations: &[Formulation],
    solver: &SolverConfig,
    field: &AnalyticScalar,
) -> Result<Vec<StokesRun>> {
    params.validate()?;
    let (eps_g, eps_f) = resolve_radii(cloud, gmls)?;
    let geom = build_geometry_with_radius(cloud, gmls.m1, eps_g, gmls.pbar).map_err(|e| e.at_stage("geometry"))?;
    let assembler = OperatorAssembler::new(cloud, &geom, eps_f, gmls.m2, gmls.pbar);
    let widest = if formulations.contains(&Formulation::Biharmonic) {
        Formulation::Biharmonic
    } else {
        Formulation::Split
    };
    let ops = StokesOperators::assemble(&assembler, widest).map_err(|e| e.at_stage("assembly"))?;
    let forcing = exact_values(shape, &cloud.points, |e| e.forcing(field, params.mu_m, params.gamma))?;
    let exact = exact_values(shape, &cloud.points, |e| e.curl0(field))?;
    formulations
        .iter()
        .map(|&f| {
            let solution = solve_stokes(cloud, &geom, &ops, params, f, &forcing, solver)?;
            let error = l2_error_vec(&solution.velocity, &exact, true)?;
            Ok(StokesRun {
                formulation: f,
                solution,
                exact_velocity: exact.clone(),
                forcing: forcing.clone(),
                error,
            })
        })
        .collect()
}

/// Relative velocity error per level, one record per formulation.
#[allow(clippy::too_many_arguments)]
pub fn stokes_study(
    shape: &ManifoldShape,
    levels: &[f64],
    gmls: &GmlsConfig,
    params: &HydroParams,
    formulations: &[Formulation],
    solver: &SolverConfig,
    seed: u64,
    field: &AnalyticScalar,
) -> Result<Vec<ConvergenceRecord>> {
    check_levels(levels)?;
    let mut recs: Vec<ConvergenceRecord> = formulations
        .iter()
        .map(|f| ConvergenceRecord::new(format!("stokes_{}/{}", f.name(), shape.name())))
        .collect();
    for &h in levels {
        let run = || -> Result<(usize, Vec<f64>)> {
            let cloud = sample_level(shape, h, seed)?;
            let runs = stokes_manufactured(&cloud, shape, gmls, params, formulations, solver, field)?;
            Ok((cloud.len(), runs.iter().map(|r| r.error).collect()))
        };
        let (n, errs) = run().map_err(|e| level_stage(h, e))?;
        for (rec, e) in recs.iter_mut().zip(errs) {
            rec.push(h, n, e)?;
        }
    }
    Ok(recs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub alpha: f64,
    /// Second-order solve `LB u = LB u*`.
    pub lb: ConvergenceRecord,
    /// Fourth-order solve through the pair `LB u - w = 0`, `LB w = BH u*`.
    pub bh: ConvergenceRecord,
}

fn bordered_solve(a: &CsrMatrix, points: &[Vec3], blocks: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = points.len();
    let gauged: Vec<usize> = (0..blocks).collect();
    let m = border_mean_zero(a, n, &gauged);
    let lu = MultifrontalLu::factor(&m, &Layout::blocked(points, blocks, blocks))?;
    let mut b = rhs.to_vec();
    b.resize(m.nrows, 0.0);
    let (x, rep) = lu.solve_refined(&b, 1e-12, 3);
    if !(rep.relative_residual <= 1e-10) {
        return Err(Error::SolverDiverged {
            iterations: rep.refinement_steps,
            residual: rep.relative_residual,
            trace: vec![rep.relative_residual],
        });
    }
    Ok(x)
}

/// Mean-free errors of the second- and fourth-order manufactured solves
/// with exact solution `field`.
pub fn perturbation_errors(cloud: &PointCloud, shape: &ManifoldShape, gmls: &GmlsConfig, field: &AnalyticScalar) -> Result<(f64, f64)> {
    let n = cloud.len();
    let (eps_g, eps_f) = resolve_radii(cloud, gmls)?;
    let geom = build_geometry_with_radius(cloud, gmls.m1, eps_g, gmls.pbar).map_err(|e| e.at_stage("geometry"))?;
    let lb = OperatorAssembler::new(cloud, &geom, eps_f, gmls.m2, gmls.pbar)
        .assemble_one(OperatorKind::LaplaceBeltrami)
        .map_err(|e| e.at_stage("assembly"))?;
    let mut exact = field.values(&cloud.points);
    remove_mean(&mut exact);
    let f_lb = exact_values(shape, &cloud.points, |e| e.laplace_beltrami(field))?;
    let f_bh = exact_values(shape, &cloud.points, |e| e.biharmonic(field))?;

    let mut u = bordered_solve(&lb.matrix, &cloud.points, 1, &f_lb).map_err(|e| e.at_stage("lb solve"))?;
    u.truncate(n);
    remove_mean(&mut u);
    let e_lb = l2_error(&u, &exact)?;

    let id = CsrMatrix::identity(n);
    let split = CsrMatrix::from_blocks(&[
        vec![Some((1.0, &lb.matrix)), Some((-1.0, &id))],
        vec![None, Some((1.0, &lb.matrix))],
    ]);
    let mut rhs = vec![0.0; n];
    rhs.extend_from_slice(&f_bh);
    let mut u = bordered_solve(&split, &cloud.points, 2, &rhs).map_err(|e| e.at_stage("bh solve"))?;
    u.truncate(n);
    remove_mean(&mut u);
    let e_bh = l2_error(&u, &exact)?;
    Ok((e_lb, e_bh))
}

/// Solve errors on jittered copies of each level's cloud, one record per
/// perturbation strength. `alpha = 0` is the unperturbed cloud.
pub fn perturbation_study(
    shape: &ManifoldShape,
    levels: &[f64],
    alphas: &[f64],
    gmls: &GmlsConfig,
    seed: u64,
    field: &AnalyticScalar,
) -> Result<Vec<PerturbationRecord>> {
    check_levels(levels)?;
    if alphas.is_empty() {
        return Err(Error::Config("perturbation study needs at least one alpha".into()));
    }
    let mut out: Vec<PerturbationRecord> = alphas
        .iter()
        .map(|&alpha| PerturbationRecord {
            alpha,
            lb: ConvergenceRecord::new(format!("perturb_lb/{}/alpha={alpha}", shape.name())),
            bh: ConvergenceRecord::new(format!("perturb_bh/{}/alpha={alpha}", shape.name())),
        })
        .collect();
    for &h in levels {
        let base = sample_level(shape, h, seed).map_err(|e| level_stage(h, e))?;
        for (k, rec) in out.iter_mut().enumerate() {
            let run = || -> Result<(usize, f64, f64)> {
                let noise_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64 + 1);
                let cloud = perturb_and_project(&base, rec.alpha, noise_seed).map_err(|e| e.at_stage("perturb"))?;
                let (a, b) = perturbation_errors(&cloud, shape, gmls, field)?;
                Ok((cloud.len(), a, b))
            };
            let (n, e_lb, e_bh) = run().map_err(|e| level_stage(h, e).at_stage(format!("alpha={}", rec.alpha)))?;
            rec.lb.push(h, n, e_lb)?;
            rec.bh.push(h, n, e_bh)?;
        }
    }
    Ok(out)
}

/// `alpha,solve,h,n,l2_error,rate`.
pub fn perturbation_csv(records: &[PerturbationRecord]) -> String {
    let mut s = String::from("alpha,solve,h,n,l2_error,rate\n");
    for r in records {
        for (name, rec) in [("lb", &r.lb), ("bh", &r.bh)] {
            let rates = rec.rates();
            for (lvl, rate) in rec.levels.iter().zip(rates) {
                s.push_str(&format!(
                    "{},{name},{},{},{},{}\n",
                    sci(r.alpha),
                    sci(lvl.h),
                    lvl.n,
                    sci(lvl.error),
                    rate.map(sci).unwrap_or_default()
                ));
            }
        }
    }
    s
}
