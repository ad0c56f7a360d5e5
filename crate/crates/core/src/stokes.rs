//! Surface Stokes flow in stream-function form.
//!
//! With `v = curl0 Phi` and forcing `b`, taking `curl1` of the momentum
//! balance gives the fourth-order equation
//!
//! ```text
//! -mu BH Phi + gamma LB Phi - 2 mu CurvK Phi = curl1 b
//! ```
//!
//! solved either directly (`Biharmonic`) or as the second-order pair
//! `Psi = -LB Phi`, `-2 mu CurvK Phi + (mu LB - gamma) Psi = curl1 b`
//! (`Split`). Constants are in the kernel of every term, so `Phi` is fixed
//! to mean zero through a Lagrange multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_geometry_with_radius, resolve_radii, SurfaceGeometry};
use crate::gmls::GmlsConfig;
use crate::point_cloud::{PointCloud, Vec3};
use crate::sparse::{gmres, norm2, CsrMatrix, GmresOptions, Ilu0, Layout, MultifrontalLu, Preconditioner};
use crate::surface_ops::{check_tangent, flatten, unflatten, OperatorAssembler, OperatorKind, SurfaceOperator};

/// Relative residual at which direct-solve refinement stops.
const REFINE_TARGET: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HydroParams {
    /// Membrane viscosity.
    pub mu_m: f64,
    /// Drag against the surroundings.
    pub gamma: f64,
}

impl Default for HydroParams {
    fn default() -> Self {
        HydroParams { mu_m: 0.1, gamma: 0.1 }
    }
}

impl HydroParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_m >= 0.0 && self.gamma >= 0.0 && self.mu_m.is_finite() && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "hydro parameters must be finite and non-negative (mu_m={}, gamma={})",
                self.mu_m, self.gamma
            )));
        }
        if self.mu_m == 0.0 && self.gamma == 0.0 {
            return Err(Error::Config("mu_m and gamma cannot both be zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Split,
    Biharmonic,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Split => "split",
            Formulation::Biharmonic => "biharmonic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub path: SolverPath,
    /// Required relative residual of the final solution.
    pub tolerance: f64,
    /// Fix the constant mode of `Phi` with a mean-zero constraint.
    pub gauge: bool,
    /// Allowed normal component of the forcing, relative to its largest
    /// vector length.
    pub tangency_tolerance: f64,
    pub gmres: GmresOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: SolverPath::Direct,
            tolerance: 1e-10,
            gauge: true,
            tangency_tolerance: 1e-3,
            gmres: GmresOptions::default(),
        }
    }
}

/// The operators a formulation needs.
#[derive(Clone, Debug)]
pub struct StokesOperators {
    pub lb: SurfaceOperator,
    pub bh: Option<SurfaceOperator>,
    pub curv_k: SurfaceOperator,
    pub curl0: SurfaceOperator,
    pub curl1: SurfaceOperator,
}

impl StokesOperators {
    pub fn assemble(assembler: &OperatorAssembler, formulation: Formulation) -> Result<StokesOperators> {
        let mut kinds = vec![
            OperatorKind::LaplaceBeltrami,
            OperatorKind::CurvatureLaplacian,
            OperatorKind::Curl0,
            OperatorKind::Curl1,
        ];
        if formulation == Formulation::Biharmonic {
            kinds.push(OperatorKind::Biharmonic);
        }
        let mut ops = assembler.assemble(&kinds)?.into_iter();
        let lb = ops.next().unwrap();
        let curv_k = ops.next().unwrap();
        let curl0 = ops.next().unwrap();
        let curl1 = ops.next().unwrap();
        Ok(StokesOperators {
            lb,
            bh: ops.next(),
            curv_k,
            curl0,
            curl1,
        })
    }

    pub fn n(&self) -> usize {
        self.lb.matrix.nrows
    }
}

/// `-mu BH + gamma LB - 2 mu CurvK`.
pub fn assemble_biharmonic(ops: &StokesOperators, p: &HydroParams) -> Result<CsrMatrix> {
    let bh = ops
        .bh
        .as_ref()
        .ok_or_else(|| Error::Config("biharmonic formulation needs the BH operator".into()))?;
    Ok(CsrMatrix::linear_combination(&[
        (-p.mu_m, &bh.matrix),
        (p.gamma, &ops.lb.matrix),
        (-2.0 * p.mu_m, &ops.curv_k.matrix),
    ]))
}

/// `[-2 mu CurvK, mu LB - gamma I; -LB, -I]` acting on `(Phi, Psi)`.
pub fn assemble_split(ops: &StokesOperators, p: &HydroParams) -> CsrMatrix {
    let n = ops.n();
    let id = CsrMatrix::identity(n);
    let upper_right = CsrMatrix::linear_combination(&[(p.mu_m, &ops.lb.matrix), (-p.gamma, &id)]);
    CsrMatrix::from_blocks(&[
        vec![Some((-2.0 * p.mu_m, &ops.curv_k.matrix)), Some((1.0, &upper_right))],
        vec![Some((-1.0, &ops.lb.matrix)), Some((-1.0, &id))],
    ])
}

/// For each listed block `b` of size `n`, append one multiplier column
/// (ones on the rows of block `b`) and one constraint row (ones on the
/// columns of block `b`).
pub fn border_mean_zero(a: &CsrMatrix, n: usize, blocks: &[usize]) -> CsrMatrix {
    let dim = a.nrows;
    let mut rows = Vec::with_capacity(dim + blocks.len());
    for i in 0..dim {
        let (c, v) = a.row(i);
        let mut cols = c.to_vec();
        let mut vals = v.to_vec();
        for (k, &b) in blocks.iter().enumerate() {
            if i / n == b {
                cols.push(dim + k);
                vals.push(1.0);
            }
        }
        rows.push((cols, vals));
    }
    for &b in blocks {
        rows.push(((b * n..(b + 1) * n).collect(), vec![1.0; n]));
    }
    CsrMatrix::from_rows(dim + blocks.len(), rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveStats {
    pub formulation: Formulation,
    pub path: SolverPath,
    pub unknowns: usize,
    pub nonzeros: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub iterations: usize,
    pub largest_front: usize,
    pub multiplier: f64,
}

#[derive(Clone, Debug)]
pub struct HydroSolution {
    pub phi: Vec<f64>,
    /// `-LB Phi` from the split formulation.
    pub psi: Option<Vec<f64>>,
    pub velocity: Vec<Vec3>,
    pub stats: SolveStats,
}

/// A system with leading `n` gauge-relevant unknowns.
pub struct StokesSystem {
    pub matrix: CsrMatrix,
    pub formulation: Formulation,
    pub n: usize,
    pub gauged: bool,
}

impl StokesSystem {
    pub fn build(ops: &StokesOperators, params: &HydroParams, formulation: Formulation, gauge: bool) -> Result<StokesSystem> {
        params.validate()?;
        let n = ops.n();
        let core = match formulation {
            Formulation::Split => assemble_split(ops, params),
            Formulation::Biharmonic => assemble_biharmonic(ops, params)?,
        };
        let matrix = if gauge { border_mean_zero(&core, n, &[0]) } else { core };
        Ok(StokesSystem {
            matrix,
            formulation,
            n,
            gauged: gauge,
        })
    }

    fn blocks(&self) -> usize {
        match self.formulation {
            Formulation::Split => 2,
            Formulation::Biharmonic => 1,
        }
    }

    /// Right-hand side for the stream-function unknowns.
    pub fn rhs(&self, vorticity: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.matrix.nrows];
        b[..self.n].copy_from_slice(vorticity);
        b
    }

    pub fn solve(&self, points: &[Vec3], rhs: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveStats)> {
        if !self.gauged {
            // Constants are annihilated by every block, so the ungauged
            // system is singular whenever they are (numerically) in its kernel.
            let mut ones = vec![0.0; self.matrix.ncols];
            ones[..self.n].iter_mut().for_each(|v| *v = 1.0);
            let scale = self.matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm2(&self.matrix.matvec(&ones)) <= 1e-8 * scale * (self.n as f64).sqrt() {
                return Err(Error::SingularSystem { block: 0 });
            }
        }
        let extra = usize::from(self.gauged);
        let (x, residual, steps, iterations, front) = match cfg.path {
            SolverPath::Direct => {
                let layout = Layout::blocked(points, self.blocks(), extra);
                let lu = MultifrontalLu::factor(&self.matrix, &layout)?;
                let (x, rep) = lu.solve_refined(rhs, REFINE_TARGET, 3);
                (x, rep.relative_residual, rep.refinement_steps, 0, rep.largest_front)
            }
            SolverPath::Iterative => {
                let pre = BorderedIlu::new(&self.matrix, self.matrix.nrows - extra)?;
                let mut opts = cfg.gmres;
                opts.tolerance = cfg.tolerance;
                let out = gmres(&self.matrix, rhs, None, &pre, &opts)?;
                let res = *out.residual_history.last().unwrap_or(&f64::NAN);
                (out.x, res, 0, out.iterations, 0)
            }
        };
        if !(residual <= cfg.tolerance) {
            return Err(Error::SolverDiverged {
                iterations: iterations.max(steps),
                residual,
                trace: vec![residual],
            });
        }
        let stats = SolveStats {
            formulation: self.formulation,
            path: cfg.path,
            unknowns: self.matrix.nrows,
            nonzeros: self.matrix.nnz(),
            relative_residual: residual,
            refinement_steps: steps,
            iterations,
            largest_front: front,
            multiplier: if self.gauged { x[self.matrix.nrows - 1] } else { 0.0 },
        };
        Ok((x, stats))
    }
}

/// ILU(0) on the leading block, identity on trailing border unknowns.
struct BorderedIlu {
    ilu: Ilu0,
    lead: usize,
}

impl BorderedIlu {
    fn new(a: &CsrMatrix, lead: usize) -> Result<BorderedIlu> {
        let rows = (0..lead)
            .map(|i| {
                let (c, v) = a.row(i);
                let keep: Vec<usize> = (0..c.len()).filter(|&k| c[k] < lead).collect();
                (keep.iter().map(|&k| c[k]).collect(), keep.iter().map(|&k| v[k]).collect())
            })
            .collect();
        let block = CsrMatrix::from_rows(lead, rows);
        Ok(BorderedIlu {
            ilu: Ilu0::new(&block)?,
            lead,
        })
    }
}

impl Preconditioner for BorderedIlu {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = self.ilu.apply(&r[..self.lead]);
        out.extend_from_slice(&r[self.lead..]);
        out
    }
}

/// Solve for `Phi` given the ambient forcing at each point and reconstruct
/// `v = curl0 Phi`.
pub fn solve_stokes(
    cloud: &PointCloud,
    geometry: &SurfaceGeometry,
    ops: &StokesOperators,
    params: &HydroParams,
    formulation: Formulation,
    forcing: &[Vec3],
    cfg: &SolverConfig,
) -> Result<HydroSolution> {
    check_tangent(forcing, &geometry.normals(), cfg.tangency_tolerance).map_err(|e| e.at_stage("forcing"))?;
    let vort = ops.curl1.apply(&flatten(forcing))?;
    let system = StokesSystem::build(ops, params, formulation, cfg.gauge)?;
    let rhs = system.rhs(&vort);
    let (x, stats) = system.solve(&cloud.points, &rhs, cfg).map_err(|e| e.at_stage("solve"))?;
    let n = ops.n();
    let phi = x[..n].to_vec();
    let psi = (formulation == Formulation::Split).then(|| x[n..2 * n].to_vec());
    let velocity = unflatten(&ops.curl0.apply(&phi)?);
    Ok(HydroSolution {
        phi,
        psi,
        velocity,
        stats,
    })
}

/// Geometry, operators and solve in one call.
pub fn hydro_pipeline(
    cloud: &PointCloud,
    gmls: &GmlsConfig,
    params: &HydroParams,
    formulation: Formulation,
    forcing: &[Vec3],
    cfg: &SolverConfig,
) -> Result<HydroSolution> {
    let (eps_g, eps_f) = resolve_radii(cloud, gmls)?;
    let geometry = build_geometry_with_radius(cloud, gmls.m1, eps_g, gmls.pbar).map_err(|e| e.at_stage("geometry"))?;
    let assembler = OperatorAssembler::new(cloud, &geometry, eps_f, gmls.m2, gmls.pbar);
    let ops = StokesOperators::assemble(&assembler, formulation).map_err(|e| e.at_stage("assembly"))?;
    solve_stokes(cloud, &geometry, &ops, params, formulation, forcing, cfg)
}
