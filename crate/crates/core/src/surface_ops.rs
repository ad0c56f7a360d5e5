//! Sparse exterior-calculus operators on point clouds.
//!
//! Each row is a GMLS target functional evaluated in the Monge chart of its
//! base point. With `A = sqrt|g| g^{-1}` the scalar operators are
//!
//! ```text
//! LB f    = (1/sqrt|g|) d_i (A^ij d_j f)
//! BH f    = LB (LB f)
//! CurvK f = (1/sqrt|g|) d_i (K A^ij d_j f)
//! curl0 f = (d_v f sigma_u - d_u f sigma_v) / sqrt|g|
//! curl1 v = (d_v (v . sigma_u) - d_u (v . sigma_v)) / sqrt|g|
//! ```
//!
//! so that `curl1 curl0 = LB` and `curl1 K curl0 = CurvK`. Vector fields
//! are stored ambient-componentwise, entry `3 i + c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{collect_points, Error, Result};
use crate::geometry::{resolve_radii, MongeChart, MongeJets, SurfaceGeometry};
use crate::gmls::{weight, GmlsConfig, GmlsProblem, PolyBasis2D};
use crate::jet::{n_terms, term_exponents, Jet};
use crate::point_cloud::{PointCloud, Vec3};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    LaplaceBeltrami,
    Biharmonic,
    CurvatureLaplacian,
    Curl0,
    Curl1,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::LaplaceBeltrami,
        OperatorKind::Biharmonic,
        OperatorKind::CurvatureLaplacian,
        OperatorKind::Curl0,
        OperatorKind::Curl1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::LaplaceBeltrami => "lb",
            OperatorKind::Biharmonic => "bh",
            OperatorKind::CurvatureLaplacian => "curv_k",
            OperatorKind::Curl0 => "curl0",
            OperatorKind::Curl1 => "curl1",
        }
    }

    pub fn parse(s: &str) -> Option<OperatorKind> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .or(match s.to_ascii_lowercase().as_str() {
                "laplace_beltrami" | "laplacian" => Some(OperatorKind::LaplaceBeltrami),
                "biharmonic" => Some(OperatorKind::Biharmonic),
                "curvk" | "curvature_laplacian" => Some(OperatorKind::CurvatureLaplacian),
                _ => None,
            })
    }

    /// Derivative order of the operator in the field.
    pub fn order(self) -> usize {
        match self {
            OperatorKind::Biharmonic => 4,
            OperatorKind::LaplaceBeltrami | OperatorKind::CurvatureLaplacian => 2,
            OperatorKind::Curl0 | OperatorKind::Curl1 => 1,
        }
    }

    /// Smallest geometry order whose jets determine the operator.
    pub fn min_m1(self) -> usize {
        match self {
            OperatorKind::Biharmonic => 4,
            OperatorKind::CurvatureLaplacian => 3,
            OperatorKind::LaplaceBeltrami => 2,
            OperatorKind::Curl0 | OperatorKind::Curl1 => 1,
        }
    }

    /// `(values per point in the output, values per point in the input)`.
    pub fn arity(self) -> (usize, usize) {
        match self {
            OperatorKind::Curl0 => (3, 1),
            OperatorKind::Curl1 => (1, 3),
            _ => (1, 1),
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceOperator {
    pub kind: OperatorKind,
    pub matrix: CsrMatrix,
}

impl SurfaceOperator {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.matrix.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} input values, got {}",
                self.kind,
                self.matrix.ncols,
                x.len()
            )));
        }
        Ok(self.matrix.matvec(x))
    }

    /// Apply `curl1` after checking that `v` is tangent to within
    /// `tol * max|v|` against the given normals.
    pub fn apply_tangent(&self, v: &[Vec3], normals: &[Vec3], tol: f64) -> Result<Vec<f64>> {
        check_tangent(v, normals, tol)?;
        self.apply(&flatten(v))
    }
}

/// Fails with `NonTangentInput` at the first point whose normal component
/// exceeds `tol` times the largest vector length.
pub fn check_tangent(v: &[Vec3], normals: &[Vec3], tol: f64) -> Result<()> {
    if v.len() != normals.len() {
        return Err(Error::DimensionMismatch(format!("{} vectors but {} normals", v.len(), normals.len())));
    }
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for (i, (x, n)) in v.iter().zip(normals).enumerate() {
        let c = x.dot(n);
        if c.abs() > tol * scale {
            return Err(Error::NonTangentInput {
                index: i,
                normal_component: c,
            });
        }
    }
    Ok(())
}

pub fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|x| [x.x, x.y, x.z]).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Vec3> {
    x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Covariant components `(v . sigma_u, v . sigma_v)` in each base chart.
pub fn flat(geometry: &SurfaceGeometry, v: &[Vec3]) -> Vec<[f64; 2]> {
    geometry
        .charts
        .iter()
        .zip(v)
        .map(|(c, x)| {
            let (a, b) = c.tangents(0.0, 0.0);
            [x.dot(&a), x.dot(&b)]
        })
        .collect()
}

/// Inverse of [`flat`] on tangent fields: `g^ij alpha_j sigma_i`.
pub fn sharp(geometry: &SurfaceGeometry, alpha: &[[f64; 2]]) -> Vec<Vec3> {
    geometry
        .charts
        .iter()
        .zip(alpha)
        .map(|(c, a)| {
            let (su, sv) = c.tangents(0.0, 0.0);
            let (e, f, g) = (su.dot(&su), su.dot(&sv), sv.dot(&sv));
            let det = e * g - f * f;
            let up = (g * a[0] - f * a[1]) / det;
            let vp = (-f * a[0] + e * a[1]) / det;
            su * up + sv * vp
        })
        .collect()
}

fn lb_jet(f: &Jet, j: &MongeJets) -> Jet {
    let (fu, fv) = (f.du(), f.dv());
    let flux_u = j.a_uu * fu + j.a_uv * fv;
    let flux_v = j.a_uv * fu + j.a_vv * fv;
    j.inv_sqrt_g * (flux_u.du() + flux_v.dv())
}

fn curv_jet(f: &Jet, j: &MongeJets) -> Jet {
    let (fu, fv) = (f.du(), f.dv());
    let flux_u = j.k * (j.a_uu * fu + j.a_uv * fv);
    let flux_v = j.k * (j.a_uv * fu + j.a_vv * fv);
    j.inv_sqrt_g * (flux_u.du() + flux_v.dv())
}

/// Weights `c_ab` with `L f(0) = sum c_ab d^a_u d^b_v f(0)` for an operator
/// expressed in the Monge chart, in graded order.
pub fn scalar_operator_derivatives(kind: OperatorKind, chart: &MongeChart) -> Vec<f64> {
    let k = kind.order();
    let s = chart.height_jet().truncate(kind.min_m1().max(k));
    let jets = MongeJets::new(&s);
    (0..n_terms(k))
        .map(|t| {
            let (a, b) = term_exponents(t);
            let f = Jet::monomial(a, b, 1.0 / (factorial(a) * factorial(b)), k);
            match kind {
                OperatorKind::LaplaceBeltrami => lb_jet(&f, &jets).value(),
                OperatorKind::Biharmonic => lb_jet(&lb_jet(&f, &jets), &jets).value(),
                OperatorKind::CurvatureLaplacian => curv_jet(&f, &jets).value(),
                _ => panic!("{kind} is not a scalar-to-scalar operator"),
            }
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Assembles operator matrices over a cloud and its reconstructed geometry.
pub struct OperatorAssembler<'a> {
    pub cloud: &'a PointCloud,
    pub geometry: &'a SurfaceGeometry,
    pub eps: f64,
    pub m2: usize,
    pub pbar: f64,
}

struct PointRows {
    stencil: Vec<usize>,
    rows: Vec<Vec<Vec<f64>>>,
}

impl<'a> OperatorAssembler<'a> {
    pub fn new(cloud: &'a PointCloud, geometry: &'a SurfaceGeometry, eps: f64, m2: usize, pbar: f64) -> OperatorAssembler<'a> {
        OperatorAssembler {
            cloud,
            geometry,
            eps,
            m2,
            pbar,
        }
    }

    pub fn from_config(cloud: &'a PointCloud, geometry: &'a SurfaceGeometry, config: &GmlsConfig) -> Result<OperatorAssembler<'a>> {
        let (_, eps) = resolve_radii(cloud, config)?;
        Ok(OperatorAssembler::new(cloud, geometry, eps, config.m2, config.pbar))
    }

    fn check(&self, kinds: &[OperatorKind]) -> Result<()> {
        if self.geometry.len() != self.cloud.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} charts for {} points",
                self.geometry.len(),
                self.cloud.len()
            )));
        }
        for &k in kinds {
            if self.geometry.m1 < k.min_m1() {
                return Err(Error::Config(format!("{k} needs geometry order m1 >= {}, got {}", k.min_m1(), self.geometry.m1)));
            }
            if self.m2 < k.order() {
                return Err(Error::Config(format!("{k} needs field order m2 >= {}, got {}", k.order(), self.m2)));
            }
        }
        Ok(())
    }

    fn point_rows(&self, i: usize, kinds: &[OperatorKind]) -> Result<PointRows> {
        let chart = &self.geometry.charts[i];
        let base = self.cloud.points[i];
        let stencil = self.cloud.stencil(i, self.eps);
        let coords: Vec<[f64; 2]> = stencil.iter().map(|&j| chart.local_coords(&self.cloud.points[j])).collect();
        let weights: Vec<f64> = stencil
            .iter()
            .map(|&j| weight((self.cloud.points[j] - base).norm(), self.eps, self.pbar))
            .collect();
        let basis = PolyBasis2D::new(self.m2, self.eps);
        let problem = GmlsProblem::build_weighted(i, &coords, &weights, basis)?;

        let mut targets: Vec<Vec<f64>> = Vec::new();
        let needs_grad = kinds.iter().any(|k| matches!(k, OperatorKind::Curl0 | OperatorKind::Curl1));
        for &k in kinds {
            if k.arity() == (1, 1) {
                targets.push(basis.target_from_derivatives(&scalar_operator_derivatives(k, chart)));
            }
        }
        let grad_at = targets.len();
        if needs_grad {
            targets.push(basis.derivative_target(1, 0));
            targets.push(basis.derivative_target(0, 1));
        }
        let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
        let w = problem.row_weights_many(&refs);

        let (su0, sv0) = chart.tangents(0.0, 0.0);
        let sqrt_g0 = su0.cross(&sv0).norm();
        let mut scalar = 0;
        let mut rows = Vec::with_capacity(kinds.len());
        for &k in kinds {
            let r = match k {
                OperatorKind::Curl0 => {
                    let (wu, wv) = (&w[grad_at], &w[grad_at + 1]);
                    (0..3)
                        .map(|c| {
                            wu.iter()
                                .zip(wv)
                                .map(|(a, b)| (b * su0[c] - a * sv0[c]) / sqrt_g0)
                                .collect()
                        })
                        .collect()
                }
                OperatorKind::Curl1 => {
                    let (wu, wv) = (&w[grad_at], &w[grad_at + 1]);
                    let mut row = Vec::with_capacity(3 * stencil.len());
                    for (n, xi) in coords.iter().enumerate() {
                        let (su, sv) = chart.tangents(xi[0], xi[1]);
                        for c in 0..3 {
                            row.push((wv[n] * su[c] - wu[n] * sv[c]) / sqrt_g0);
                        }
                    }
                    vec![row]
                }
                _ => {
                    scalar += 1;
                    vec![w[scalar - 1].clone()]
                }
            };
            rows.push(r);
        }
        Ok(PointRows { stencil, rows })
    }

    pub fn assemble(&self, kinds: &[OperatorKind]) -> Result<Vec<SurfaceOperator>> {
        self.check(kinds)?;
        let results: Vec<Result<PointRows>> = (0..self.cloud.len())
            .into_par_iter()
            .map(|i| self.point_rows(i, kinds))
            .collect();
        let per_point = collect_points(results)?;
        let n = self.cloud.len();
        Ok(kinds
            .iter()
            .enumerate()
            .map(|(slot, &kind)| {
                let (out, inp) = kind.arity();
                let mut rows = Vec::with_capacity(n * out);
                for pr in &per_point {
                    for r in &pr.rows[slot] {
                        let cols: Vec<usize> = if inp == 1 {
                            pr.stencil.clone()
                        } else {
                            pr.stencil.iter().flat_map(|&j| (0..3).map(move |c| 3 * j + c)).collect()
                        };
                        rows.push((cols, r.clone()));
                    }
                }
                SurfaceOperator {
                    kind,
                    matrix: CsrMatrix::from_rows(n * inp, rows),
                }
            })
            .collect())
    }

    pub fn assemble_one(&self, kind: OperatorKind) -> Result<SurfaceOperator> {
        Ok(self.assemble(&[kind])?.remove(0))
    }
}

/// Largest `|L 1|` over the rows of a scalar-input operator.
pub fn constant_residual(op: &SurfaceOperator) -> f64 {
    let (_, inp) = op.kind.arity();
    let ones = vec![1.0; op.matrix.ncols];
    let x = if inp == 1 { ones } else { ones.iter().map(|_| 0.0).collect() };
    op.matrix.matvec(&x).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use crate::point_cloud::{sample_manifold, ManifoldShape};

    fn sphere(h: f64) -> PointCloud {
        sample_manifold(&ManifoldShape::unit_sphere(), h, 7).unwrap()
    }

    fn ops(cloud: &PointCloud, m: usize) -> (SurfaceGeometry, Vec<SurfaceOperator>) {
        let cfg = GmlsConfig::with_orders(m, m);
        let geom = build_geometry(cloud, &cfg).unwrap();
        let asm = OperatorAssembler::from_config(cloud, &geom, &cfg).unwrap();
        let ops = asm.assemble(&OperatorKind::ALL).unwrap();
        (geom, ops)
    }

    fn l2(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn flat_derivatives_on_a_plane() {
        let frame = crate::geometry::TangentFrame {
            base: Vec3::zeros(),
            centroid: Vec3::zeros(),
            psi1: Vec3::x(),
            psi2: Vec3::y(),
            eta: Vec3::z(),
        };
        let chart = MongeChart::new(frame, PolyBasis2D::new(4, 1.0), vec![0.0; 15], 1.0);
        let lb = scalar_operator_derivatives(OperatorKind::LaplaceBeltrami, &chart);
        // u^2 / 2 and v^2 / 2 coefficients carry the Laplacian.
        let idx = |i, j| crate::jet::term_index(i, j);
        assert_eq!(lb[idx(2, 0)], 1.0);
        assert_eq!(lb[idx(0, 2)], 1.0);
        assert_eq!(lb[idx(1, 1)], 0.0);
        let bh = scalar_operator_derivatives(OperatorKind::Biharmonic, &chart);
        assert_eq!(bh[idx(4, 0)], 1.0);
        assert_eq!(bh[idx(2, 2)], 2.0);
        assert_eq!(bh[idx(0, 4)], 1.0);
    }

    #[test]
    fn sphere_spectra_and_identities() {
        let cloud = sphere(0.1);
        let (geom, ops) = ops(&cloud, 6);
        let [lb, bh, ck, c0, c1] = [&ops[0], &ops[1], &ops[2], &ops[3], &ops[4]];
        // xy is an l = 2 eigenfunction.
        let f: Vec<f64> = cloud.points.iter().map(|p| p.x * p.y).collect();
        let lbf = lb.apply(&f).unwrap();
        let exact: Vec<f64> = f.iter().map(|v| -6.0 * v).collect();
        assert!(l2(&lbf, &exact) < 2e-3, "{}", l2(&lbf, &exact));
        let bhf = bh.apply(&f).unwrap();
        let exact: Vec<f64> = f.iter().map(|v| 36.0 * v).collect();
        assert!(l2(&bhf, &exact) < 5e-2, "{}", l2(&bhf, &exact));
        // K = 1 on the unit sphere.
        let ckf = ck.apply(&f).unwrap();
        assert!(l2(&ckf, &lbf) < 2e-3, "{}", l2(&ckf, &lbf));
        // curl1 curl0 = +LB
        let cc = c1.apply(&c0.apply(&f).unwrap()).unwrap();
        assert!(l2(&cc, &lbf) < 5e-3, "{}", l2(&cc, &lbf));
        for op in [lb, bh, ck, c0] {
            assert!(constant_residual(op) < 1e-8, "{} {}", op.kind, constant_residual(op));
        }
        // curl0 output is tangent.
        let v = unflatten(&c0.apply(&f).unwrap());
        check_tangent(&v, &geom.normals(), 1e-12).unwrap();
        // sharp(flat(v)) = v on tangent fields.
        let back = sharp(&geom, &flat(&geom, &v));
        let err = back.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn curl1_rejects_normal_fields() {
        let cloud = sphere(0.2);
        let cfg = GmlsConfig::with_orders(2, 2);
        let geom = build_geometry(&cloud, &cfg).unwrap();
        let c1 = OperatorAssembler::from_config(&cloud, &geom, &cfg)
            .unwrap()
            .assemble_one(OperatorKind::Curl1)
            .unwrap();
        let normals = geom.normals();
        let err = c1.apply_tangent(&normals, &normals, 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonTangentInput { .. }));
    }

    #[test]
    fn order_requirements_are_checked() {
        let cloud = sphere(0.2);
        let cfg = GmlsConfig::with_orders(2, 2);
        let geom = build_geometry(&cloud, &cfg).unwrap();
        let asm = OperatorAssembler::from_config(&cloud, &geom, &cfg).unwrap();
        assert!(matches!(asm.assemble(&[OperatorKind::Biharmonic]), Err(Error::Config(_))));
    }
}
