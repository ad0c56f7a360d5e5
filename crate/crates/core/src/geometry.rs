//! Tangent frames, Monge-gauge charts and their differential geometry.
//!
//! Around each sample `x_i` the surface is written as
//! `sigma(u, v) = x_i + u psi1 + v psi2 + s(u, v) eta` with `s` a GMLS
//! polynomial fit of the neighbor heights. All metric quantities follow from
//! derivatives of `s`:
//!
//! ```text
//! g = 1 + s_u^2 + s_v^2          sqrt|g| g^ij = [1 + s_v^2, -s_u s_v; -s_u s_v, 1 + s_u^2] / sqrt(g)
//! K = (s_uu s_vv - s_uv^2) / g^2
//! ```

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{collect_points, Error, Result};
use crate::gmls::{select_epsilon, GmlsConfig, GmlsProblem, PolyBasis2D};
use crate::jet::Jet;
use crate::point_cloud::{PointCloud, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentFrame {
    pub base: Vec3,
    pub centroid: Vec3,
    pub psi1: Vec3,
    pub psi2: Vec3,
    pub eta: Vec3,
}

impl TangentFrame {
    /// `(u, v, height)` of `x` relative to the base point.
    #[inline]
    pub fn local(&self, x: &Vec3) -> [f64; 3] {
        let d = x - self.base;
        [d.dot(&self.psi1), d.dot(&self.psi2), d.dot(&self.eta)]
    }

    /// The same frame with its tangent pair turned by `angle` about `eta`.
    pub fn rotated(&self, angle: f64) -> TangentFrame {
        let (s, c) = angle.sin_cos();
        TangentFrame {
            psi1: self.psi1 * c + self.psi2 * s,
            psi2: -self.psi1 * s + self.psi2 * c,
            ..*self
        }
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let m = Matrix3::from_columns(&[self.psi1, self.psi2, self.eta]);
        let d = m.transpose() * m - Matrix3::identity();
        let handed = (self.psi1.cross(&self.psi2) - self.eta).norm();
        d.abs().max().max(handed)
    }
}

/// PCA frame from the neighbors of point `i` within `eps`.
pub fn pca_frame(cloud: &PointCloud, i: usize, eps: f64) -> Result<TangentFrame> {
    let nbrs: Vec<Vec3> = cloud.stencil(i, eps).into_iter().map(|j| cloud.points[j]).collect();
    pca_frame_from(i, cloud.points[i], &nbrs, &cloud.normals[i])
}

pub fn pca_frame_from(index: usize, base: Vec3, nbrs: &[Vec3], reference: &Vec3) -> Result<TangentFrame> {
    if nbrs.len() < 3 {
        return Err(Error::degenerate(index, format!("{} points in the PCA neighborhood", nbrs.len())));
    }
    let centroid = nbrs.iter().fold(Vec3::zeros(), |a, p| a + p) / nbrs.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in nbrs {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= nbrs.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then_with(|| {
            let (va, vb) = (eig.eigenvectors.column(a), eig.eigenvectors.column(b));
            (0..3)
                .map(|k| va[k].total_cmp(&vb[k]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let lam: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if !(lam[1] > 0.0) || lam[1] < 10.0 * lam[2].max(0.0) {
        return Err(Error::degenerate(
            index,
            format!("PCA eigenvalues {:.3e}, {:.3e}, {:.3e} not separated", lam[0], lam[1], lam[2]),
        ));
    }
    let psi1: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    let mut eta: Vec3 = eig.eigenvectors.column(order[2]).into_owned().normalize();
    if eta.dot(reference) <= 0.0 {
        eta = -eta;
    }
    // re-orthonormalize to machine precision
    let psi1 = (psi1 - eta * eta.dot(&psi1)).normalize();
    let psi2 = eta.cross(&psi1);
    Ok(TangentFrame {
        base,
        centroid,
        psi1,
        psi2,
        eta,
    })
}

/// Height-function chart `sigma(u, v) = base + u psi1 + v psi2 + s(u, v) eta`.
#[derive(Clone, Debug)]
pub struct MongeChart {
    pub frame: TangentFrame,
    pub basis: PolyBasis2D,
    pub coeffs: Vec<f64>,
    pub eps: f64,
    s: Jet,
    su: Jet,
    sv: Jet,
}

impl MongeChart {
    pub fn new(frame: TangentFrame, basis: PolyBasis2D, coeffs: Vec<f64>, eps: f64) -> MongeChart {
        let s = basis.to_jet(&coeffs, basis.order);
        MongeChart {
            frame,
            basis,
            coeffs,
            eps,
            su: s.du(),
            sv: s.dv(),
            s,
        }
    }

    /// Order of the height polynomial.
    pub fn order(&self) -> usize {
        self.basis.order
    }

    /// The height polynomial as an exact jet about the origin.
    pub fn height_jet(&self) -> &Jet {
        &self.s
    }

    pub fn height(&self, u: f64, v: f64) -> f64 {
        self.s.eval(u, v)
    }

    #[inline]
    pub fn local_coords(&self, x: &Vec3) -> [f64; 2] {
        let d = x - self.frame.base;
        [d.dot(&self.frame.psi1), d.dot(&self.frame.psi2)]
    }

    pub fn embed(&self, u: f64, v: f64) -> Vec3 {
        let f = &self.frame;
        f.base + f.psi1 * u + f.psi2 * v + f.eta * self.height(u, v)
    }

    /// `(sigma_u, sigma_v)` at `(u, v)`.
    pub fn tangents(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let (su, sv) = (self.su.eval(u, v), self.sv.eval(u, v));
        let f = &self.frame;
        (f.psi1 + f.eta * su, f.psi2 + f.eta * sv)
    }

    /// Unit normal of the fitted surface at `(u, v)`.
    pub fn normal(&self, u: f64, v: f64) -> Vec3 {
        let (a, b) = self.tangents(u, v);
        a.cross(&b).normalize()
    }
}

/// Height fit over a frame using the stencil of point `i`.
pub fn fit_monge(cloud: &PointCloud, i: usize, frame: &TangentFrame, eps: f64, m1: usize, pbar: f64) -> Result<MongeChart> {
    let nbrs = cloud.stencil(i, eps);
    let mut coords = Vec::with_capacity(nbrs.len());
    let mut heights = Vec::with_capacity(nbrs.len());
    let mut weights = Vec::with_capacity(nbrs.len());
    for &j in &nbrs {
        if cloud.normals[j].dot(&frame.eta) <= 0.0 {
            return Err(Error::GraphFailure { index: i });
        }
        let [u, v, h] = frame.local(&cloud.points[j]);
        coords.push([u, v]);
        heights.push(h);
        weights.push(crate::gmls::weight((cloud.points[j] - frame.base).norm(), eps, pbar));
    }
    let basis = PolyBasis2D::new(m1, eps);
    let problem = GmlsProblem::build_weighted(i, &coords, &weights, basis)?;
    let coeffs = problem.fit(&heights)?;
    Ok(MongeChart::new(*frame, basis, coeffs.a, eps))
}

/// Metric jets of a Monge patch: `sqrt|g| g^ij`, `1/sqrt|g|` and `K`.
#[derive(Clone, Copy, Debug)]
pub struct MongeJets {
    pub su: Jet,
    pub sv: Jet,
    pub g: Jet,
    pub sqrt_g: Jet,
    pub inv_sqrt_g: Jet,
    pub a_uu: Jet,
    pub a_uv: Jet,
    pub a_vv: Jet,
    pub k: Jet,
}

impl MongeJets {
    pub fn new(s: &Jet) -> MongeJets {
        let su = s.du();
        let sv = s.dv();
        let g = su * su + sv * sv + 1.0;
        let sqrt_g = g.sqrt();
        let inv_sqrt_g = sqrt_g.recip();
        let a_uu = (sv * sv + 1.0) * inv_sqrt_g;
        let a_uv = -(su * sv) * inv_sqrt_g;
        let a_vv = (su * su + 1.0) * inv_sqrt_g;
        let (suu, suv, svv) = (su.du(), su.dv(), sv.dv());
        let k = (suu * svv - suv * suv) * g.powi(2).recip();
        MongeJets {
            su,
            sv,
            g,
            sqrt_g,
            inv_sqrt_g,
            a_uu,
            a_uv,
            a_vv,
            k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricData {
    /// First fundamental form `[E F; F G]`.
    pub first: Matrix2<f64>,
    /// Second fundamental form `[L M; M N]`.
    pub second: Matrix2<f64>,
    pub sqrt_g: f64,
    pub inv_first: Matrix2<f64>,
    pub weingarten: Matrix2<f64>,
    pub k: f64,
    /// Jets of `sqrt|g| g^uu`, `sqrt|g| g^uv`, `sqrt|g| g^vv` to `deriv_order`.
    pub prefactor: [Jet; 3],
    /// Jet of the Gaussian curvature to `min(deriv_order, 1)`.
    pub k_jet: Jet,
}

impl MetricData {
    /// `K` from the closed-form Monge expression rather than `det(W)`.
    pub fn k_closed_form(&self) -> f64 {
        self.k_jet.value()
    }
}

pub fn metric_at(chart: &MongeChart, uv: [f64; 2], deriv_order: usize) -> MetricData {
    let s = if uv == [0.0, 0.0] {
        *chart.height_jet()
    } else {
        chart.height_jet().shifted(uv[0], uv[1])
    };
    let j = MongeJets::new(&s);
    let (su, sv) = (j.su.value(), j.sv.value());
    let (suu, suv, svv) = (s.partial(2, 0), s.partial(1, 1), s.partial(0, 2));
    let sqrt_g = j.sqrt_g.value();
    let first = Matrix2::new(1.0 + su * su, su * sv, su * sv, 1.0 + sv * sv);
    let second = Matrix2::new(suu, suv, suv, svv) / sqrt_g;
    let inv_first = first.try_inverse().expect("first fundamental form is positive definite");
    let weingarten = inv_first * second;
    MetricData {
        first,
        second,
        sqrt_g,
        inv_first,
        weingarten,
        k: weingarten.determinant(),
        prefactor: [
            j.a_uu.truncate(deriv_order),
            j.a_uv.truncate(deriv_order),
            j.a_vv.truncate(deriv_order),
        ],
        k_jet: j.k.truncate(deriv_order.min(1)),
    }
}

/// Frames and charts for every point of a cloud.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    pub charts: Vec<MongeChart>,
    pub eps: f64,
    pub m1: usize,
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    /// Gaussian curvature at each base point.
    pub fn gauss_curvature(&self) -> Vec<f64> {
        self.charts.iter().map(|c| metric_at(c, [0.0, 0.0], 0).k).collect()
    }

    /// Chart normals at the base points.
    pub fn normals(&self) -> Vec<Vec3> {
        self.charts.iter().map(|c| c.normal(0.0, 0.0)).collect()
    }
}

/// Radii for geometry and field stencils. Unless fixed in the config both use
/// the radius selected for the larger of the two orders.
pub fn resolve_radii(cloud: &PointCloud, config: &GmlsConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let shared = match (config.eps_geom, config.eps_field) {
        (Some(g), Some(f)) => return Ok((g, f)),
        _ => select_epsilon(cloud, config.m1.max(config.m2), config)?,
    };
    Ok((config.eps_geom.unwrap_or(shared), config.eps_field.unwrap_or(shared)))
}

pub fn build_geometry(cloud: &PointCloud, config: &GmlsConfig) -> Result<SurfaceGeometry> {
    let (eps, _) = resolve_radii(cloud, config)?;
    build_geometry_with_radius(cloud, config.m1, eps, config.pbar)
}

pub fn build_geometry_with_radius(cloud: &PointCloud, m1: usize, eps: f64, pbar: f64) -> Result<SurfaceGeometry> {
    let results: Vec<Result<MongeChart>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let frame = pca_frame(cloud, i, eps)?;
            fit_monge(cloud, i, &frame, eps, m1, pbar)
        })
        .collect();
    let charts = collect_points(results)?;
    Ok(SurfaceGeometry { charts, eps, m1 })
}

/// Gaussian curvature at every sample from its Weingarten map.
pub fn gauss_curvature_field(cloud: &PointCloud, config: &GmlsConfig) -> Result<Vec<f64>> {
    Ok(build_geometry(cloud, config)?.gauss_curvature())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_cloud(n: usize, d: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 - n as f64 / 2.0) * d, (j as f64 - n as f64 / 2.0) * d);
                pts.push(Vec3::new(x + 0.3 * d * ((i * 7 + j * 3) % 5) as f64 / 5.0, y, 0.0));
            }
        }
        let nrm = vec![Vec3::z(); pts.len()];
        PointCloud::new(pts, nrm, d, None, 0).unwrap()
    }

    #[test]
    fn coplanar_frame_normal() {
        let c = plane_cloud(9, 0.1);
        let f = pca_frame(&c, 40, 0.35).unwrap();
        assert!((f.eta - Vec3::z()).norm() < 1e-12);
        assert!(f.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn collinear_frame_is_degenerate() {
        let pts = vec![Vec3::zeros(), Vec3::x() * 0.1, Vec3::x() * 0.2];
        let c = PointCloud::new(pts, vec![Vec3::z(); 3], 0.1, None, 0).unwrap();
        assert!(matches!(pca_frame(&c, 1, 1.0), Err(Error::DegenerateNeighborhood { .. })));
    }

    #[test]
    fn plane_chart_is_flat() {
        let c = plane_cloud(11, 0.1);
        let f = pca_frame(&c, 60, 0.45).unwrap();
        let chart = fit_monge(&c, 60, &f, 0.45, 3, 2.0).unwrap();
        assert!(chart.coeffs.iter().all(|a| a.abs() < 1e-12));
        let m = metric_at(&chart, [0.0, 0.0], 2);
        assert!((m.first - Matrix2::identity()).abs().max() < 1e-12);
        assert!(m.k.abs() < 1e-10 && m.second.abs().max() < 1e-12);
        assert!((m.sqrt_g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paraboloid_coefficients() {
        let mut pts = Vec::new();
        for i in -6i32..=6 {
            for j in -6i32..=6 {
                let (x, y) = (i as f64 * 0.05 + 0.01 * (j as f64).sin(), j as f64 * 0.05);
                pts.push(Vec3::new(x, y, x * x + y * y));
            }
        }
        let nrm: Vec<Vec3> = pts.iter().map(|p| Vec3::new(-2.0 * p.x, -2.0 * p.y, 1.0)).collect();
        let c = PointCloud::new(pts, nrm, 0.05, None, 0).unwrap();
        let i = 84; // the sample at the origin
        assert!(c.points[i].norm() < 1e-15);
        let frame = TangentFrame {
            base: c.points[i],
            centroid: c.points[i],
            psi1: Vec3::x(),
            psi2: Vec3::y(),
            eta: Vec3::z(),
        };
        let chart = fit_monge(&c, i, &frame, 0.3, 4, 2.0).unwrap();
        let s = chart.height_jet();
        assert!((s.coeff(2, 0) - 1.0).abs() < 1e-10);
        assert!(s.coeff(1, 1).abs() < 1e-10);
        assert!((s.coeff(0, 2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn metric_identities_on_a_curved_patch() {
        let basis = PolyBasis2D::new(4, 1.0);
        let mut a = vec![0.0; basis.dim()];
        a[3] = -0.5;
        a[4] = 0.2;
        a[5] = -0.4;
        a[7] = 0.1;
        a[12] = 0.05;
        let frame = TangentFrame {
            base: Vec3::zeros(),
            centroid: Vec3::zeros(),
            psi1: Vec3::x(),
            psi2: Vec3::y(),
            eta: Vec3::z(),
        };
        let chart = MongeChart::new(frame, basis, a, 1.0);
        for uv in [[0.0, 0.0], [0.1, -0.2], [0.3, 0.05]] {
            let m = metric_at(&chart, uv, 2);
            assert!((m.first.determinant() * m.inv_first.determinant() - 1.0).abs() < 1e-10);
            assert!((m.k - m.k_closed_form()).abs() < 1e-10);
            let (su, sv) = (m.prefactor[0].value(), m.sqrt_g);
            assert!(su > 0.0 && sv >= 1.0);
        }
    }
}
