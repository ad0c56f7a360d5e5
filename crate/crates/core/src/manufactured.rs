//! Exact-solution oracle: analytic fields, exact operator values through
//! closed-form surface parameterizations, manufactured Stokes forcing,
//! error norms and convergence records.
//!
//! Exact values are computed with truncated Taylor arithmetic on a chart
//! `X(u, v)` around each point, using the general-metric formulas
//! `LB f = (1/sqrt g) d_i (sqrt g g^ij d_j f)` and friends. Two chart families
//! are available and must agree: a projection of the tangent plane onto the
//! surface, and global angle parameterizations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use crate::point_cloud::{chebyshev_u, ManifoldShape, Vec3};

const JET_DEGREE: usize = 6;
const POLE_GUARD: f64 = 1e-3;

/// Closed-form ambient scalar fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticScalar {
    /// A homogeneous harmonic polynomial of the given degree (0 to 5); its
    /// restriction to the unit sphere is a spherical harmonic.
    HarmonicPolynomial { degree: u32 },
    /// `z (x^4 - 6 x^2 y^2 + y^4) / r^5`, the real part of `Y_5^4` up to
    /// normalization, as a function of direction only.
    AngularHarmonic54,
    Constant { value: f64 },
}

impl AnalyticScalar {
    /// `z (x^4 + y^4 - 6 x^2 y^2)`.
    pub fn test_field() -> AnalyticScalar {
        AnalyticScalar::HarmonicPolynomial { degree: 5 }
    }

    pub fn eval<T: Real>(&self, x: [T; 3]) -> T {
        let [x, y, z] = x;
        match *self {
            AnalyticScalar::HarmonicPolynomial { degree } => match degree {
                0 => x.constant_like(1.0),
                1 => z,
                2 => x * y,
                3 => z * (z * z * 2.0 - x * x * 3.0 - y * y * 3.0),
                4 => x * y * (x * x - y * y),
                5 => z * sector4(x, y),
                _ => panic!("harmonic polynomials are provided up to degree 5"),
            },
            AnalyticScalar::AngularHarmonic54 => {
                let r2 = x * x + y * y + z * z;
                let inv_r = r2.sqrt().recip();
                let inv_r5 = inv_r * inv_r * inv_r * inv_r * inv_r;
                z * sector4(x, y) * inv_r5
            }
            AnalyticScalar::Constant { value } => x.constant_like(value),
        }
    }

    pub fn value(&self, p: &Vec3) -> f64 {
        self.eval([p.x, p.y, p.z])
    }

    pub fn values(&self, points: &[Vec3]) -> Vec<f64> {
        points.iter().map(|p| self.value(p)).collect()
    }

    /// `d^k/dt^k f(p + t d)` at `t = 0` for `k = 0..=order`.
    pub fn directional_derivatives(&self, p: &Vec3, d: &Vec3, order: usize) -> Vec<f64> {
        let x = [0, 1, 2].map(|c| Jet::var_u(0.0, order) * d[c] + p[c]);
        let j = self.eval(x);
        (0..=order).map(|k| j.partial(k, 0)).collect()
    }

    /// Ambient partial derivative `d^a_x d^b_y d^c_z f(p)`, total order at
    /// most 8, recovered from directional derivatives by polarization.
    pub fn partial(&self, p: &Vec3, alpha: [usize; 3]) -> f64 {
        let k: usize = alpha.iter().sum();
        // P(d) = D_d^k f = sum_{|b|=k} k!/b! d^b f_b, sampled at d = (1, i, j).
        let betas: Vec<(usize, usize)> = (0..=k).flat_map(|by| (0..=k - by).map(move |bz| (by, bz))).collect();
        let m = betas.len();
        let mut a = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (row, &(i, j)) in betas.iter().enumerate() {
            let d = Vec3::new(1.0, i as f64, j as f64);
            rhs[row] = self.directional_derivatives(p, &d, k)[k];
            for (col, &(by, bz)) in betas.iter().enumerate() {
                let bx = k - by - bz;
                let multinomial = factorial(k) / (factorial(bx) * factorial(by) * factorial(bz));
                a[(row, col)] = multinomial * (i as f64).powi(by as i32) * (j as f64).powi(bz as i32);
            }
        }
        let sol = a.lu().solve(&rhs).expect("polarization system is unisolvent");
        let col = betas.iter().position(|&b| b == (alpha[1], alpha[2])).unwrap();
        sol[col]
    }
}

fn sector4<T: Real>(x: T, y: T) -> T {
    let (x2, y2) = (x * x, y * y);
    x2 * x2 - x2 * y2 * 6.0 + y2 * y2
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartBackend {
    /// The tangent plane at the point mapped onto the surface by the
    /// shape's closed-form projection.
    TangentProjection,
    /// Spherical angles (radial shapes and ellipsoids) or torus angles,
    /// with a rotated pole near the polar axis.
    GlobalAngles,
}

/// Jets of a surface chart about one point, with metric quantities.
#[derive(Clone, Debug)]
pub struct ExactPoint {
    pub point: Vec3,
    x: [Jet; 3],
    xu: [Jet; 3],
    xv: [Jet; 3],
    inv_sqrt_g: Jet,
    a_uu: Jet,
    a_uv: Jet,
    a_vv: Jet,
    k: Jet,
    /// `+1` when `X_u x X_v` points outward.
    sign: f64,
}

fn dot3(a: &[Jet; 3], b: &[Jet; 3]) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn value3(a: &[Jet; 3]) -> Vec3 {
    Vec3::new(a[0].value(), a[1].value(), a[2].value())
}

impl ExactPoint {
    pub fn new(shape: &ManifoldShape, p: &Vec3, backend: ChartBackend) -> Result<ExactPoint> {
        if !shape.is_analytic() {
            return Err(Error::NoProjectionAvailable);
        }
        let outward = shape.normal(p).ok_or(Error::ChartSingularity)?;
        let x = match backend {
            ChartBackend::TangentProjection => tangent_chart(shape, p, &outward)?,
            ChartBackend::GlobalAngles => angle_chart(shape, p)?,
        };
        let xu = x.map(|c| c.du());
        let xv = x.map(|c| c.dv());
        let (e, f, g) = (dot3(&xu, &xu), dot3(&xu, &xv), dot3(&xv, &xv));
        let det = e * g - f * f;
        if !(det.value() > 0.0) {
            return Err(Error::ChartSingularity);
        }
        let sqrt_g = det.sqrt();
        let inv_sqrt_g = sqrt_g.recip();
        let nrm = cross3(&xu, &xv).map(|c| c * inv_sqrt_g);
        let (xuu, xuv, xvv) = (xu.map(|c| c.du()), xu.map(|c| c.dv()), xv.map(|c| c.dv()));
        let (l, m, n) = (dot3(&xuu, &nrm), dot3(&xuv, &nrm), dot3(&xvv, &nrm));
        let k = (l * n - m * m) * det.recip();
        let sign = if value3(&nrm).dot(&outward) >= 0.0 { 1.0 } else { -1.0 };
        Ok(ExactPoint {
            point: *p,
            x,
            xu,
            xv,
            inv_sqrt_g,
            a_uu: g * inv_sqrt_g,
            a_uv: -f * inv_sqrt_g,
            a_vv: e * inv_sqrt_g,
            k,
            sign,
        })
    }

    /// Distance between the chart origin and the requested point.
    pub fn origin_offset(&self) -> f64 {
        (value3(&self.x) - self.point).norm()
    }

    pub fn gauss_curvature(&self) -> f64 {
        self.k.value()
    }

    pub fn outward_normal(&self) -> Vec3 {
        value3(&self.xu).cross(&value3(&self.xv)).normalize() * self.sign
    }

    /// Pull an ambient field back to the chart.
    pub fn compose(&self, f: &AnalyticScalar) -> Jet {
        f.eval(self.x)
    }

    pub fn lb_jet(&self, f: &Jet) -> Jet {
        self.div_flux(f, None)
    }

    fn div_flux(&self, f: &Jet, weight: Option<&Jet>) -> Jet {
        let (fu, fv) = (f.du(), f.dv());
        let mut flux_u = self.a_uu * fu + self.a_uv * fv;
        let mut flux_v = self.a_uv * fu + self.a_vv * fv;
        if let Some(w) = weight {
            flux_u = *w * flux_u;
            flux_v = *w * flux_v;
        }
        self.inv_sqrt_g * (flux_u.du() + flux_v.dv())
    }

    pub fn laplace_beltrami(&self, f: &AnalyticScalar) -> f64 {
        self.lb_jet(&self.compose(f)).value()
    }

    pub fn biharmonic(&self, f: &AnalyticScalar) -> f64 {
        self.lb_jet(&self.lb_jet(&self.compose(f))).value()
    }

    pub fn curv_k(&self, f: &AnalyticScalar) -> f64 {
        self.div_flux(&self.compose(f), Some(&self.k)).value()
    }

    /// `(f_v X_u - f_u X_v) / sqrt g`, oriented by the outward normal.
    pub fn curl0_jet(&self, f: &Jet) -> [Jet; 3] {
        let (fu, fv) = (f.du(), f.dv());
        let s = self.inv_sqrt_g * self.sign;
        [0, 1, 2].map(|c| (fv * self.xu[c] - fu * self.xv[c]) * s)
    }

    pub fn curl0(&self, f: &AnalyticScalar) -> Vec3 {
        value3(&self.curl0_jet(&self.compose(f)))
    }

    /// `(d_v (V . X_u) - d_u (V . X_v)) / sqrt g` for an ambient vector jet.
    pub fn curl1_jet(&self, v: &[Jet; 3]) -> Jet {
        let au = dot3(v, &self.xu);
        let av = dot3(v, &self.xv);
        (av.du() * -1.0 + au.dv()) * self.inv_sqrt_g * self.sign
    }

    pub fn curl1_of_curl0(&self, f: &AnalyticScalar) -> f64 {
        self.curl1_jet(&self.curl0_jet(&self.compose(f))).value()
    }

    /// `b = -mu curl0(LB f) + (gamma - 2 mu K) curl0 f`, the forcing whose
    /// Stokes solution has stream function `f` and zero pressure.
    pub fn forcing_jet(&self, f: &AnalyticScalar, mu: f64, gamma: f64) -> [Jet; 3] {
        let fj = self.compose(f);
        let w = self.curl0_jet(&self.lb_jet(&fj));
        let v = self.curl0_jet(&fj);
        let drag = self.k * (-2.0 * mu) + gamma;
        [0, 1, 2].map(|c| w[c] * -mu + drag * v[c])
    }

    pub fn forcing(&self, f: &AnalyticScalar, mu: f64, gamma: f64) -> Vec3 {
        value3(&self.forcing_jet(f, mu, gamma))
    }

    /// The same forcing written through the vorticity of `v = curl0 f`:
    /// `-mu curl0(curl1 v) + (gamma - 2 mu K) v`.
    pub fn forcing_via_vorticity(&self, f: &AnalyticScalar, mu: f64, gamma: f64) -> Vec3 {
        let v = self.curl0_jet(&self.compose(f));
        let w = self.curl0_jet(&self.curl1_jet(&v));
        let drag = self.k.value() * (-2.0 * mu) + gamma;
        value3(&[0, 1, 2].map(|c| w[c] * -mu)) + value3(&v) * drag
    }

    /// `curl1 b`, the right-hand side of the stream-function equation.
    pub fn forcing_vorticity(&self, f: &AnalyticScalar, mu: f64, gamma: f64) -> f64 {
        self.curl1_jet(&self.forcing_jet(f, mu, gamma)).value()
    }

    /// Covariant components `(b . X_u, b . X_v)` and back, for round trips.
    pub fn flat(&self, v: &Vec3) -> [f64; 2] {
        [v.dot(&value3(&self.xu)), v.dot(&value3(&self.xv))]
    }
}

fn tangent_chart(shape: &ManifoldShape, p: &Vec3, n: &Vec3) -> Result<[Jet; 3]> {
    let axis = n.iamin();
    let mut t1 = Vec3::zeros();
    t1[axis] = 1.0;
    t1 = (t1 - n * n[axis]).normalize();
    let t2 = n.cross(&t1);
    let q = [0, 1, 2].map(|c| Jet::var_u(0.0, JET_DEGREE) * t1[c] + Jet::var_v(0.0, JET_DEGREE) * t2[c] + p[c]);
    match *shape {
        ManifoldShape::TorusD { .. } => {
            let (big, small) = shape.torus_radii().ok_or(Error::ChartSingularity)?;
            let rho2 = q[0] * q[0] + q[1] * q[1];
            if !(rho2.value() > 0.0) {
                return Err(Error::ChartSingularity);
            }
            let inv_rho = rho2.sqrt().recip();
            let c = [q[0] * inv_rho * big, q[1] * inv_rho * big, Jet::zero(JET_DEGREE)];
            let w = [q[0] - c[0], q[1] - c[1], q[2]];
            let inv_w = dot3(&w, &w).sqrt().recip();
            Ok([0, 1, 2].map(|k| c[k] + w[k] * inv_w * small))
        }
        ManifoldShape::UserLevelSet => Err(Error::NoProjectionAvailable),
        _ => {
            let inv = dot3(&q, &q).sqrt().recip();
            let d = q.map(|c| c * inv);
            let r = shape.radius(d);
            Ok(d.map(|c| c * r))
        }
    }
}

fn angle_chart(shape: &ManifoldShape, p: &Vec3) -> Result<[Jet; 3]> {
    let var = |v0: f64, which: usize| {
        if which == 0 {
            Jet::var_u(v0, JET_DEGREE)
        } else {
            Jet::var_v(v0, JET_DEGREE)
        }
    };
    match *shape {
        ManifoldShape::EllipsoidA { a, b, s0 } => {
            let (ex, ey, ez) = (p.x / (a * s0), p.y / (b * s0), p.z / s0);
            let cos_polar = ez.clamp(-1.0, 1.0);
            if (1.0 - cos_polar * cos_polar).sqrt() >= POLE_GUARD {
                let (ph, th) = (var(cos_polar.acos(), 0), var(ey.atan2(ex), 1));
                let sp = ph.sin();
                Ok([sp * th.cos() * (a * s0), sp * th.sin() * (b * s0), ph.cos() * s0])
            } else {
                // polar axis along x
                let (ph, th) = (var(ex.clamp(-1.0, 1.0).acos(), 0), var(ez.atan2(ey), 1));
                let sp = ph.sin();
                Ok([ph.cos() * (a * s0), sp * th.cos() * (b * s0), sp * th.sin() * s0])
            }
        }
        ManifoldShape::RadialB { r0, freq } | ManifoldShape::RadialC { r0, freq } => {
            let d = p.normalize();
            if (1.0 - d.z * d.z).max(0.0).sqrt() >= POLE_GUARD {
                let (ph, th) = (var(d.z.clamp(-1.0, 1.0).acos(), 0), var(d.y.atan2(d.x), 1));
                let sp = ph.sin();
                let dir = [sp * th.cos(), sp * th.sin(), ph.cos()];
                let r = (ph * freq as f64).sin() * th.cos() * r0 + 1.0;
                Ok(dir.map(|c| c * r))
            } else {
                let (ph, th) = (var(d.x.clamp(-1.0, 1.0).acos(), 0), var(d.z.atan2(d.y), 1));
                let sp = ph.sin();
                let dir = [ph.cos(), sp * th.cos(), sp * th.sin()];
                let r = dir[0] * chebyshev_u(freq as usize - 1, dir[2]) * r0 + 1.0;
                Ok(dir.map(|c| c * r))
            }
        }
        ManifoldShape::TorusD { .. } => {
            let (big, small) = shape.torus_radii().ok_or(Error::ChartSingularity)?;
            let rho = p.x.hypot(p.y);
            let (ph, th) = (var(p.y.atan2(p.x), 0), var(p.z.atan2(rho - big), 1));
            let ring = th.cos() * small + big;
            Ok([ring * ph.cos(), ring * ph.sin(), th.sin() * small])
        }
        ManifoldShape::UserLevelSet => Err(Error::NoProjectionAvailable),
    }
}

/// Hand-derived Gaussian curvature where a closed form is known.
pub fn closed_form_gauss_curvature(shape: &ManifoldShape, p: &Vec3) -> Option<f64> {
    match *shape {
        ManifoldShape::EllipsoidA { a, b, s0 } => {
            let (ra, rb, rc) = (a * s0, b * s0, s0);
            let q = p.x * p.x / ra.powi(4) + p.y * p.y / rb.powi(4) + p.z * p.z / rc.powi(4);
            Some(1.0 / ((ra * rb * rc).powi(2) * q * q))
        }
        ManifoldShape::TorusD { .. } => {
            let (big, small) = shape.torus_radii()?;
            let cos_t = (p.x.hypot(p.y) - big) / small;
            Some(cos_t / (small * (big + small * cos_t)))
        }
        _ => None,
    }
}

/// Exact values of a quantity at every point, using the tangent chart.
pub fn exact_values<T>(shape: &ManifoldShape, points: &[Vec3], f: impl Fn(&ExactPoint) -> T + Sync) -> Result<Vec<T>>
where
    T: Send,
{
    use rayon::prelude::*;
    let results: Vec<Result<T>> = points
        .par_iter()
        .map(|p| ExactPoint::new(shape, p, ChartBackend::TangentProjection).map(|e| f(&e)))
        .collect();
    crate::error::collect_points(results)
}

/// Root-mean-square difference `sqrt(mean (a - b)^2)`.
pub fn l2_error(approx: &[f64], exact: &[f64]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", approx.len(), exact.len())));
    }
    if approx.is_empty() {
        return Err(Error::TooFewPoints(0));
    }
    let s: f64 = approx.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((s / approx.len() as f64).sqrt())
}

/// Ambient-componentwise RMS difference of vector fields; relative to the
/// RMS of `exact` when `relative` is set.
pub fn l2_error_vec(approx: &[Vec3], exact: &[Vec3], relative: bool) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} vectors", approx.len(), exact.len())));
    }
    if approx.is_empty() {
        return Err(Error::TooFewPoints(0));
    }
    let n = approx.len() as f64;
    let diff = (approx.iter().zip(exact).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / n).sqrt();
    if !relative {
        return Ok(diff);
    }
    let reference = (exact.iter().map(|v| v.norm_squared()).sum::<f64>() / n).sqrt();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(diff / reference)
}

pub fn remove_mean(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub h: f64,
    pub n: usize,
    pub error: f64,
}

/// Errors per refinement level with pairwise observed rates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub label: String,
    pub levels: Vec<LevelError>,
}

impl ConvergenceRecord {
    pub fn new(label: impl Into<String>) -> ConvergenceRecord {
        ConvergenceRecord {
            label: label.into(),
            levels: Vec::new(),
        }
    }

    pub fn push(&mut self, h: f64, n: usize, error: f64) -> Result<()> {
        if let Some(last) = self.levels.last() {
            if !(h < last.h) {
                return Err(Error::Config(format!("levels must have decreasing h ({} then {h})", last.h)));
            }
        }
        self.levels.push(LevelError { h, n, error });
        Ok(())
    }

    /// `log(e_{k-1}/e_k) / log(h_{k-1}/h_k)` for each level after the first.
    pub fn rates(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.levels.windows(2) {
            let r = (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln();
            out.push(if r.is_finite() { Some(r) } else { None });
        }
        out.truncate(self.levels.len());
        out
    }

    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    /// CSV with columns `h,n,l2_error,rate`; the first rate is empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,n,l2_error,rate\n");
        for (l, r) in self.levels.iter().zip(self.rates()) {
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::output::sci(l.h),
                l.n,
                crate::output::sci(l.error),
                r.map(crate::output::sci).unwrap_or_default()
            ));
        }
        s
    }
}
