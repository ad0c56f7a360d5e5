use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::jet::Real;

pub type Vec3 = Vector3<f64>;

/// Benchmark manifolds with closed-form geometry.
///
/// `EllipsoidA` is `x^2/a^2 + y^2/b^2 + z^2 = s0^2`. The radial shapes are
/// `r = 1 + r0 sin(freq * polar) cos(azimuth)`, which is smooth because
/// `sin(k p) = sin(p) U_{k-1}(cos p)`. `TorusD` is
/// `(s1_sq - sqrt(x^2 + y^2))^2 + z^2 = s2_sq`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldShape {
    EllipsoidA { a: f64, b: f64, s0: f64 },
    RadialB { r0: f64, freq: u32 },
    RadialC { r0: f64, freq: u32 },
    TorusD { s1_sq: f64, s2_sq: f64 },
    UserLevelSet,
}

impl ManifoldShape {
    pub fn ellipsoid_a() -> Self {
        ManifoldShape::EllipsoidA {
            a: 1.2,
            b: 1.2,
            s0: 1.0,
        }
    }

    pub fn radial_b() -> Self {
        ManifoldShape::RadialB { r0: 0.1, freq: 3 }
    }

    pub fn radial_c() -> Self {
        ManifoldShape::RadialC { r0: 0.1, freq: 7 }
    }

    /// Major radius 0.7, tube radius 0.3.
    pub fn torus_d() -> Self {
        Self::torus(0.7, 0.3)
    }

    pub fn torus(major: f64, tube: f64) -> Self {
        ManifoldShape::TorusD {
            s1_sq: major,
            s2_sq: tube * tube,
        }
    }

    pub fn unit_sphere() -> Self {
        ManifoldShape::EllipsoidA {
            a: 1.0,
            b: 1.0,
            s0: 1.0,
        }
    }

    /// Look up a shape with default parameters by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "a" | "ellipsoid" | "ellipsoid_a" => Some(Self::ellipsoid_a()),
            "b" | "radial_b" => Some(Self::radial_b()),
            "c" | "radial_c" => Some(Self::radial_c()),
            "d" | "torus" | "torus_d" => Some(Self::torus_d()),
            "sphere" | "unit_sphere" => Some(Self::unit_sphere()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldShape::EllipsoidA { .. } => "ellipsoid_a",
            ManifoldShape::RadialB { .. } => "radial_b",
            ManifoldShape::RadialC { .. } => "radial_c",
            ManifoldShape::TorusD { .. } => "torus_d",
            ManifoldShape::UserLevelSet => "user_level_set",
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, ManifoldShape::UserLevelSet)
    }

    pub fn is_star_shaped(&self) -> bool {
        matches!(
            self,
            ManifoldShape::EllipsoidA { .. } | ManifoldShape::RadialB { .. } | ManifoldShape::RadialC { .. }
        )
    }

    /// Torus radii `(major, tube)`.
    pub fn torus_radii(&self) -> Option<(f64, f64)> {
        match *self {
            ManifoldShape::TorusD { s1_sq, s2_sq } => Some((s1_sq, s2_sq.sqrt())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            ManifoldShape::EllipsoidA { a, b, s0 } => a > 0.0 && b > 0.0 && s0 > 0.0,
            ManifoldShape::RadialB { r0, freq } | ManifoldShape::RadialC { r0, freq } => {
                (0.0..1.0).contains(&r0.abs()) && freq >= 1
            }
            ManifoldShape::TorusD { s1_sq, s2_sq } => s2_sq > 0.0 && s2_sq.sqrt() < s1_sq,
            ManifoldShape::UserLevelSet => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid parameters for {}: {:?}", self.name(), self))
        }
    }

    /// Radius along the unit direction `d` for star-shaped surfaces.
    pub fn radius<T: Real>(&self, d: [T; 3]) -> T {
        match *self {
            ManifoldShape::EllipsoidA { a, b, s0 } => {
                let q = d[0] * d[0] * (1.0 / (a * a)) + d[1] * d[1] * (1.0 / (b * b)) + d[2] * d[2];
                q.sqrt().recip() * s0
            }
            ManifoldShape::RadialB { r0, freq } | ManifoldShape::RadialC { r0, freq } => {
                d[0] * chebyshev_u(freq as usize - 1, d[2]) * r0 + 1.0
            }
            _ => panic!("radius() requires a star-shaped manifold"),
        }
    }

    /// Level-set residual; zero exactly on the surface.
    pub fn residual(&self, x: &Vec3) -> f64 {
        match *self {
            ManifoldShape::EllipsoidA { a, b, s0 } => {
                x.x * x.x / (a * a) + x.y * x.y / (b * b) + x.z * x.z - s0 * s0
            }
            ManifoldShape::RadialB { .. } | ManifoldShape::RadialC { .. } => {
                let r = x.norm();
                let d = x / r;
                r - self.radius([d.x, d.y, d.z])
            }
            ManifoldShape::TorusD { s1_sq, s2_sq } => {
                let rho = x.x.hypot(x.y);
                (s1_sq - rho).powi(2) + x.z * x.z - s2_sq
            }
            ManifoldShape::UserLevelSet => f64::NAN,
        }
    }

    /// Outward unit normal at a surface point.
    pub fn normal(&self, x: &Vec3) -> Option<Vec3> {
        let g = match *self {
            ManifoldShape::EllipsoidA { a, b, .. } => Vec3::new(x.x / (a * a), x.y / (b * b), x.z),
            ManifoldShape::RadialB { r0, freq } | ManifoldShape::RadialC { r0, freq } => {
                let r = x.norm();
                let d = x / r;
                let k = freq as usize - 1;
                let u = chebyshev_u(k, d.z);
                let du = chebyshev_u_deriv(k, d.z);
                // gradient of r(d) extended off the sphere, then projected
                let grad = Vec3::new(r0 * u, 0.0, r0 * d.x * du);
                let tangential = grad - d * d.dot(&grad);
                d - tangential / r
            }
            ManifoldShape::TorusD { s1_sq, .. } => {
                let rho = x.x.hypot(x.y);
                let c = Vec3::new(x.x / rho * s1_sq, x.y / rho * s1_sq, 0.0);
                x - c
            }
            ManifoldShape::UserLevelSet => return None,
        };
        Some(g.normalize())
    }

    /// Map a point near the surface onto it.
    pub fn project(&self, x: &Vec3) -> Option<Vec3> {
        match *self {
            ManifoldShape::EllipsoidA { a, b, s0 } => {
                let w = Vec3::new(1.0 / (a * a), 1.0 / (b * b), 1.0);
                // closest point x / (1 + t w), Newton on t, then radial cleanup
                let mut t = 0.0;
                for _ in 0..50 {
                    let mut f = -s0 * s0;
                    let mut df = 0.0;
                    for k in 0..3 {
                        let den = 1.0 + t * w[k];
                        f += w[k] * x[k] * x[k] / (den * den);
                        df += -2.0 * w[k] * w[k] * x[k] * x[k] / (den * den * den);
                    }
                    let step = f / df;
                    let mut next = t - step;
                    let tmin = -1.0 / w.max() * (1.0 - 1e-12);
                    if next <= tmin {
                        next = 0.5 * (t + tmin);
                    }
                    t = next;
                    if step.abs() < 1e-15 * (1.0 + t.abs()) {
                        break;
                    }
                }
                let p = Vec3::new(x.x / (1.0 + t * w.x), x.y / (1.0 + t * w.y), x.z / (1.0 + t * w.z));
                let q = (p.x * p.x * w.x + p.y * p.y * w.y + p.z * p.z * w.z).sqrt();
                if !q.is_finite() || q == 0.0 {
                    let n = x.norm();
                    if n == 0.0 {
                        return None;
                    }
                    let d = x / n;
                    return Some(d * self.radius([d.x, d.y, d.z]));
                }
                Some(p * (s0 / q))
            }
            ManifoldShape::RadialB { .. } | ManifoldShape::RadialC { .. } => {
                let n = x.norm();
                if n == 0.0 {
                    return None;
                }
                let d = x / n;
                Some(d * self.radius([d.x, d.y, d.z]))
            }
            ManifoldShape::TorusD { s1_sq, s2_sq } => {
                let rho = x.x.hypot(x.y);
                if rho == 0.0 {
                    return None;
                }
                let c = Vec3::new(x.x / rho * s1_sq, x.y / rho * s1_sq, 0.0);
                let off = x - c;
                let len = off.norm();
                if len == 0.0 {
                    return None;
                }
                Some(c + off * (s2_sq.sqrt() / len))
            }
            ManifoldShape::UserLevelSet => None,
        }
    }

    /// Surface area: exact for the torus, quadrature otherwise.
    pub fn area(&self) -> Option<f64> {
        match *self {
            ManifoldShape::TorusD { .. } => {
                let (big, small) = self.torus_radii()?;
                Some(4.0 * std::f64::consts::PI * std::f64::consts::PI * big * small)
            }
            ManifoldShape::UserLevelSet => None,
            _ => Some(self.star_area(160, 320)),
        }
    }

    fn star_area(&self, n_polar: usize, n_azimuth: usize) -> f64 {
        use crate::jet::Jet;
        let (nodes, weights) = gauss_legendre(n_polar);
        let mut total = 0.0;
        for (&t, &w) in nodes.iter().zip(&weights) {
            // t = cos(polar) in [-1, 1], dA = |X_t x X_az| dt daz
            for k in 0..n_azimuth {
                let az = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_azimuth as f64;
                let tj = Jet::var_u(t, 1);
                let aj = Jet::var_v(az, 1);
                let s = (Jet::constant(1.0, 1) - tj * tj).sqrt();
                let d = [s * aj.cos(), s * aj.sin(), tj];
                let r = self.radius(d);
                let x: Vec<Jet> = d.iter().map(|c| *c * r).collect();
                let xu = Vec3::new(x[0].coeff(1, 0), x[1].coeff(1, 0), x[2].coeff(1, 0));
                let xv = Vec3::new(x[0].coeff(0, 1), x[1].coeff(0, 1), x[2].coeff(0, 1));
                total += w * xu.cross(&xv).norm();
            }
        }
        total * 2.0 * std::f64::consts::PI / n_azimuth as f64
    }

    /// Cheap area-biased random point on the surface from two uniforms.
    pub(crate) fn random_point(&self, u1: f64, u2: f64, u3: f64) -> Option<Vec3> {
        use std::f64::consts::PI;
        match *self {
            ManifoldShape::TorusD { .. } => {
                let (big, small) = self.torus_radii()?;
                let theta = 2.0 * PI * u1;
                let phi = 2.0 * PI * u2;
                // rejection on the area element (R + r cos phi)
                if u3 * (big + small) > big + small * phi.cos() {
                    return None;
                }
                let rr = big + small * phi.cos();
                Some(Vec3::new(rr * theta.cos(), rr * theta.sin(), small * phi.sin()))
            }
            ManifoldShape::UserLevelSet => None,
            _ => {
                let z = 2.0 * u1 - 1.0;
                let s = (1.0 - z * z).max(0.0).sqrt();
                let az = 2.0 * PI * u2;
                let d = Vec3::new(s * az.cos(), s * az.sin(), z);
                Some(d * self.radius([d.x, d.y, d.z]))
            }
        }
    }
}

/// Chebyshev polynomial of the second kind `U_n(t)`.
pub fn chebyshev_u<T: Real>(n: usize, t: T) -> T {
    let mut prev = t.constant_like(1.0);
    if n == 0 {
        return prev;
    }
    let mut cur = t * 2.0;
    for _ in 1..n {
        let next = t * cur * 2.0 - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn chebyshev_u_deriv(n: usize, t: f64) -> f64 {
    use crate::jet::Jet;
    chebyshev_u(n, Jet::var_u(t, 1)).coeff(1, 0)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_area_and_projection() {
        let s = ManifoldShape::unit_sphere();
        let a = s.area().unwrap();
        assert!((a - 4.0 * std::f64::consts::PI).abs() < 1e-8);
        let p = s.project(&Vec3::new(0.3, -2.0, 0.5)).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oblate_spheroid_area() {
        let s = ManifoldShape::ellipsoid_a();
        let (a, c) = (1.2f64, 1.0f64);
        let e = (1.0 - c * c / (a * a)).sqrt();
        let exact = 2.0 * std::f64::consts::PI * a * a * (1.0 + (1.0 - e * e) / e * e.atanh());
        assert!((s.area().unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn ellipsoid_projection_is_closest_point() {
        let s = ManifoldShape::ellipsoid_a();
        let x = Vec3::new(0.9, 0.4, 0.8);
        let p = s.project(&x).unwrap();
        assert!(s.residual(&p).abs() < 1e-14);
        // the offset is parallel to the normal
        let n = s.normal(&p).unwrap();
        let off = x - p;
        assert!(off.cross(&n).norm() < 1e-10 * off.norm().max(1.0));
    }

    #[test]
    fn radial_normal_matches_finite_differences() {
        let s = ManifoldShape::radial_c();
        let d = Vec3::new(0.3, 0.5, -0.7).normalize();
        let p = s.project(&d).unwrap();
        let n = s.normal(&p).unwrap();
        // residual gradient by central differences
        let h = 1e-6;
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            g[k] = (s.residual(&(p + e)) - s.residual(&(p - e))) / (2.0 * h);
        }
        assert!((g.normalize() - n).norm() < 1e-7);
    }

    #[test]
    fn radial_form_matches_angular_definition() {
        let s = ManifoldShape::radial_b();
        let (polar, az) = (1.1f64, 0.7f64);
        let d = [polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()];
        let r = s.radius(d);
        assert!((r - (1.0 + 0.1 * (3.0 * polar).sin() * az.cos())).abs() < 1e-14);
    }

    #[test]
    fn torus_projection_residual() {
        let s = ManifoldShape::torus_d();
        let p = s.project(&Vec3::new(1.0, 0.2, 0.3)).unwrap();
        assert!(s.residual(&p).abs() < 1e-14);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }
}
