//! Local weighted least-squares reconstruction (GMLS).
//!
//! Each target point owns a [`GmlsProblem`]: the weighted design matrix of a
//! bivariate polynomial basis over the neighbor coordinates. Fitting gives the
//! coefficients of the optimal polynomial; applying a linear target functional
//! to the basis gives a row of sample weights usable for sparse assembly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{n_terms, term_exponents, Jet, MAX_DEGREE};
use crate::point_cloud::PointCloud;

/// Conditioning limit for the normal equations.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightKernel {
    pub eps: f64,
    pub pbar: f64,
}

impl WeightKernel {
    pub fn new(eps: f64, pbar: f64) -> WeightKernel {
        WeightKernel { eps, pbar }
    }

    /// `(1 - r/eps)_+^pbar`
    #[inline]
    pub fn weight(&self, r: f64) -> f64 {
        weight(r, self.eps, self.pbar)
    }
}

#[inline]
pub fn weight(r: f64, eps: f64, pbar: f64) -> f64 {
    let z = 1.0 - r / eps;
    if z <= 0.0 {
        0.0
    } else {
        z.powf(pbar)
    }
}

/// Monomials `(u/scale)^i (v/scale)^j` with `i + j <= order`, graded by total
/// degree and then by the power of `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyBasis2D {
    pub order: usize,
    pub scale: f64,
}

impl PolyBasis2D {
    pub fn new(order: usize, scale: f64) -> PolyBasis2D {
        assert!(order <= MAX_DEGREE, "polynomial order {order} exceeds {MAX_DEGREE}");
        PolyBasis2D { order, scale }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        n_terms(self.order)
    }

    pub fn eval_into(&self, u: f64, v: f64, out: &mut [f64]) {
        let (su, sv) = (u / self.scale, v / self.scale);
        let mut k = 0;
        let mut upow = [1.0; MAX_DEGREE + 1];
        let mut vpow = [1.0; MAX_DEGREE + 1];
        for d in 1..=self.order {
            upow[d] = upow[d - 1] * su;
            vpow[d] = vpow[d - 1] * sv;
        }
        for d in 0..=self.order {
            for j in 0..=d {
                out[k] = upow[d - j] * vpow[j];
                k += 1;
            }
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(u, v, &mut out);
        out
    }

    /// Target row for a functional given as `sum_a c[a] D^a f(0)`, with `c`
    /// indexed like jet coefficients (`term_index`).
    pub fn target_from_derivatives(&self, c: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                if k >= c.len() || c[k] == 0.0 {
                    return 0.0;
                }
                let (i, j) = term_exponents(k);
                c[k] * factorial(i) * factorial(j) / self.scale.powi((i + j) as i32)
            })
            .collect()
    }

    /// Target row for the point derivative `d^{i+j} / du^i dv^j` at the origin.
    pub fn derivative_target(&self, i: usize, j: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        if i + j <= self.order {
            c[crate::jet::term_index(i, j)] = 1.0;
        }
        self.target_from_derivatives(&c)
    }

    /// Taylor jet about the origin of the polynomial with these coefficients.
    pub fn to_jet(&self, coeffs: &[f64], deg: usize) -> Jet {
        let deg = deg.min(MAX_DEGREE);
        let mut c = vec![0.0; n_terms(deg)];
        for (k, &a) in coeffs.iter().enumerate().take(self.dim()) {
            let (i, j) = term_exponents(k);
            if i + j <= deg {
                c[k] = a / self.scale.powi((i + j) as i32);
            }
        }
        Jet::from_coeffs(&c, deg)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmlsConfig {
    /// Order of the geometry (height function) reconstruction.
    pub m1: usize,
    /// Order of the field reconstruction.
    pub m2: usize,
    pub alpha_star: f64,
    pub beta_star: f64,
    /// Initial radius guess; `3 h` when absent.
    pub eps0: Option<f64>,
    pub pbar: f64,
    /// Fixed radii overriding the search.
    pub eps_geom: Option<f64>,
    pub eps_field: Option<f64>,
}

impl Default for GmlsConfig {
    fn default() -> Self {
        GmlsConfig {
            m1: 6,
            m2: 6,
            alpha_star: 2.8,
            beta_star: 2.0,
            eps0: None,
            pbar: 2.0,
            eps_geom: None,
            eps_field: None,
        }
    }
}

impl GmlsConfig {
    pub fn with_orders(m1: usize, m2: usize) -> GmlsConfig {
        GmlsConfig {
            m1,
            m2,
            ..GmlsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 > MAX_DEGREE || self.m2 > MAX_DEGREE {
            return Err(Error::Config(format!("polynomial orders must be at most {MAX_DEGREE}")));
        }
        if !(self.alpha_star >= 1.0) {
            return Err(Error::Config("alpha_star must be at least 1".into()));
        }
        if !(self.beta_star > 1.0) {
            return Err(Error::Config("beta_star must exceed 1".into()));
        }
        if !(self.pbar > 0.0) {
            return Err(Error::Config("pbar must be positive".into()));
        }
        for e in [self.eps0, self.eps_geom, self.eps_field].into_iter().flatten() {
            if !(e > 0.0) {
                return Err(Error::Config("radii must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `ceil(alpha * n_p)` for basis order `m`.
pub fn required_neighbors(m: usize, alpha_star: f64) -> usize {
    (alpha_star * n_terms(m) as f64 - 1e-9).ceil() as usize
}

/// Smallest `eps = beta^k eps0` for which every neighborhood holds at least
/// `ceil(alpha * n_p)` points.
pub fn select_epsilon(cloud: &PointCloud, m: usize, config: &GmlsConfig) -> Result<f64> {
    use rayon::prelude::*;
    let required = required_neighbors(m, config.alpha_star);
    let diameter = cloud.diameter_bound();
    if cloud.len() < required {
        return Err(Error::NoFeasibleRadius { required });
    }
    let eps0 = match config.eps0 {
        Some(e) => e,
        None if cloud.target_h > 0.0 => 3.0 * cloud.target_h,
        None => {
            let nn = cloud.nearest_distances();
            3.0 * nn.iter().sum::<f64>() / nn.len() as f64
        }
    };
    let feasible = |eps: f64| {
        (0..cloud.len())
            .into_par_iter()
            .all(|i| cloud.stencil(i, eps).len() >= required)
    };
    let beta = config.beta_star;
    let mut eps = eps0;
    if feasible(eps) {
        loop {
            let smaller = eps / beta;
            if feasible(smaller) {
                eps = smaller;
            } else {
                return Ok(eps);
            }
        }
    }
    loop {
        if eps > diameter {
            return Err(Error::NoFeasibleRadius { required });
        }
        eps *= beta;
        if feasible(eps) {
            return Ok(eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmlsCoefficients {
    pub a: Vec<f64>,
}

/// Weighted least-squares problem at one target point, factorized as
/// `sqrt(W) Lambda = Q R`.
#[derive(Clone, Debug)]
pub struct GmlsProblem {
    pub index: usize,
    pub basis: PolyBasis2D,
    sqrt_w: Vec<f64>,
    design: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    condition: f64,
}

impl GmlsProblem {
    /// Weights from the in-plane distance of each local coordinate pair.
    pub fn build(index: usize, coords: &[[f64; 2]], kernel: &WeightKernel, basis: PolyBasis2D) -> Result<GmlsProblem> {
        let w: Vec<f64> = coords.iter().map(|c| kernel.weight(c[0].hypot(c[1]))).collect();
        GmlsProblem::build_weighted(index, coords, &w, basis)
    }

    pub fn build_weighted(index: usize, coords: &[[f64; 2]], weights: &[f64], basis: PolyBasis2D) -> Result<GmlsProblem> {
        let n = coords.len();
        let np = basis.dim();
        if weights.len() != n {
            return Err(Error::DimensionMismatch(format!("{} coordinates but {} weights", n, weights.len())));
        }
        let active = weights.iter().filter(|&&w| w > 0.0).count();
        if active < np {
            return Err(Error::degenerate(
                index,
                format!("{active} weighted samples for {np} basis functions"),
            ));
        }
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut design = DMatrix::zeros(n, np);
        let mut row = vec![0.0; np];
        for (r, c) in coords.iter().enumerate() {
            basis.eval_into(c[0], c[1], &mut row);
            for k in 0..np {
                design[(r, k)] = row[k];
            }
        }
        let mut weighted = design.clone();
        for r in 0..n {
            for k in 0..np {
                weighted[(r, k)] *= sqrt_w[r];
            }
        }
        let qr = weighted.qr();
        let q = qr.q();
        let r = qr.r();
        let sv = r.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::degenerate(
                index,
                format!("normal equations condition {condition:.3e} (unisolvency fails)"),
            ));
        }
        Ok(GmlsProblem {
            index,
            basis,
            sqrt_w,
            design,
            q,
            r,
            condition,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sqrt_w.len()
    }

    /// Condition number estimate of the normal equations.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sqrt_w.iter().map(|s| s * s).collect()
    }

    /// `Lambda^T W Lambda`, formed from the factorization.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        self.r.transpose() * &self.r
    }

    pub fn fit(&self, samples: &[f64]) -> Result<GmlsCoefficients> {
        if samples.len() != self.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a problem with {} neighbors",
                samples.len(),
                self.n_samples()
            )));
        }
        let y = DVector::from_iterator(samples.len(), samples.iter().zip(&self.sqrt_w).map(|(s, w)| s * w));
        let qty = self.q.tr_mul(&y);
        let a = self
            .r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::degenerate(self.index, "singular triangular factor"))?;
        Ok(GmlsCoefficients { a: a.iter().copied().collect() })
    }

    /// Sample weights `w` with `w . samples = target . fit(samples).a`.
    pub fn row_weights(&self, target: &[f64]) -> Vec<f64> {
        self.row_weights_many(&[target]).pop().unwrap()
    }

    pub fn row_weights_many(&self, targets: &[&[f64]]) -> Vec<Vec<f64>> {
        let np = self.basis.dim();
        let mut t = DMatrix::zeros(np, targets.len());
        for (c, tau) in targets.iter().enumerate() {
            for k in 0..np.min(tau.len()) {
                t[(k, c)] = tau[k];
            }
        }
        // R^T z = tau
        let z = self
            .r
            .tr_solve_upper_triangular(&t)
            .expect("factor checked nonsingular at construction");
        let qz = &self.q * z;
        (0..targets.len())
            .map(|c| (0..self.n_samples()).map(|r| qz[(r, c)] * self.sqrt_w[r]).collect())
            .collect()
    }
}

pub fn apply_target(target: &[f64], coeffs: &GmlsCoefficients) -> f64 {
    target.iter().zip(&coeffs.a).map(|(t, a)| t * a).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::term_index;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_samples(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![[0.0, 0.0]];
        while out.len() < n {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if p[0] * p[0] + p[1] * p[1] < 1.0 {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn kernel_values() {
        let k = WeightKernel::new(2.0, 2.0);
        assert_eq!(k.weight(2.0), 0.0);
        assert_eq!(k.weight(0.0), 1.0);
        assert_eq!(k.weight(1.0), 0.25);
        assert_eq!(k.weight(3.0), 0.0);
    }

    #[test]
    fn basis_at_origin() {
        let b = PolyBasis2D::new(3, 0.5);
        let e = b.eval(0.0, 0.0);
        assert_eq!(e[0], 1.0);
        assert!(e[1..].iter().all(|&x| x == 0.0));
        assert_eq!(b.dim(), 10);
    }

    #[test]
    fn required_count_for_quadratics() {
        assert_eq!(required_neighbors(2, 2.8), 17);
    }

    #[test]
    fn collinear_is_degenerate() {
        let coords: Vec<[f64; 2]> = (0..6).map(|k| [0.1 * k as f64, 0.0]).collect();
        let r = GmlsProblem::build(0, &coords, &WeightKernel::new(2.0, 2.0), PolyBasis2D::new(2, 1.0));
        assert!(matches!(r, Err(Error::DegenerateNeighborhood { .. })));
    }

    #[test]
    fn normal_matrix_matches_triple_product() {
        let coords = disk_samples(40, 5);
        let kernel = WeightKernel::new(1.2, 2.0);
        let basis = PolyBasis2D::new(4, 1.2);
        let p = GmlsProblem::build(0, &coords, &kernel, basis).unwrap();
        let w: Vec<f64> = coords.iter().map(|c| kernel.weight(c[0].hypot(c[1]))).collect();
        let lam = p.design().clone();
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
        let brute = lam.transpose() * wm * &lam;
        let diff = (&brute - p.normal_matrix()).abs().max();
        assert!(diff <= 1e-12 * brute.abs().max(), "{diff}");
    }

    #[test]
    fn basis_member_is_recovered() {
        let coords = disk_samples(30, 2);
        let basis = PolyBasis2D::new(3, 1.1);
        let p = GmlsProblem::build(0, &coords, &WeightKernel::new(1.1, 2.0), basis).unwrap();
        for k in 0..basis.dim() {
            let samples: Vec<f64> = coords.iter().map(|c| basis.eval(c[0], c[1])[k]).collect();
            let a = p.fit(&samples).unwrap().a;
            for (l, &al) in a.iter().enumerate() {
                let want = if l == k { 1.0 } else { 0.0 };
                assert!((al - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_derivative_of_sextic() {
        let coords = disk_samples(90, 11);
        let basis = PolyBasis2D::new(6, 1.05);
        let p = GmlsProblem::build(0, &coords, &WeightKernel::new(1.05, 2.0), basis).unwrap();
        // q = 3 u v + u^4 v^2 - 2 v^6 + u^3 v, d_uv q(0) = 3
        let q = |u: f64, v: f64| 3.0 * u * v + u.powi(4) * v * v - 2.0 * v.powi(6) + u.powi(3) * v;
        let samples: Vec<f64> = coords.iter().map(|c| q(c[0], c[1])).collect();
        let coeffs = p.fit(&samples).unwrap();
        let tau = basis.derivative_target(1, 1);
        assert!((apply_target(&tau, &coeffs) - 3.0).abs() < 1e-9);
        let w = p.row_weights(&tau);
        let via_row: f64 = w.iter().zip(&samples).map(|(a, b)| a * b).sum();
        assert!((via_row - apply_target(&tau, &coeffs)).abs() < 1e-13 * 3.0);
    }

    #[test]
    fn basis_scale_is_internal() {
        let coords = disk_samples(40, 8);
        let f = |u: f64, v: f64| (1.3 * u - 0.4 * v).sin() + u * v * v;
        let samples: Vec<f64> = coords.iter().map(|c| f(c[0], c[1])).collect();
        let mut vals = Vec::new();
        for scale in [1.0, 0.37, 4.0] {
            let basis = PolyBasis2D::new(4, scale);
            let p = GmlsProblem::build(0, &coords, &WeightKernel::new(1.0, 2.0), basis).unwrap();
            let c = p.fit(&samples).unwrap();
            vals.push(apply_target(&basis.derivative_target(2, 0), &c));
        }
        assert!((vals[0] - vals[1]).abs() < 1e-12 * (1.0 + vals[0].abs()));
        assert!((vals[0] - vals[2]).abs() < 1e-12 * (1.0 + vals[0].abs()));
    }

    #[test]
    fn jet_matches_coefficients() {
        let basis = PolyBasis2D::new(2, 0.5);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let j = basis.to_jet(&a, 2);
        assert_eq!(j.coeff(1, 0), 4.0);
        assert_eq!(j.coeff(0, 2), 24.0);
        assert_eq!(j.coeffs()[term_index(1, 1)], 20.0);
    }

    #[test]
    fn samples_outside_support_have_no_influence() {
        let mut coords = disk_samples(30, 4);
        let kernel = WeightKernel::new(1.0, 2.0);
        let basis = PolyBasis2D::new(2, 1.0);
        coords.push([1.5, 0.2]);
        let p = GmlsProblem::build(0, &coords, &kernel, basis).unwrap();
        let w = p.row_weights(&basis.derivative_target(0, 0));
        assert_eq!(*w.last().unwrap(), 0.0);
    }
}
