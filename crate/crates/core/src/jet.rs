//! Truncated bivariate Taylor series.
//!
//! A [`Jet`] of degree `d` stores the Taylor coefficients `c[i,j]` of a smooth
//! function `f(u, v) = sum c[i,j] u^i v^j` about the origin for `i + j <= d`.
//! Arithmetic on jets is exact up to the truncation degree, so a partial
//! derivative at the origin is recovered as `i! j! c[i,j]`. Differentiating a
//! jet lowers its degree by one.
//!
//! Both the Monge-gauge operator rows and the exact operator oracle are built
//! on top of this type: metric terms, curvature and their derivatives follow
//! from plain products, quotients and square roots of jets.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub const MAX_DEGREE: usize = 8;
pub const MAX_TERMS: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 2) / 2;

/// Number of monomials of total degree at most `deg` in two variables.
#[inline]
pub const fn n_terms(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Position of `u^i v^j`: graded by total degree, then by the power of `v`.
#[inline]
pub const fn term_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Inverse of [`term_index`].
#[inline]
pub fn term_exponents(k: usize) -> (usize, usize) {
    let mut d = 0;
    while n_terms(d) <= k {
        d += 1;
    }
    let j = k - d * (d + 1) / 2;
    (d - j, j)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    deg: usize,
    c: [f64; MAX_TERMS],
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.deg == other.deg && self.coeffs() == other.coeffs()
    }
}

impl Jet {
    pub fn zero(deg: usize) -> Jet {
        assert!(deg <= MAX_DEGREE, "jet degree {deg} exceeds {MAX_DEGREE}");
        Jet {
            deg,
            c: [0.0; MAX_TERMS],
        }
    }

    pub fn constant(value: f64, deg: usize) -> Jet {
        let mut j = Jet::zero(deg);
        j.c[0] = value;
        j
    }

    /// The jet of `value + u`.
    pub fn var_u(value: f64, deg: usize) -> Jet {
        let mut j = Jet::constant(value, deg);
        if deg >= 1 {
            j.c[term_index(1, 0)] = 1.0;
        }
        j
    }

    /// The jet of `value + v`.
    pub fn var_v(value: f64, deg: usize) -> Jet {
        let mut j = Jet::constant(value, deg);
        if deg >= 1 {
            j.c[term_index(0, 1)] = 1.0;
        }
        j
    }

    /// `coef * u^i * v^j`, zero when `i + j > deg`.
    pub fn monomial(i: usize, j: usize, coef: f64, deg: usize) -> Jet {
        let mut out = Jet::zero(deg);
        if i + j <= deg {
            out.c[term_index(i, j)] = coef;
        }
        out
    }

    pub fn from_coeffs(coeffs: &[f64], deg: usize) -> Jet {
        let mut out = Jet::zero(deg);
        let n = coeffs.len().min(n_terms(deg));
        out.c[..n].copy_from_slice(&coeffs[..n]);
        out
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.deg
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.c[..n_terms(self.deg)]
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.deg {
            0.0
        } else {
            self.c[term_index(i, j)]
        }
    }

    /// `d^{i+j} f / du^i dv^j` at the origin.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn truncate(&self, deg: usize) -> Jet {
        let deg = deg.min(self.deg);
        let mut out = Jet::zero(deg);
        let n = n_terms(deg);
        out.c[..n].copy_from_slice(&self.c[..n]);
        out
    }

    /// Partial derivative in `u`; the result has degree `deg - 1`.
    pub fn du(&self) -> Jet {
        let deg = self.deg.saturating_sub(1);
        let mut out = Jet::zero(deg);
        if self.deg == 0 {
            return out;
        }
        for d in 0..=deg {
            for j in 0..=d {
                let i = d - j;
                out.c[term_index(i, j)] = (i + 1) as f64 * self.c[term_index(i + 1, j)];
            }
        }
        out
    }

    /// Partial derivative in `v`; the result has degree `deg - 1`.
    pub fn dv(&self) -> Jet {
        let deg = self.deg.saturating_sub(1);
        let mut out = Jet::zero(deg);
        if self.deg == 0 {
            return out;
        }
        for d in 0..=deg {
            for j in 0..=d {
                let i = d - j;
                out.c[term_index(i, j)] = (j + 1) as f64 * self.c[term_index(i, j + 1)];
            }
        }
        out
    }

    /// Evaluate the truncated polynomial at `(u, v)`.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let mut acc = 0.0;
        for d in 0..=self.deg {
            for j in 0..=d {
                let i = d - j;
                let c = self.c[term_index(i, j)];
                if c != 0.0 {
                    acc += c * u.powi(i as i32) * v.powi(j as i32);
                }
            }
        }
        acc
    }

    /// Re-expand the truncated polynomial about `(u0, v0)`.
    pub fn shifted(&self, u0: f64, v0: f64) -> Jet {
        let deg = self.deg;
        let mut upow = vec![Jet::constant(1.0, deg)];
        let mut vpow = vec![Jet::constant(1.0, deg)];
        for k in 1..=deg {
            upow.push(upow[k - 1] * Jet::var_u(u0, deg));
            vpow.push(vpow[k - 1] * Jet::var_v(v0, deg));
        }
        let mut out = Jet::zero(deg);
        for d in 0..=deg {
            for j in 0..=d {
                let c = self.c[term_index(d - j, j)];
                if c != 0.0 {
                    out += upow[d - j] * vpow[j] * c;
                }
            }
        }
        out
    }

    /// `g(self)` given the Taylor coefficients `g^{(k)}(a) / k!` of `g` about
    /// `a = self.value()`, for `k = 0..=deg`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let deg = self.deg;
        debug_assert!(taylor.len() > deg);
        let mut x = *self;
        x.c[0] = 0.0;
        let mut acc = Jet::constant(taylor[deg], deg);
        for k in (0..deg).rev() {
            acc = acc * x;
            acc.c[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let mut t = [0.0; MAX_DEGREE + 1];
        let inv = 1.0 / a;
        let mut p = inv;
        for (k, tk) in t.iter_mut().enumerate().take(self.deg + 1) {
            *tk = if k % 2 == 0 { p } else { -p };
            p *= inv;
        }
        self.compose(&t)
    }

    /// Real power `self^e` about a positive constant term.
    pub fn powf(&self, e: f64) -> Jet {
        let a = self.value();
        let mut t = [0.0; MAX_DEGREE + 1];
        // binomial series: a^e * C(e, k) / a^k
        let mut binom = 1.0;
        let base = a.powf(e);
        let mut ak = 1.0;
        for (k, tk) in t.iter_mut().enumerate().take(self.deg + 1) {
            if k > 0 {
                binom *= (e - (k as f64 - 1.0)) / k as f64;
                ak *= a;
            }
            *tk = base * binom / ak;
        }
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(1.0, self.deg);
        for _ in 0..n {
            acc = acc * *self;
        }
        acc
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut t = [0.0; MAX_DEGREE + 1];
        for (k, tk) in t.iter_mut().enumerate().take(self.deg + 1) {
            *tk = cycle[k % 4] / factorial(k);
        }
        self.compose(&t)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut t = [0.0; MAX_DEGREE + 1];
        for (k, tk) in t.iter_mut().enumerate().take(self.deg + 1) {
            *tk = cycle[k % 4] / factorial(k);
        }
        self.compose(&t)
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        let deg = self.deg.min(other.deg);
        (0..n_terms(deg))
            .map(|k| (self.c[k] - other.c[k]).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        let deg = self.deg.min(rhs.deg);
        self.deg = deg;
        for k in 0..n_terms(deg) {
            self.c[k] += rhs.c[k];
        }
        for k in n_terms(deg)..MAX_TERMS {
            self.c[k] = 0.0;
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        let deg = self.deg.min(rhs.deg);
        self.deg = deg;
        for k in 0..n_terms(deg) {
            self.c[k] -= rhs.c[k];
        }
        for k in n_terms(deg)..MAX_TERMS {
            self.c[k] = 0.0;
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for k in 0..n_terms(self.deg) {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let deg = self.deg.min(rhs.deg);
        let mut out = Jet::zero(deg);
        for da in 0..=deg {
            let base_a = da * (da + 1) / 2;
            for ja in 0..=da {
                let a = self.c[base_a + ja];
                if a == 0.0 {
                    continue;
                }
                for db in 0..=(deg - da) {
                    let base_b = db * (db + 1) / 2;
                    let dout = da + db;
                    let base_out = dout * (dout + 1) / 2 + ja;
                    for jb in 0..=db {
                        out.c[base_out + jb] += a * rhs.c[base_b + jb];
                    }
                }
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for k in 0..n_terms(self.deg) {
            self.c[k] *= rhs;
        }
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

/// Arithmetic shared by `f64` and [`Jet`], so closed-form fields and shape
/// functions can be written once and evaluated either pointwise or as jets.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
{
    fn constant_like(&self, value: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
}

impl Real for f64 {
    fn constant_like(&self, value: f64) -> f64 {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn recip(&self) -> f64 {
        1.0 / *self
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
}

impl Real for Jet {
    fn constant_like(&self, value: f64) -> Jet {
        Jet::constant(value, self.deg)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sqrt(&self) -> Jet {
        Jet::sqrt(self)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
}
