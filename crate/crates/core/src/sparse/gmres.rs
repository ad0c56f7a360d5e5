use serde::{Deserialize, Serialize};

use super::{norm2, CsrMatrix};
use crate::error::{Error, Result};

pub trait Preconditioner {
    /// Approximate `A^{-1} r`.
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// Incomplete LU with zero fill on the pattern of `A`.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Ilu0> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            let (c, _) = lu.row(i);
            if let Ok(k) = c.binary_search(&i) {
                diag[i] = lu.indptr[i] + k;
            }
        }
        if let Some(i) = diag.iter().position(|&d| d == usize::MAX) {
            return Err(Error::SingularSystem { block: i });
        }
        let mut at = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.indptr[i], lu.indptr[i + 1]);
            for p in s..e {
                at[lu.indices[p]] = p;
            }
            for p in s..e {
                let k = lu.indices[p];
                if k >= i {
                    break;
                }
                let piv = lu.values[diag[k]];
                if piv == 0.0 {
                    return Err(Error::SingularSystem { block: k });
                }
                let f = lu.values[p] / piv;
                lu.values[p] = f;
                for q in diag[k] + 1..lu.indptr[k + 1] {
                    let j = lu.indices[q];
                    let t = at[j];
                    if t != usize::MAX && t >= s && t < e {
                        lu.values[t] -= f * lu.values[q];
                    }
                }
            }
            for p in s..e {
                at[lu.indices[p]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(Error::SingularSystem { block: i });
            }
        }
        Ok(Ilu0 { lu, diag })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in self.lu.indptr[i]..self.diag[i] {
                s -= self.lu.values[p] * y[self.lu.indices[p]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in self.diag[i] + 1..self.lu.indptr[i + 1] {
                s -= self.lu.values[p] * y[self.lu.indices[p]];
            }
            y[i] = s / self.lu.values[self.diag[i]];
        }
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 80,
            max_iterations: 4000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Restarted GMRES with right preconditioning; the reported residual is the
/// true relative residual of `A x = b`.
pub fn gmres(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, m: &dyn Preconditioner, opts: &GmresOptions) -> Result<GmresOutcome> {
    let n = b.len();
    let nb = norm2(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut history = Vec::new();
    if nb == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_history: vec![0.0],
        });
    }
    let restart = opts.restart.max(1);
    let mut total = 0;
    loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        history.push(beta / nb);
        if beta / nb <= opts.tolerance {
            return Ok(GmresOutcome {
                x,
                iterations: total,
                residual_history: history,
            });
        }
        if total >= opts.max_iterations {
            return Err(Error::SolverDiverged {
                iterations: total,
                residual: beta / nb,
                trace: history,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut steps = 0;
        for j in 0..restart {
            let zj = m.apply(&v[j]);
            let mut w = a.matvec(&zj);
            z.push(zj);
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&v[i]).map(|(p, q)| p * q).sum();
                h[i][j] = hij;
                w.iter_mut().zip(&v[i]).for_each(|(p, q)| *p -= hij * q);
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            cs[j] = if d == 0.0 { 1.0 } else { h[j][j] / d };
            sn[j] = if d == 0.0 { 0.0 } else { h[j + 1][j] / d };
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            steps = j + 1;
            total += 1;
            let est = g[j + 1].abs() / nb;
            if est <= opts.tolerance * 0.5 || hn == 0.0 || total >= opts.max_iterations {
                break;
            }
            v.push(w.iter().map(|t| t / hn).collect());
        }
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let s: f64 = (i + 1..steps).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (zi, yi) in z.iter().zip(&y) {
            x.iter_mut().zip(zi).for_each(|(p, q)| *p += yi * q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion(m: usize) -> CsrMatrix {
        let mut t = Vec::new();
        let id = |i: usize, j: usize| i * m + j;
        for i in 0..m {
            for j in 0..m {
                t.push((id(i, j), id(i, j), 4.2));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.4));
                }
                if i + 1 < m {
                    t.push((id(i, j), id(i + 1, j), -0.6));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t)
    }

    #[test]
    fn ilu_preconditioned_gmres_converges() {
        let a = convection_diffusion(30);
        let x: Vec<f64> = (0..a.nrows).map(|i| (0.1 * i as f64).cos()).collect();
        let b = a.matvec(&x);
        let ilu = Ilu0::new(&a).unwrap();
        let out = gmres(&a, &b, None, &ilu, &GmresOptions::default()).unwrap();
        assert!(*out.residual_history.last().unwrap() <= 1e-10);
        let plain = gmres(&a, &b, None, &Identity, &GmresOptions::default()).unwrap();
        assert!(out.iterations < plain.iterations);
    }

    #[test]
    fn ilu_is_exact_for_triangular() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 3.0), (2, 1, -1.0), (2, 2, 1.0)]);
        let ilu = Ilu0::new(&a).unwrap();
        let b = [2.0, 4.0, 0.0];
        let x = ilu.apply(&b);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15 && (x[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stalls_are_reported_with_history() {
        let a = convection_diffusion(20);
        let b = vec![1.0; a.nrows];
        let opts = GmresOptions {
            restart: 2,
            max_iterations: 4,
            tolerance: 1e-14,
        };
        match gmres(&a, &b, None, &Identity, &opts) {
            Err(Error::SolverDiverged { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.iterations)),
        }
    }
}
