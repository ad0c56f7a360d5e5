//! Compressed sparse row matrices and sparse linear solvers.

mod dense;
mod gmres;
mod multifrontal;

pub use dense::partial_lu;
pub use gmres::{gmres, GmresOptions, GmresOutcome, Identity, Ilu0, Preconditioner};
pub use multifrontal::{Layout, MultifrontalLu, SolveReport};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> CsrMatrix {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Build from per-row `(columns, values)`; columns need not be sorted and
    /// duplicates are summed.
    pub fn from_rows(ncols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> CsrMatrix {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(|r| r.0.len()).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for (cols, vals) in rows {
            scratch.clear();
            scratch.extend(cols.into_iter().zip(vals));
            scratch.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (c, v) in scratch.drain(..) {
                debug_assert!(c < ncols);
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut rows: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); nrows];
        for &(r, c, v) in triplets {
            rows[r].0.push(c);
            rows[r].1.push(v);
        }
        CsrMatrix::from_rows(ncols, rows)
    }

    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> CsrMatrix {
        let rows = (0..m.nrows())
            .map(|i| {
                let cols: Vec<usize> = (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).collect();
                let vals = cols.iter().map(|&j| m[(i, j)]).collect();
                (cols, vals)
            })
            .collect();
        CsrMatrix::from_rows(m.ncols(), rows)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                m[(i, j)] += x;
            }
        }
        m
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.indptr[i + 1] - self.indptr[i]).max().unwrap_or(0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let p = next[j];
                indices[p] = i;
                values[p] = a;
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `sum_k s_k A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let rows = (0..nrows)
            .map(|i| {
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for (s, m) in terms {
                    assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch");
                    let (c, v) = m.row(i);
                    cols.extend_from_slice(c);
                    vals.extend(v.iter().map(|a| a * s));
                }
                (cols, vals)
            })
            .collect();
        CsrMatrix::from_rows(ncols, rows)
    }

    /// Block matrix from a grid of optional scaled blocks. Every block row
    /// needs at least one block to fix its height (likewise for columns).
    pub fn from_blocks(grid: &[Vec<Option<(f64, &CsrMatrix)>>]) -> CsrMatrix {
        let nbr = grid.len();
        let nbc = grid[0].len();
        let mut heights = vec![0; nbr];
        let mut widths = vec![0; nbc];
        for (bi, row) in grid.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                if let Some((_, m)) = b {
                    heights[bi] = m.nrows;
                    widths[bj] = m.ncols;
                }
            }
        }
        let col_offset: Vec<usize> = widths
            .iter()
            .scan(0, |acc, w| {
                let o = *acc;
                *acc += w;
                Some(o)
            })
            .collect();
        let ncols = widths.iter().sum();
        let mut rows = Vec::new();
        for (bi, row) in grid.iter().enumerate() {
            for i in 0..heights[bi] {
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for (bj, b) in row.iter().enumerate() {
                    if let Some((s, m)) = b {
                        let (c, v) = m.row(i);
                        cols.extend(c.iter().map(|j| j + col_offset[bj]));
                        vals.extend(v.iter().map(|a| a * s));
                    }
                }
                rows.push((cols, vals));
            }
        }
        CsrMatrix::from_rows(ncols, rows)
    }

    /// Product `A B`.
    pub fn matmul(&self, b: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, b.nrows, "matmul dimension mismatch");
        let mut acc = vec![0.0; b.ncols];
        let mut mark = vec![usize::MAX; b.ncols];
        let rows = (0..self.nrows)
            .map(|i| {
                let mut cols = Vec::new();
                let (ca, va) = self.row(i);
                for (&k, &a) in ca.iter().zip(va) {
                    let (cb, vb) = b.row(k);
                    for (&j, &x) in cb.iter().zip(vb) {
                        if mark[j] != i {
                            mark[j] = i;
                            acc[j] = 0.0;
                            cols.push(j);
                        }
                        acc[j] += a * x;
                    }
                }
                let vals = cols.iter().map(|&j| acc[j]).collect();
                (cols, vals)
            })
            .collect();
        CsrMatrix::from_rows(b.ncols, rows)
    }

    /// MatrixMarket coordinate format (general, real).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
        let text = std::fs::read_to_string(path)?;
        let bad = |d: &str| Error::Parse {
            what: path.display().to_string(),
            detail: d.to_string(),
        };
        let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing size line"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("bad size line")))
            .collect::<Result<_>>()?;
        if header.len() != 3 {
            return Err(bad("size line needs rows cols nnz"));
        }
        let mut trips = Vec::with_capacity(header[2]);
        for l in lines {
            let p: Vec<&str> = l.split_whitespace().collect();
            if p.len() != 3 {
                return Err(bad("entry line needs row col value"));
            }
            let i: usize = p[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = p[1].parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = p[2].parse().map_err(|_| bad("bad value"))?;
            trips.push((i - 1, j - 1, v));
        }
        Ok(CsrMatrix::from_triplets(header[0], header[1], &trips))
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||A x - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)]);
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![6.5, -2.0]);
    }

    #[test]
    fn transpose_and_product() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let t = m.transpose();
        assert_eq!(t.to_dense(), m.to_dense().transpose());
        let p = m.matmul(&t);
        assert_eq!(p.to_dense(), m.to_dense() * m.to_dense().transpose());
    }

    #[test]
    fn blocks_layout() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 4.0)]);
        let m = CsrMatrix::from_blocks(&[vec![Some((2.0, &a)), Some((1.0, &b))], vec![None, Some((-1.0, &a))]]);
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 3)], 4.0);
        assert_eq!(d[(3, 3)], -1.0);
        assert_eq!(d[(2, 0)], 0.0);
    }

    #[test]
    fn matrix_market_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 1, 0.1), (2, 0, -7.25)]);
        let p = dir.path().join("m.mtx");
        m.write_matrix_market(&p).unwrap();
        assert_eq!(CsrMatrix::read_matrix_market(&p).unwrap(), m);
    }
}
