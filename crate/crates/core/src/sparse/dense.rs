use crate::error::{Error, Result};

const PANEL: usize = 48;

/// Partial LU of a column-major `f x f` front: the leading `k` columns are
/// factored with row pivoting restricted to the leading `k` rows, and the
/// trailing `(f-k) x (f-k)` block is overwritten by its Schur complement.
/// `piv[j]` is the row swapped with row `j` at step `j`.
pub fn partial_lu(a: &mut [f64], f: usize, k: usize, piv: &mut Vec<usize>, tiny: f64) -> Result<()> {
    assert!(k <= f && a.len() >= f * f);
    piv.clear();
    let mut jb = 0;
    while jb < k {
        let nb = PANEL.min(k - jb);
        for j in jb..jb + nb {
            let mut p = j;
            let mut best = a[j + j * f].abs();
            for i in j + 1..k {
                let v = a[i + j * f].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularSystem { block: j });
            }
            piv.push(p);
            if p != j {
                for c in 0..f {
                    a.swap(j + c * f, p + c * f);
                }
            }
            let inv = 1.0 / a[j + j * f];
            for i in j + 1..f {
                a[i + j * f] *= inv;
            }
            for c in j + 1..jb + nb {
                let ujc = a[j + c * f];
                if ujc != 0.0 {
                    let (lcol, ccol) = split_cols(a, f, j, c);
                    for i in j + 1..f {
                        ccol[i] -= lcol[i] * ujc;
                    }
                }
            }
        }
        let rest = jb + nb;
        if rest < f {
            // U12 = L11^{-1} A12 for the panel rows.
            for c in rest..f {
                for j in jb..rest {
                    let x = a[j + c * f];
                    if x != 0.0 {
                        for i in j + 1..rest {
                            a[i + c * f] -= a[i + j * f] * x;
                        }
                    }
                }
            }
            let m = f - rest;
            unsafe {
                let base = a.as_mut_ptr();
                matrixmultiply::dgemm(
                    m,
                    nb,
                    m,
                    -1.0,
                    base.add(rest + jb * f),
                    1,
                    f as isize,
                    base.add(jb + rest * f),
                    1,
                    f as isize,
                    1.0,
                    base.add(rest + rest * f),
                    1,
                    f as isize,
                );
            }
        }
        jb += nb;
    }
    Ok(())
}

fn split_cols(a: &mut [f64], f: usize, j: usize, c: usize) -> (&[f64], &mut [f64]) {
    debug_assert!(j < c);
    let (lo, hi) = a.split_at_mut(c * f);
    (&lo[j * f..j * f + f], &mut hi[..f])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn full_factorization_reconstructs() {
        let n = 110;
        let m = random(n, 3);
        let mut a: Vec<f64> = m.as_slice().to_vec();
        let mut piv = Vec::new();
        partial_lu(&mut a, n, n, &mut piv, 1e-300).unwrap();
        let f = DMatrix::from_column_slice(n, n, &a);
        let l = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else if i > j { f[(i, j)] } else { 0.0 });
        let u = DMatrix::from_fn(n, n, |i, j| if i <= j { f[(i, j)] } else { 0.0 });
        let mut pm = m.clone();
        for (j, &p) in piv.iter().enumerate() {
            pm.swap_rows(j, p);
        }
        assert!((l * u - pm).abs().max() < 1e-12);
    }

    #[test]
    fn schur_complement_matches_dense() {
        let (n, k) = (130, 70);
        let m = random(n, 5);
        let mut a: Vec<f64> = m.as_slice().to_vec();
        let mut piv = Vec::new();
        partial_lu(&mut a, n, k, &mut piv, 1e-300).unwrap();
        let a11 = m.view((0, 0), (k, k)).into_owned();
        let a12 = m.view((0, k), (k, n - k)).into_owned();
        let a21 = m.view((k, 0), (n - k, k)).into_owned();
        let a22 = m.view((k, k), (n - k, n - k)).into_owned();
        let s = a22 - a21 * a11.lu().solve(&a12).unwrap();
        let f = DMatrix::from_column_slice(n, n, &a);
        let got = f.view((k, k), (n - k, n - k)).into_owned();
        assert!((got - s).abs().max() < 1e-10);
    }

    #[test]
    fn singular_block_is_reported() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut piv = Vec::new();
        assert!(partial_lu(&mut a, 2, 2, &mut piv, 1e-12).is_err());
    }
}
