use serde::Serialize;

use super::{dense::partial_lu, norm2, CsrMatrix};
use crate::error::{Error, Result};
use crate::point_cloud::Vec3;

const LEAF_GROUPS: usize = 64;

/// Spatial layout of the unknowns used to build the elimination order.
/// Unknowns in one group share a location and are eliminated together;
/// globals (dense border rows) are eliminated last.
#[derive(Clone, Debug)]
pub struct Layout {
    pub groups: Vec<(Vec3, Vec<usize>)>,
    pub globals: Vec<usize>,
}

impl Layout {
    /// Everything in one dense front.
    pub fn dense(n: usize) -> Layout {
        Layout {
            groups: Vec::new(),
            globals: (0..n).collect(),
        }
    }

    /// `blocks` unknowns per point laid out block-wise (`b * n + i`),
    /// followed by `extra` global unknowns.
    pub fn blocked(points: &[Vec3], blocks: usize, extra: usize) -> Layout {
        let n = points.len();
        Layout {
            groups: points
                .iter()
                .enumerate()
                .map(|(i, p)| (*p, (0..blocks).map(|b| b * n + i).collect()))
                .collect(),
            globals: (blocks * n..blocks * n + extra).collect(),
        }
    }

    fn size(&self) -> usize {
        self.groups.iter().map(|g| g.1.len()).sum::<usize>() + self.globals.len()
    }
}

struct Node {
    own: Vec<usize>,
    update: Vec<usize>,
    children: Vec<usize>,
    first_desc: usize,
}

struct Factor {
    lu: Vec<f64>,
    l21: Vec<f64>,
    u12: Vec<f64>,
    piv: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveReport {
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub largest_front: usize,
    pub factor_entries: usize,
}

/// Sparse LU by the multifrontal method over a geometric nested-dissection
/// ordering, with partial pivoting inside each front's pivot block.
pub struct MultifrontalLu {
    n: usize,
    a: CsrMatrix,
    nodes: Vec<Node>,
    factors: Vec<Factor>,
    largest_front: usize,
}

impl MultifrontalLu {
    pub fn factor(a: &CsrMatrix, layout: &Layout) -> Result<MultifrontalLu> {
        let n = a.nrows;
        if a.ncols != n || layout.size() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix with a layout of {} unknowns",
                a.nrows,
                a.ncols,
                layout.size()
            )));
        }
        let at = a.transpose();
        let mut nodes = dissect(a, &at, layout);
        let node_of = symbolic(a, &at, &mut nodes, n);
        let amax = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = 1e-14 * amax.max(f64::MIN_POSITIVE);

        let mut pos = vec![usize::MAX; n];
        let mut stack: Vec<Vec<f64>> = Vec::new();
        let mut factors = Vec::with_capacity(nodes.len());
        let mut largest = 0;
        for p in 0..nodes.len() {
            let node = &nodes[p];
            let k = node.own.len();
            let u = node.update.len();
            let f = k + u;
            largest = largest.max(f);
            for (l, &v) in node.own.iter().chain(&node.update).enumerate() {
                pos[v] = l;
            }
            let mut front = vec![0.0; f * f];
            let in_front = |c: usize| {
                let q = node_of[c];
                q == p || (q > p && nodes[q].first_desc <= p)
            };
            for (la, &v) in node.own.iter().enumerate() {
                let (cols, vals) = a.row(v);
                for (&c, &x) in cols.iter().zip(vals) {
                    if in_front(c) {
                        front[la + pos[c] * f] += x;
                    }
                }
                let (rows, vals) = at.row(v);
                for (&r, &x) in rows.iter().zip(vals) {
                    if node_of[r] != p && in_front(r) {
                        front[pos[r] + la * f] += x;
                    }
                }
            }
            let first_child = stack.len() - node.children.len();
            for (ci, block) in node.children.iter().zip(stack.drain(first_child..)) {
                let upd = &nodes[*ci].update;
                let uc = upd.len();
                for (j, &cj) in upd.iter().enumerate() {
                    let col = pos[cj] * f;
                    for (i, &ri) in upd.iter().enumerate() {
                        front[pos[ri] + col] += block[i + j * uc];
                    }
                }
            }
            let mut piv = Vec::with_capacity(k);
            partial_lu(&mut front, f, k, &mut piv, tiny).map_err(|_| Error::SingularSystem { block: p })?;
            let mut lu = vec![0.0; k * k];
            let mut l21 = vec![0.0; u * k];
            let mut u12 = vec![0.0; k * u];
            let mut schur = vec![0.0; u * u];
            for j in 0..k {
                lu[j * k..j * k + k].copy_from_slice(&front[j * f..j * f + k]);
                l21[j * u..j * u + u].copy_from_slice(&front[j * f + k..j * f + f]);
            }
            for j in 0..u {
                let c = (k + j) * f;
                u12[j * k..j * k + k].copy_from_slice(&front[c..c + k]);
                schur[j * u..j * u + u].copy_from_slice(&front[c + k..c + f]);
            }
            drop(front);
            stack.push(schur);
            factors.push(Factor { lu, l21, u12, piv });
        }
        Ok(MultifrontalLu {
            n,
            a: a.clone(),
            nodes,
            factors,
            largest_front: largest,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_entries(&self) -> usize {
        self.factors.iter().map(|f| f.lu.len() + f.l21.len() + f.u12.len()).sum()
    }

    /// One forward/backward substitution without refinement.
    pub fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut w = b.to_vec();
        let mut y = Vec::new();
        for (node, fac) in self.nodes.iter().zip(&self.factors) {
            let k = node.own.len();
            let u = node.update.len();
            y.clear();
            y.extend(node.own.iter().map(|&v| w[v]));
            for (j, &p) in fac.piv.iter().enumerate() {
                y.swap(j, p);
            }
            for j in 0..k {
                let yj = y[j];
                if yj != 0.0 {
                    for i in j + 1..k {
                        y[i] -= fac.lu[i + j * k] * yj;
                    }
                    let col = &fac.l21[j * u..j * u + u];
                    for (i, &l) in col.iter().enumerate() {
                        w[node.update[i]] -= l * yj;
                    }
                }
            }
            for (a, &v) in node.own.iter().enumerate() {
                w[v] = y[a];
            }
        }
        let mut z = Vec::new();
        for (node, fac) in self.nodes.iter().zip(&self.factors).rev() {
            let k = node.own.len();
            z.clear();
            z.extend(node.own.iter().map(|&v| w[v]));
            for (i, &ui) in node.update.iter().enumerate() {
                let xi = w[ui];
                if xi != 0.0 {
                    let col = &fac.u12[i * k..i * k + k];
                    for (zj, &c) in z.iter_mut().zip(col) {
                        *zj -= c * xi;
                    }
                }
            }
            for j in (0..k).rev() {
                z[j] /= fac.lu[j + j * k];
                let zj = z[j];
                for i in 0..j {
                    z[i] -= fac.lu[i + j * k] * zj;
                }
            }
            for (a, &v) in node.own.iter().enumerate() {
                w[v] = z[a];
            }
        }
        w
    }

    /// Solve with up to `max_refine` steps of iterative refinement, stopping
    /// once the relative residual is below `tol`.
    pub fn solve_refined(&self, b: &[f64], tol: f64, max_refine: usize) -> (Vec<f64>, SolveReport) {
        let nb = norm2(b).max(f64::MIN_POSITIVE);
        let mut x = self.solve_once(b);
        let mut steps = 0;
        let mut res;
        loop {
            let ax = self.a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            res = norm2(&r) / nb;
            if res <= tol || steps >= max_refine || !res.is_finite() {
                break;
            }
            let dx = self.solve_once(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            steps += 1;
        }
        (
            x,
            SolveReport {
                relative_residual: res,
                refinement_steps: steps,
                largest_front: self.largest_front,
                factor_entries: self.factor_entries(),
            },
        )
    }
}

/// Nested dissection over groups; returns nodes in postorder with `own`
/// and `children` filled.
fn dissect(a: &CsrMatrix, at: &CsrMatrix, layout: &Layout) -> Vec<Node> {
    let n = a.nrows;
    let ng = layout.groups.len();
    let mut gid = vec![usize::MAX; n];
    for (g, (_, vars)) in layout.groups.iter().enumerate() {
        for &v in vars {
            gid[v] = g;
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ng];
    for (g, (_, vars)) in layout.groups.iter().enumerate() {
        let list = &mut adj[g];
        for &v in vars {
            for m in [a, at] {
                for &c in m.row(v).0 {
                    let h = gid[c];
                    if h != usize::MAX && h != g {
                        list.push(h);
                    }
                }
            }
        }
        list.sort_unstable();
        list.dedup();
    }

    let mut ctx = Dissector {
        layout,
        adj,
        side: vec![u8::MAX; ng],
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..ng).collect();
    if ng > 0 {
        ctx.recurse(all);
    }
    let mut nodes = ctx.nodes;
    // Border unknowns join the last front so pivoting can use their rows
    // when the unbordered operator is singular.
    match nodes.last_mut() {
        Some(top) => top.own.extend_from_slice(&layout.globals),
        None => nodes.push(Node {
            own: layout.globals.clone(),
            update: Vec::new(),
            children: Vec::new(),
            first_desc: 0,
        }),
    }
    nodes
}

struct Dissector<'a> {
    layout: &'a Layout,
    adj: Vec<Vec<usize>>,
    side: Vec<u8>,
    nodes: Vec<Node>,
}

impl Dissector<'_> {
    fn vars(&self, groups: &[usize]) -> Vec<usize> {
        groups.iter().flat_map(|&g| self.layout.groups[g].1.iter().copied()).collect()
    }

    fn leaf(&mut self, groups: Vec<usize>) -> usize {
        let own = self.vars(&groups);
        self.push(own, Vec::new())
    }

    fn push(&mut self, own: Vec<usize>, children: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let first_desc = children.iter().map(|&c| self.nodes[c].first_desc).min().unwrap_or(id);
        self.nodes.push(Node {
            own,
            update: Vec::new(),
            children,
            first_desc,
        });
        id
    }

    fn recurse(&mut self, groups: Vec<usize>) -> usize {
        if groups.len() <= LEAF_GROUPS {
            return self.leaf(groups);
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &g in &groups {
            let p = &self.layout.groups[g].0;
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let axis = (hi - lo).imax();
        let mut sorted = groups;
        sorted.sort_by(|&x, &y| {
            let (px, py) = (self.layout.groups[x].0[axis], self.layout.groups[y].0[axis]);
            px.total_cmp(&py).then(x.cmp(&y))
        });
        let half = sorted.len() / 2;
        for (r, &g) in sorted.iter().enumerate() {
            self.side[g] = u8::from(r >= half);
        }
        let boundary = |s: u8, this: &Self| -> Vec<usize> {
            sorted
                .iter()
                .copied()
                .filter(|&g| this.side[g] == s && this.adj[g].iter().any(|&h| this.side[h] == 1 - s))
                .collect()
        };
        let b0 = boundary(0, self);
        let b1 = boundary(1, self);
        let sep = if b0.len() <= b1.len() { b0 } else { b1 };
        for &g in &sep {
            self.side[g] = 2;
        }
        let left: Vec<usize> = sorted.iter().copied().filter(|&g| self.side[g] == 0).collect();
        let right: Vec<usize> = sorted.iter().copied().filter(|&g| self.side[g] == 1).collect();
        for &g in &sorted {
            self.side[g] = u8::MAX;
        }
        if left.is_empty() || right.is_empty() {
            // No useful split (a clique-like patch); keep it whole.
            return self.leaf(sorted);
        }
        let c0 = self.recurse(left);
        let c1 = self.recurse(right);
        let own = self.vars(&sep);
        self.push(own, vec![c0, c1])
    }
}

/// Fill the update index lists; returns the node of each unknown.
fn symbolic(a: &CsrMatrix, at: &CsrMatrix, nodes: &mut [Node], n: usize) -> Vec<usize> {
    let mut node_of = vec![usize::MAX; n];
    for (p, node) in nodes.iter().enumerate() {
        for &v in &node.own {
            node_of[v] = p;
        }
    }
    let mut mark = vec![usize::MAX; n];
    for p in 0..nodes.len() {
        let mut upd = Vec::new();
        let proper_ancestor = |q: usize, nodes: &[Node]| q > p && q != usize::MAX && nodes[q].first_desc <= p;
        for &v in &nodes[p].own {
            for m in [a, at] {
                for &c in m.row(v).0 {
                    if mark[c] != p && proper_ancestor(node_of[c], nodes) {
                        mark[c] = p;
                        upd.push(c);
                    }
                }
            }
        }
        for ci in nodes[p].children.clone() {
            for &w in &nodes[ci].update {
                if node_of[w] != p && mark[w] != p {
                    mark[w] = p;
                    upd.push(w);
                }
            }
        }
        upd.sort_by_key(|&v| (node_of[v], v));
        nodes[p].update = upd;
    }
    node_of
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn grid_laplacian(m: usize, shift: f64) -> (CsrMatrix, Vec<Vec3>) {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        let mut pts = Vec::new();
        for i in 0..m {
            for j in 0..m {
                pts.push(Vec3::new(i as f64, j as f64, 0.0));
                t.push((idx(i, j), idx(i, j), 4.0 + shift));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.3));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -0.7));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        (CsrMatrix::from_triplets(m * m, m * m, &t), pts)
    }

    #[test]
    fn solves_nonsymmetric_grid_system() {
        let (a, pts) = grid_laplacian(40, 0.1);
        let lu = MultifrontalLu::factor(&a, &Layout::blocked(&pts, 1, 0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..a.nrows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let (y, rep) = lu.solve_refined(&b, 1e-13, 2);
        assert!(rep.relative_residual < 1e-12);
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(rep.largest_front < a.nrows);
    }

    #[test]
    fn bordered_system_with_zero_diagonal_blocks() {
        // [L 1; 1^T 0] where L has constants in its null space: needs
        // pivoting across the border.
        let (l, pts) = grid_laplacian(12, 0.0);
        let n = l.nrows;
        let rowsum: Vec<f64> = l.matvec(&vec![1.0; n]);
        let mut t = Vec::new();
        for i in 0..n {
            let (c, v) = l.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push((i, j, x));
            }
            t.push((i, i, -rowsum[i]));
            t.push((i, n, 1.0));
            t.push((n, i, 1.0));
        }
        let a = CsrMatrix::from_triplets(n + 1, n + 1, &t);
        let mut x: Vec<f64> = (0..n).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        x.push(0.0);
        let b = a.matvec(&x);
        let lu = MultifrontalLu::factor(&a, &Layout::blocked(&pts, 1, 1)).unwrap();
        let (y, rep) = lu.solve_refined(&b, 1e-13, 3);
        assert!(rep.relative_residual < 1e-12);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn dense_layout_matches_blocked() {
        let (a, pts) = grid_laplacian(9, 0.5);
        let b: Vec<f64> = (0..a.nrows).map(|i| (i as f64).sin()).collect();
        let x1 = MultifrontalLu::factor(&a, &Layout::dense(a.nrows)).unwrap().solve_once(&b);
        let x2 = MultifrontalLu::factor(&a, &Layout::blocked(&pts, 1, 0)).unwrap().solve_once(&b);
        assert!(x1.iter().zip(&x2).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn exactly_singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            MultifrontalLu::factor(&a, &Layout::dense(2)),
            Err(Error::SingularSystem { .. })
        ));
    }
}
