//! Static 3-d tree over a fixed point set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::shape::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> KdTree {
        let mut tree = KdTree {
            points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for d in 0..3 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        let dim = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][dim].total_cmp(&pts[b][dim]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Indices `j` with `|x_j - q| < radius`, sorted ascending.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let q = [q.x, q.y, q.z];
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if dist2(&self.points[i], &q) < r2 {
                            out.push(i);
                        }
                    }
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let delta = q[dim] - value;
                    if delta < radius {
                        stack.push(left);
                    }
                    if delta > -radius {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest points to `q` as `(distance, index)`, closest first.
    /// Ties are broken by index.
    pub fn nearest(&self, q: &Vec3, k: usize) -> Vec<(f64, usize)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.nearest_rec(0, &q, k, &mut heap);
        let mut v: Vec<(f64, usize)> = heap.into_iter().map(|c| (c.0.sqrt(), c.1)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    }

    fn nearest_rec(&self, id: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate(dist2(&self.points[i], q), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = q[dim] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, k, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().0
                };
                if delta * delta <= worst {
                    self.nearest_rec(far, q, k, heap);
                }
            }
        }
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn radius_query_matches_scan() {
        let pts = cloud(700, 3);
        let tree = KdTree::new(&pts);
        for q in pts.iter().step_by(37) {
            let got = tree.within(q, 0.2);
            let want: Vec<usize> = (0..pts.len()).filter(|&j| (pts[j] - q).norm() < 0.2).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn nearest_matches_scan() {
        let pts = cloud(500, 9);
        let tree = KdTree::new(&pts);
        let q = Vec3::new(0.4, 0.6, 0.1);
        let got = tree.nearest(&q, 5);
        let mut all: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - q).norm(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (g, w) in got.iter().zip(&all) {
            assert_eq!(g.1, w.1);
        }
    }

    #[test]
    fn duplicate_coordinates() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0); 40];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.within(&Vec3::zeros(), 1e-9).len(), 40);
        assert_eq!(tree.nearest(&Vec3::zeros(), 3).len(), 3);
    }
}
