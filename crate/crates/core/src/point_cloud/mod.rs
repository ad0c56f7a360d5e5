//! Point samplings of surfaces, spatial queries and spacing statistics.

mod io;
mod kdtree;
mod sampling;
mod shape;

pub use io::{read_ply, read_xyz, write_ply, write_xyz};
pub use kdtree::KdTree;
pub use sampling::{sample_manifold, SamplingOptions};
pub use shape::{chebyshev_u, gauss_legendre, ManifoldShape, Vec3};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub target_h: f64,
    pub shape: Option<ManifoldShape>,
    pub seed: u64,
    tree: KdTree,
}

impl PointCloud {
    /// Build a cloud from points and reference normals; normals are
    /// renormalized to unit length.
    pub fn new(
        points: Vec<Vec3>,
        normals: Vec<Vec3>,
        target_h: f64,
        shape: Option<ManifoldShape>,
        seed: u64,
    ) -> Result<PointCloud> {
        if points.len() != normals.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let mut normals = normals;
        for (i, n) in normals.iter_mut().enumerate() {
            let len = n.norm();
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::degenerate(i, "reference normal has zero length"));
            }
            *n /= len;
        }
        let tree = KdTree::new(&points);
        Ok(PointCloud {
            points,
            normals,
            target_h,
            shape,
            seed,
            tree,
        })
    }

    /// Cloud on an analytic shape with normals taken from the shape.
    pub fn on_shape(points: Vec<Vec3>, shape: ManifoldShape, target_h: f64, seed: u64) -> Result<PointCloud> {
        let normals = points
            .iter()
            .map(|p| shape.normal(p).ok_or(Error::NoProjectionAvailable))
            .collect::<Result<Vec<_>>>()?;
        PointCloud::new(points, normals, target_h, Some(shape), seed)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// All `j` with `|x_j - x_i| < eps`, including `i`, sorted ascending.
    pub fn neighbors(&self, i: usize, eps: f64) -> Vec<usize> {
        self.tree.within(&self.points[i], eps)
    }

    /// Neighbors within `eps` whose reference normals agree in orientation
    /// with point `i`, so patches never mix opposite sheets of the surface.
    pub fn stencil(&self, i: usize, eps: f64) -> Vec<usize> {
        let ni = self.normals[i];
        let mut out = self.tree.within(&self.points[i], eps);
        out.retain(|&j| self.normals[j].dot(&ni) > 0.0);
        out
    }

    /// Distance from each point to its nearest other point.
    pub fn nearest_distances(&self) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                self.tree
                    .nearest(&self.points[i], 2)
                    .into_iter()
                    .find(|&(_, j)| j != i)
                    .map(|(d, _)| d)
                    .unwrap_or(f64::INFINITY)
            })
            .collect()
    }

    /// Bounding-box diagonal, an upper bound on the diameter.
    pub fn diameter_bound(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.points.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplingStats {
    pub n: usize,
    /// Largest nearest-neighbor distance, a point-based surrogate for the
    /// fill distance (the supremum over the surface is not computable from
    /// the samples alone).
    pub fill_estimate: f64,
    pub separation: f64,
    pub quasi_uniformity_ratio: f64,
    pub min_neighbor_distance: f64,
    pub mean_neighbor_distance: f64,
}

pub fn sampling_stats(cloud: &PointCloud) -> Result<SamplingStats> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints(cloud.len()));
    }
    let nn = cloud.nearest_distances();
    let min = nn.iter().copied().fold(f64::INFINITY, f64::min);
    let max = nn.iter().copied().fold(0.0, f64::max);
    let mean = nn.iter().sum::<f64>() / nn.len() as f64;
    let separation = 0.5 * min;
    Ok(SamplingStats {
        n: cloud.len(),
        fill_estimate: max,
        separation,
        quasi_uniformity_ratio: max / separation,
        min_neighbor_distance: min,
        mean_neighbor_distance: mean,
    })
}

/// Gaussian jitter of standard deviation `alpha * l`, `l` one third of the
/// smallest nearest-neighbor distance, followed by projection to the shape.
pub fn perturb_and_project(cloud: &PointCloud, alpha: f64, seed: u64) -> Result<PointCloud> {
    let (perturbed, _) = perturb_with_displacements(cloud, alpha, seed)?;
    Ok(perturbed)
}

/// As [`perturb_and_project`], also returning the raw pre-projection offsets.
pub fn perturb_with_displacements(cloud: &PointCloud, alpha: f64, seed: u64) -> Result<(PointCloud, Vec<Vec3>)> {
    let shape = cloud
        .shape
        .clone()
        .filter(|s| s.is_analytic())
        .ok_or(Error::NoProjectionAvailable)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("perturbation strength must be non-negative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok((cloud.clone(), vec![Vec3::zeros(); cloud.len()]));
    }
    let ell = cloud.nearest_distances().into_iter().fold(f64::INFINITY, f64::min) / 3.0;
    let sigma = alpha * ell;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = Vec::with_capacity(cloud.len());
    let mut points = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let eta = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        let q = shape.project(&(p + eta)).ok_or(Error::NoProjectionAvailable)?;
        offsets.push(eta);
        points.push(q);
    }
    let out = PointCloud::on_shape(points, shape, cloud.target_h, seed)?;
    Ok((out, offsets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_of_two_points() {
        let pts = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)];
        let nrm = pts.clone();
        let c = PointCloud::new(pts, nrm, 1.0, None, 0).unwrap();
        let s = sampling_stats(&c).unwrap();
        assert_eq!(s.separation, 1.0);
    }

    #[test]
    fn planar_grid_separation() {
        let d = 0.1;
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Vec3::new(i as f64 * d, j as f64 * d, 0.0));
            }
        }
        let nrm = vec![Vec3::z(); pts.len()];
        let c = PointCloud::new(pts, nrm, d, None, 0).unwrap();
        let s = sampling_stats(&c).unwrap();
        assert!((s.separation - d / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_point_is_too_few() {
        let c = PointCloud::new(vec![Vec3::zeros()], vec![Vec3::z()], 1.0, None, 0).unwrap();
        assert!(matches!(sampling_stats(&c), Err(Error::TooFewPoints(1))));
    }

    #[test]
    fn neighbors_include_self() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let c = PointCloud::new(pts, vec![Vec3::z(); 3], 1.0, None, 0).unwrap();
        assert_eq!(c.neighbors(0, 0.5), vec![0]);
        assert_eq!(c.neighbors(0, 10.0), vec![0, 1, 2]);
    }

    #[test]
    fn perturb_requires_shape() {
        let c = PointCloud::new(vec![Vec3::zeros(), Vec3::x()], vec![Vec3::z(); 2], 1.0, None, 0).unwrap();
        assert!(matches!(perturb_and_project(&c, 0.1, 1), Err(Error::NoProjectionAvailable)));
    }
}
