use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kdtree::KdTree;
use super::shape::{ManifoldShape, Vec3};
use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SamplingOptions {
    /// Surface area per sample in units of `h^2`.
    pub area_per_point: f64,
    /// Allowed relative deviation of nearest-neighbor distances from `h`.
    pub spacing_tolerance: f64,
    pub max_iterations: usize,
    pub min_points: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            area_per_point: 0.69,
            spacing_tolerance: 0.3,
            max_iterations: 400,
            min_points: 50,
        }
    }
}

/// Quasi-uniform sampling: Poisson-disk seeding, then projected repulsion.
pub fn sample_manifold(shape: &ManifoldShape, target_h: f64, seed: u64) -> Result<PointCloud> {
    sample_manifold_with(shape, target_h, seed, &SamplingOptions::default())
}

pub fn sample_manifold_with(
    shape: &ManifoldShape,
    target_h: f64,
    seed: u64,
    opts: &SamplingOptions,
) -> Result<PointCloud> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(Error::Config(format!("target spacing must be positive, got {target_h}")));
    }
    shape.validate().map_err(Error::Config)?;
    let area = shape.area().ok_or(Error::NoProjectionAvailable)?;
    let n = (area / (opts.area_per_point * target_h * target_h)).round() as usize;
    if n < opts.min_points {
        return Err(Error::TargetTooCoarse { target_h, count: n });
    }
    // hexagonal spacing that tiles the area with n points
    let spacing = (2.0 * area / (3f64.sqrt() * n as f64)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = dart_throw(shape, n, 0.7 * spacing, &mut rng);
    relax(shape, &mut points, spacing, target_h, opts)?;
    PointCloud::on_shape(points, shape.clone(), target_h, seed)
}

fn dart_throw(shape: &ManifoldShape, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let cell = radius;
    let key = |p: &Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut points: Vec<Vec3> = Vec::with_capacity(n);
    let max_attempts = 80 * n;
    let mut attempts = 0;
    while points.len() < n && attempts < max_attempts {
        attempts += 1;
        let Some(p) = shape.random_point(rng.random(), rng.random(), rng.random()) else {
            continue;
        };
        let (cx, cy, cz) = key(&p);
        let mut free = true;
        'scan: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if list.iter().any(|&j| (points[j] - p).norm() < radius) {
                            free = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if free {
            grid.entry((cx, cy, cz)).or_default().push(points.len());
            points.push(p);
        }
    }
    // saturated before reaching n: top up with unconstrained draws
    while points.len() < n {
        if let Some(p) = shape.random_point(rng.random(), rng.random(), rng.random()) {
            points.push(p);
        }
    }
    points
}

fn relax(shape: &ManifoldShape, points: &mut [Vec3], spacing: f64, h: f64, opts: &SamplingOptions) -> Result<()> {
    let rest = 1.3 * spacing;
    let dt = 0.07;
    let lo = (1.0 - opts.spacing_tolerance) * h;
    let hi = (1.0 + opts.spacing_tolerance) * h;
    let mut violations = usize::MAX;
    for iter in 0..opts.max_iterations {
        let tree = KdTree::new(points);
        let moved: Vec<(Vec3, f64)> = points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut force = Vec3::zeros();
                for j in tree.within(p, rest) {
                    if j == i {
                        continue;
                    }
                    let d = p - points[j];
                    let len = d.norm();
                    if len > 0.0 {
                        // stiffer than linear at short range, evens out the closest pairs
                        force += d * ((rest - len) / len * (spacing / len).powi(3));
                    } else {
                        // coincident points: deterministic nudge
                        force += Vec3::new(1.0, 0.5, 0.25) * (1e-3 * spacing * (i as f64 - j as f64).signum());
                    }
                }
                let nrm = shape.normal(p).unwrap_or_else(Vec3::zeros);
                let mut step = (force - nrm * nrm.dot(&force)) * dt;
                let cap = 0.2 * spacing;
                if step.norm() > cap {
                    step *= cap / step.norm();
                }
                let q = shape.project(&(p + step)).unwrap_or(*p);
                (q, (q - p).norm())
            })
            .collect();
        let mut max_move: f64 = 0.0;
        for (p, (q, m)) in points.iter_mut().zip(moved) {
            *p = q;
            max_move = max_move.max(m);
        }
        if iter >= 20 && (iter % 10 == 0 || max_move < 1e-3 * spacing) {
            let tree = KdTree::new(points);
            violations = points
                .par_iter()
                .enumerate()
                .filter(|(i, p)| {
                    let d = tree
                        .nearest(p, 2)
                        .into_iter()
                        .find(|&(_, j)| j != *i)
                        .map(|(d, _)| d)
                        .unwrap_or(f64::INFINITY);
                    !(lo..=hi).contains(&d)
                })
                .count();
            if violations == 0 && (max_move < 2e-3 * spacing || iter >= 80) {
                return Ok(());
            }
        }
    }
    if violations == 0 {
        return Ok(());
    }
    Err(Error::NonConvergedRelaxation {
        iterations: opts.max_iterations,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_coarse_sphere() {
        let r = sample_manifold(&ManifoldShape::unit_sphere(), std::f64::consts::PI, 1);
        assert!(matches!(r, Err(Error::TargetTooCoarse { .. })));
    }

    #[test]
    fn rejects_nonpositive_spacing() {
        assert!(matches!(
            sample_manifold(&ManifoldShape::unit_sphere(), 0.0, 1),
            Err(Error::Config(_))
        ));
    }
}
