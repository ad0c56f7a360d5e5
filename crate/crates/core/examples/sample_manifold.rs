//! Sample a benchmark manifold and print spacing statistics.
//!
//! cargo run --release --example sample_manifold -- [shape] [h] [seed]

use gmls_surface::point_cloud::{sample_manifold, sampling_stats, ManifoldShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("a");
    let h: f64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let shape = ManifoldShape::by_name(name).ok_or("unknown shape (a, b, c, d, sphere)")?;

    let t = std::time::Instant::now();
    let cloud = sample_manifold(&shape, h, seed)?;
    let stats = sampling_stats(&cloud)?;
    let worst = cloud
        .points
        .iter()
        .map(|p| shape.residual(p).abs())
        .fold(0.0, f64::max);
    println!("shape {} h {h} seed {seed}: n = {} ({:.2?})", shape.name(), cloud.len(), t.elapsed());
    println!(
        "nearest-neighbor distance: min {:.4} mean {:.4} max {:.4} (relative to h: {:.3} .. {:.3})",
        stats.min_neighbor_distance,
        stats.mean_neighbor_distance,
        stats.fill_estimate,
        stats.min_neighbor_distance / h,
        stats.fill_estimate / h
    );
    println!(
        "separation {:.4e}, quasi-uniformity ratio {:.3}, max level-set residual {worst:.2e}",
        stats.separation, stats.quasi_uniformity_ratio
    );
    Ok(())
}
