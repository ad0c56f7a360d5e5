//! Fit a degree-4 polynomial from scattered samples in a disk and recover
//! its derivatives at the origin.
//!
//! cargo run --release --example gmls_fit

use gmls_surface::gmls::{GmlsProblem, PolyBasis2D, WeightKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f(u: f64, v: f64) -> f64 {
    1.0 + 2.0 * u - v + 0.5 * u * v + 3.0 * u * u * v * v - u.powi(4)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coords: Vec<[f64; 2]> = (0..60)
        .map(|_| {
            let r = eps * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let samples: Vec<f64> = coords.iter().map(|c| f(c[0], c[1])).collect();

    let basis = PolyBasis2D::new(4, eps);
    let problem = GmlsProblem::build(0, &coords, &WeightKernel::new(eps, 2.0), basis)?;
    let coeffs = problem.fit(&samples)?;
    println!("{} samples, {} basis functions, condition {:.2e}", coords.len(), basis.dim(), problem.condition());

    // (i, j, exact d^i/du^i d^j/dv^j f at 0)
    for (i, j, exact) in [(0, 0, 1.0), (1, 0, 2.0), (0, 1, -1.0), (1, 1, 0.5), (2, 2, 12.0), (4, 0, -24.0)] {
        let target = basis.derivative_target(i, j);
        let value: f64 = target.iter().zip(&coeffs.a).map(|(t, a)| t * a).sum();
        let weights = problem.row_weights(&target);
        let from_row: f64 = weights.iter().zip(&samples).map(|(w, s)| w * s).sum();
        println!("d({i},{j}) = {value:+.12} (row weights {from_row:+.12}, exact {exact:+})");
    }
    Ok(())
}
