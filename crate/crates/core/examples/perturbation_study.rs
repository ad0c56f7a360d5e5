//! Sensitivity of second- and fourth-order solves to jitter in the point
//! positions on the ellipsoid.
//!
//! cargo run --release --example perturbation_study -- [levels] [m]

use gmls_surface::gmls::GmlsConfig;
use gmls_surface::manufactured::AnalyticScalar;
use gmls_surface::point_cloud::ManifoldShape;
use gmls_surface::study::{perturbation_csv, perturbation_study};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let levels: Vec<f64> = args
        .first()
        .map(String::as_str)
        .unwrap_or("0.1,0.05")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let m: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3);

    let t = std::time::Instant::now();
    let records = perturbation_study(
        &ManifoldShape::ellipsoid_a(),
        &levels,
        &[0.0, 0.05, 0.1, 0.5],
        &GmlsConfig::with_orders(m, m),
        1,
        &AnalyticScalar::AngularHarmonic54,
    )?;
    print!("{}", perturbation_csv(&records));
    println!("({:.1?})", t.elapsed());
    Ok(())
}
