//! Manufactured surface Stokes flow: solve with both formulations on the
//! same clouds and report relative velocity errors.
//!
//! cargo run --release --example stokes_flow -- [shape] [m] [levels]

use gmls_surface::gmls::GmlsConfig;
use gmls_surface::manufactured::AnalyticScalar;
use gmls_surface::point_cloud::ManifoldShape;
use gmls_surface::stokes::{Formulation, HydroParams, SolverConfig};
use gmls_surface::study::stokes_study;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let shape = ManifoldShape::by_name(args.first().map(String::as_str).unwrap_or("a")).ok_or("unknown shape")?;
    let m: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let levels: Vec<f64> = args
        .get(2)
        .map(String::as_str)
        .unwrap_or("0.1,0.05")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;

    let t = std::time::Instant::now();
    let records = stokes_study(
        &shape,
        &levels,
        &GmlsConfig::with_orders(m, m),
        &HydroParams::default(),
        &[Formulation::Split, Formulation::Biharmonic],
        &SolverConfig::default(),
        1,
        &AnalyticScalar::test_field(),
    )?;
    for rec in records {
        println!("{} (m = {m})", rec.label);
        print!("{}", rec.to_csv());
    }
    println!("({:.1?})", t.elapsed());
    Ok(())
}
