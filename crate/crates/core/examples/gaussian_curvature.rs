//! Gaussian curvature from the GMLS surface reconstruction, with errors
//! against the exact curvature and observed rates.
//!
//! cargo run --release --example gaussian_curvature -- [shape] [levels] [m]

use gmls_surface::gmls::GmlsConfig;
use gmls_surface::point_cloud::ManifoldShape;
use gmls_surface::study::curvature_study;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let shape = ManifoldShape::by_name(args.first().map(String::as_str).unwrap_or("a")).ok_or("unknown shape")?;
    let levels: Vec<f64> = args
        .get(1)
        .map(String::as_str)
        .unwrap_or("0.1,0.05")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let m: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(6);

    let t = std::time::Instant::now();
    let rec = curvature_study(&shape, &levels, &GmlsConfig::with_orders(m, m), 1)?;
    println!("{} (m1 = {m})", rec.label);
    print!("{}", rec.to_csv());
    println!("({:.1?})", t.elapsed());
    Ok(())
}
