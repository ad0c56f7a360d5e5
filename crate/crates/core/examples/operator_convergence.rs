//! Convergence of one discrete surface operator applied to the test field
//! z(x^4 + y^4 - 6x^2y^2).
//!
//! cargo run --release --example operator_convergence -- [shape] [op] [m] [levels]
//!
//! op is one of lb, bh, curv_k, curl0, curl1.

use gmls_surface::gmls::GmlsConfig;
use gmls_surface::manufactured::AnalyticScalar;
use gmls_surface::point_cloud::ManifoldShape;
use gmls_surface::study::operator_study;
use gmls_surface::surface_ops::OperatorKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let shape = ManifoldShape::by_name(args.first().map(String::as_str).unwrap_or("a")).ok_or("unknown shape")?;
    let kind = OperatorKind::parse(args.get(1).map(String::as_str).unwrap_or("lb")).ok_or("unknown operator")?;
    let m: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let levels: Vec<f64> = args
        .get(3)
        .map(String::as_str)
        .unwrap_or("0.1,0.05")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;

    let t = std::time::Instant::now();
    let rec = operator_study(&shape, kind, &levels, &GmlsConfig::with_orders(m, m), 1, &AnalyticScalar::test_field())?;
    println!("{} (m = {m})", rec.label);
    print!("{}", rec.to_csv());
    println!("({:.1?})", t.elapsed());
    Ok(())
}
