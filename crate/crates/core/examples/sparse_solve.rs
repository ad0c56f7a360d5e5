//! Solve a screened Laplace-Beltrami problem `(gamma - LB) u = f` on the
//! sphere with the direct multifrontal LU and with ILU(0)-preconditioned
//! GMRES, and compare with the exact solution.
//!
//! cargo run --release --example sparse_solve -- [h]

use gmls_surface::geometry::build_geometry;
use gmls_surface::gmls::GmlsConfig;
use gmls_surface::manufactured::{l2_error, AnalyticScalar};
use gmls_surface::point_cloud::{sample_manifold, ManifoldShape};
use gmls_surface::sparse::{gmres, CsrMatrix, GmresOptions, Ilu0, Layout, MultifrontalLu};
use gmls_surface::surface_ops::{OperatorAssembler, OperatorKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.08);
    let gamma = 1.0;
    let cloud = sample_manifold(&ManifoldShape::unit_sphere(), h, 1)?;
    let cfg = GmlsConfig::with_orders(4, 4);
    let geom = build_geometry(&cloud, &cfg)?;
    let lb = OperatorAssembler::from_config(&cloud, &geom, &cfg)?.assemble_one(OperatorKind::LaplaceBeltrami)?;
    let a = CsrMatrix::linear_combination(&[(gamma, &CsrMatrix::identity(cloud.len())), (-1.0, &lb.matrix)]);

    // u = Y_3, so -LB u = 12 u.
    let u = AnalyticScalar::HarmonicPolynomial { degree: 3 }.values(&cloud.points);
    let f: Vec<f64> = u.iter().map(|x| (gamma + 12.0) * x).collect();
    println!("n = {}, nnz = {}", cloud.len(), a.nnz());

    let t = std::time::Instant::now();
    let lu = MultifrontalLu::factor(&a, &Layout::blocked(&cloud.points, 1, 0))?;
    let (x, report) = lu.solve_refined(&f, 1e-12, 3);
    println!(
        "direct: error {:.3e}, residual {:.1e}, largest front {}, factor entries {} ({:.1?})",
        l2_error(&x, &u)?,
        report.relative_residual,
        report.largest_front,
        report.factor_entries,
        t.elapsed()
    );

    let t = std::time::Instant::now();
    let out = gmres(&a, &f, None, &Ilu0::new(&a)?, &GmresOptions::default())?;
    println!(
        "gmres + ilu(0): error {:.3e}, {} iterations ({:.1?})",
        l2_error(&out.x, &u)?,
        out.iterations,
        t.elapsed()
    );
    Ok(())
}
