use gmls_surface::gmls::{apply_target, GmlsProblem, PolyBasis2D, WeightKernel};
use gmls_surface::jet::{n_terms, term_index};
use gmls_surface::point_cloud::{KdTree, Vec3};
use gmls_surface::sparse::{CsrMatrix, Layout, MultifrontalLu};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kdtree_radius_query_matches_brute_force(
        pts in prop::collection::vec(vec3(), 1..300),
        q in vec3(),
        r in 0.01..1.5f64,
    ) {
        let tree = KdTree::new(&pts);
        let brute: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() < r).collect();
        prop_assert_eq!(tree.within(&q, r), brute);
    }

    #[test]
    fn kdtree_nearest_matches_brute_force(pts in prop::collection::vec(vec3(), 1..200), q in vec3(), k in 1usize..12) {
        let tree = KdTree::new(&pts);
        let mut brute: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - q).norm(), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        brute.truncate(k);
        let got = tree.nearest(&q, k);
        prop_assert_eq!(got.iter().map(|g| g.1).collect::<Vec<_>>(), brute.iter().map(|b| b.1).collect::<Vec<_>>());
    }

    #[test]
    fn gmls_reproduces_polynomials_at_any_scale(
        m in 1usize..=6,
        eps in 0.05..2.0f64,
        seed_coef in prop::collection::vec(-1.0..1.0f64, 28),
        seed_pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 120),
    ) {
        let coords: Vec<[f64; 2]> = std::iter::once([0.0, 0.0])
            .chain(seed_pts.iter().filter(|(u, v)| u * u + v * v < 0.9).map(|&(u, v)| [u * eps, v * eps]))
            .collect();
        prop_assume!(coords.len() >= 3 * n_terms(m));
        let basis = PolyBasis2D::new(m, eps);
        let problem = GmlsProblem::build(0, &coords, &WeightKernel::new(eps, 2.0), basis).unwrap();
        let q = |u: f64, v: f64| {
            let mut s = 0.0;
            for i in 0..=m {
                for j in 0..=m - i {
                    s += seed_coef[term_index(i, j)] * u.powi(i as i32) * v.powi(j as i32);
                }
            }
            s
        };
        let samples: Vec<f64> = coords.iter().map(|c| q(c[0], c[1])).collect();
        let fit = problem.fit(&samples).unwrap();
        for i in 0..=m.min(2) {
            for j in 0..=m.min(2) - i {
                let exact = (1..=i).product::<usize>() as f64 * (1..=j).product::<usize>() as f64 * seed_coef[term_index(i, j)];
                let approx = apply_target(&basis.derivative_target(i, j), &fit);
                let scale = 1.0 + exact.abs();
                prop_assert!((approx - exact).abs() <= 1e-8 * scale / eps.powi((i + j) as i32), "{} {} {} {}", i, j, approx, exact);
            }
        }
    }

    #[test]
    fn sparse_ops_match_dense(
        entries in prop::collection::vec((0usize..20, 0usize..20, -2.0..2.0f64), 0..120),
        x in prop::collection::vec(-1.0..1.0f64, 20),
    ) {
        let a = CsrMatrix::from_triplets(20, 20, &entries);
        let d = a.to_dense();
        let y = a.matvec(&x);
        let yd = &d * nalgebra::DVector::from_vec(x.clone());
        for (p, q) in y.iter().zip(yd.iter()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        prop_assert_eq!(a.transpose().to_dense(), d.transpose());
        let ab = a.matmul(&a.transpose()).to_dense();
        let abd = &d * d.transpose();
        prop_assert!((ab - abd).abs().max() <= 1e-12);
    }

    #[test]
    fn multifrontal_solves_diagonally_dominant_systems(
        entries in prop::collection::vec((0usize..40, 0usize..40, -1.0..1.0f64), 0..200),
        b in prop::collection::vec(-1.0..1.0f64, 40),
    ) {
        let mut t = entries.clone();
        t.extend((0..40).map(|i| (i, i, 50.0)));
        let a = CsrMatrix::from_triplets(40, 40, &t);
        let lu = MultifrontalLu::factor(&a, &Layout::dense(40)).unwrap();
        let (x, rep) = lu.solve_refined(&b, 1e-14, 3);
        prop_assert!(rep.relative_residual <= 1e-13);
        let ax = a.matvec(&x);
        for (p, q) in ax.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }
}
