use outlier_ldp::error::Error;
use outlier_ldp::free_conv::FreeConvContext;
use outlier_ldp::measure::AtomicMeasure;

fn fixtures() -> Vec<FreeConvContext> {
    [
        (vec![(0.0, 1.0)], 1.0),
        (vec![(-1.0, 0.5), (1.0, 0.5)], 1.0),
        (vec![(-1.0, 0.2), (0.0, 0.5), (2.0, 0.3)], 0.5),
        (vec![(-3.0, 0.5), (3.0, 0.5)], 0.3),
    ]
    .into_iter()
    .map(|(atoms, t)| FreeConvContext::new(AtomicMeasure::new(&atoms).unwrap(), t).unwrap())
    .collect()
}

/// 200 admissible points below the edge, denser close to it.
fn grid(ctx: &FreeConvContext) -> Vec<f64> {
    (0..200).map(|i| ctx.edge() - 8.0 * ((i as f64 + 0.5) / 200.0).powi(2)).collect()
}

#[test]
fn branch_residuals() {
    for ctx in fixtures() {
        for x in grid(&ctx) {
            let lo = ctx.subordination_lower(x).unwrap();
            let up = ctx.subordination_upper(x).unwrap();
            let tol = 1e-12 * (1.0 + x.abs());
            assert!((ctx.h_transform(lo).unwrap() - x).abs() <= tol, "lower at {x}");
            assert!((ctx.h_transform(up).unwrap() - x).abs() <= tol, "upper at {x}");
            assert!(lo <= ctx.shock_point() && ctx.shock_point() <= up);
        }
    }
}

#[test]
fn branches_meet_at_the_edge_and_are_monotone() {
    for ctx in fixtures() {
        let e = ctx.edge();
        assert_eq!(ctx.subordination_lower(e).unwrap(), ctx.shock_point());
        assert_eq!(ctx.subordination_upper(e).unwrap(), ctx.shock_point());
        let near = e - 1e-10;
        assert!((ctx.subordination_lower(near).unwrap() - ctx.shock_point()).abs() < 1e-4);
        assert!((ctx.subordination_upper(near).unwrap() - ctx.shock_point()).abs() < 1e-4);
        let mut xs = grid(&ctx);
        xs.sort_by(f64::total_cmp);
        let lower: Vec<f64> = xs.iter().map(|&x| ctx.subordination_lower(x).unwrap()).collect();
        let upper: Vec<f64> = xs.iter().map(|&x| ctx.subordination_upper(x).unwrap()).collect();
        assert!(lower.windows(2).all(|w| w[0] < w[1]));
        assert!(upper.windows(2).all(|w| w[0] > w[1]));
        assert!(matches!(ctx.subordination_lower(e + 1e-6), Err(Error::AboveEdge { .. })));
    }
}

#[test]
fn subordination_identity() {
    for ctx in fixtures() {
        for x in grid(&ctx) {
            let w = ctx.subordination_lower(x).unwrap();
            let g = ctx.stieltjes_conv(x).unwrap();
            assert!((w + ctx.t() * g - x).abs() <= 1e-10, "at {x}");
        }
    }
}

#[test]
fn density_normalization_and_edges() {
    for ctx in fixtures() {
        let curve = ctx.density_curve(4000).unwrap();
        assert!((curve.total_mass() - 1.0).abs() <= 1e-6, "{}", curve.total_mass());
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!(first.1, 0.0);
        assert_eq!(last.1, 0.0);
        assert!((first.0 - ctx.edge()).abs() < 1e-9);
        assert!(curve.points.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(curve.points.iter().all(|p| p.1 >= 0.0));
    }
}

#[test]
fn gap_fixture_has_two_components() {
    let ctx = fixtures().pop().unwrap();
    let curve = ctx.density_curve(4000).unwrap();
    let zeros_inside = curve.points[1..curve.points.len() - 1].iter().filter(|p| p.1 == 0.0).count();
    assert_eq!(zeros_inside, 2);
    assert!((curve.cdf(0.0) - 0.5).abs() < 1e-6);
}

#[test]
fn log_potential_matches_density_quadrature() {
    for ctx in fixtures() {
        let curve = ctx.density_curve(20000).unwrap();
        for i in 0..20 {
            let x = ctx.edge() - 0.1 - 0.3 * i as f64;
            let quad = curve.integrate(|y| (y - x).abs().ln());
            let hopf_lax = ctx.log_potential_conv(x).unwrap();
            assert!((quad - hopf_lax).abs() <= 1e-6, "x={x}: {quad} vs {hopf_lax}");
        }
    }
}

#[test]
fn semicircle_closed_forms() {
    let ctx = fixtures().remove(0);
    for x in [-2.5, -3.0, -7.0] {
        let g = (x + (x * x - 4.0f64).sqrt()) / 2.0;
        assert!((ctx.stieltjes_conv(x).unwrap() - g).abs() < 1e-13);
    }
    assert!((ctx.cdf(0.0) - 0.5).abs() < 1e-6);
    let v = ctx.biane_v(0.0);
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn two_atom_shock_and_edge() {
    let ctx = fixtures().remove(1);
    assert!((ctx.shock_point() + 3f64.sqrt()).abs() <= 1e-10);
    assert!((ctx.edge() + 1.5 * 3f64.sqrt()).abs() <= 1e-10);
}
