mod common;

use common::GOE_TABLE;
use shelab::fredholm_pfaffian::{
    fredholm_det, fredholm_series, goe_cdf, laplace_transform, phi, FredholmContext,
};

#[test]
fn goe_table() {
    let ctx = FredholmContext::default();
    for (s0, f) in GOE_TABLE {
        let v = goe_cdf(s0, &ctx).unwrap();
        assert!((v - f).abs() < 1e-10, "F({s0}) = {v} vs {f}");
    }
}

#[test]
fn goe_cdf_monotone() {
    let ctx = FredholmContext::default();
    let vals: Vec<f64> = (0..50).map(|k| goe_cdf(-4.0 + 0.2 * k as f64, &ctx).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    assert!(vals[0] > 0.0 && vals[49] < 1.0);
}

#[test]
fn series_matches_determinant() {
    for (s, t) in [(0.01, 1.0), (0.1, 1.0), (0.01, 4.0), (0.1, 4.0)] {
        let ctx = FredholmContext::new((-12.0, 12.0), 80, 3).unwrap();
        let f = |x: f64| phi(0, s, t, x).unwrap();
        let det = laplace_transform(s, t, &ctx).unwrap();
        let series = fredholm_series(f, &ctx).unwrap();
        assert!((det - series).abs() < 1e-6, "(s,t)=({s},{t}) det {det} series {series}");
    }
}

#[test]
fn laplace_is_a_laplace_transform() {
    let ctx = FredholmContext::default();
    let vals: Vec<f64> = [0.01, 0.1, 0.5, 2.0].iter().map(|&s| laplace_transform(s, 2.0, &ctx).unwrap()).collect();
    assert!(vals.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn laplace_converges_in_m() {
    let coarse = FredholmContext::new((-12.0, 12.0), 80, 3).unwrap();
    let fine = FredholmContext::new((-12.0, 12.0), 160, 3).unwrap();
    let a = laplace_transform(0.25, 8.0, &coarse).unwrap();
    let b = laplace_transform(0.25, 8.0, &fine).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn det_is_path_independent() {
    let ctx = FredholmContext::new((-10.0, 10.0), 60, 1).unwrap();
    let f = |x: f64| -0.3 / (1.0 + (x - 1.0).exp());
    let a = fredholm_det(f, &ctx, &[0.0, 1.0]).unwrap();
    let b = fredholm_det(f, &ctx, &[0.0, 0.1, 0.3, 0.6, 1.0]).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}
