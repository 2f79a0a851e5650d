use proptest::prelude::*;
use shelab::goe_kernel::{
    correlation, k12_diag, k12_diag_plain, k_entry, DiagMode, EvaluationPoints, Formula, KernelBlocks,
    KernelEntrySelector as Sel,
};

const K12_00: f64 = 0.185_330_168_408_935;

#[test]
fn k12_at_origin() {
    assert!((k12_diag_plain(0.0).unwrap() - K12_00).abs() < 1e-12);
    assert!((k_entry(Sel::K12, 0.0, 0.0, Formula::Alternate).unwrap() - K12_00).abs() < 1e-10);
}

#[test]
fn density_matches_dense_closed_form() {
    // K12(x,x) = Ai'(x)² − x Ai(x)² + ½Ai(x)(1 − T(x))
    use shelab::special_functions::{airy, airy_upper_tail};
    for i in 0..=40 {
        let x = -12.0 + 0.5 * i as f64;
        let a = airy(x).unwrap();
        let closed = a.ai_prime * a.ai_prime - x * a.ai * a.ai + 0.5 * a.ai * (1.0 - airy_upper_tail(x).unwrap());
        assert!((k12_diag_plain(x).unwrap() - closed).abs() < 1e-11, "x={x}");
    }
}

#[test]
fn density_grows_like_sqrt_on_the_left() {
    let x: f64 = -25.0;
    let r = k12_diag_plain(x).unwrap() / ((-x).sqrt() / std::f64::consts::PI);
    assert!((r - 1.0).abs() < 0.02, "ratio {r}");
}

#[test]
fn two_point_function_is_repulsive() {
    let rho = |pts: Vec<f64>| correlation(&EvaluationPoints::new(pts).unwrap()).unwrap();
    let r1 = rho(vec![-1.0]);
    assert!(rho(vec![-1.0, -1.0 + 1e-3]) < 1e-3 * r1 * r1);
    let far = rho(vec![-1.0, -9.0]);
    let prod = r1 * rho(vec![-9.0]);
    assert!((far / prod - 1.0).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antisymmetry(x in -12.0f64..8.0, y in -12.0f64..8.0) {
        let k11 = |a, b| k_entry(Sel::K11, a, b, Formula::Primary).unwrap();
        let k22 = |a, b| k_entry(Sel::K22, a, b, Formula::Primary).unwrap();
        let k12 = |a, b| k_entry(Sel::K12, a, b, Formula::Primary).unwrap();
        let k21 = |a, b| k_entry(Sel::K21, a, b, Formula::Primary).unwrap();
        prop_assert!((k11(x, y) + k11(y, x)).abs() < 1e-10);
        prop_assert!((k22(x, y) + k22(y, x)).abs() < 1e-10);
        prop_assert!((k21(x, y) + k12(y, x)).abs() < 1e-10);
    }

    #[test]
    fn formulas_agree(x in -12.0f64..8.0, y in -12.0f64..8.0) {
        for sel in [Sel::K11, Sel::K12, Sel::K22] {
            let p = k_entry(sel, x, y, Formula::Primary).unwrap();
            let a = k_entry(sel, x, y, Formula::Alternate).unwrap();
            prop_assert!((p - a).abs() < 1e-8 * (1.0 + p.abs()), "{:?}: {} vs {}", sel, p, a);
        }
    }

    #[test]
    fn density_nonnegative(x in -30.0f64..30.0) {
        prop_assert!(k12_diag(x, DiagMode::Plain).unwrap().to_f64() >= -1e-10);
    }

    #[test]
    fn correlation_is_symmetric(a in -8.0f64..4.0, b in -8.0f64..4.0, c in -8.0f64..4.0) {
        let rho = |pts: Vec<f64>| correlation(&EvaluationPoints::new(pts).unwrap()).unwrap();
        let r = rho(vec![a, b, c]);
        prop_assert!((rho(vec![c, a, b]) - r).abs() < 1e-12 * (1.0 + r.abs()));
        prop_assert!(r >= -1e-12);
    }

    #[test]
    fn blocks_are_antisymmetric(pts in prop::collection::vec(-10.0f64..6.0, 1..6)) {
        let b = KernelBlocks::new(&pts).unwrap();
        let m = b.matrix();
        let n = 2 * b.len();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((m[i * n + j] + m[j * n + i]).abs() < 1e-10);
            }
        }
    }
}
