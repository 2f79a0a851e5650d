use proptest::prelude::*;
use shelab::fredholm_pfaffian::phi;
use shelab::she_moments::{
    c_constant, compositions, fractional_moment, higher_term_with, leading_term, moment_from_laplace, moment_params,
    product_derivative, remainder_bound, Route,
};
use shelab::special_functions::gamma;

const S_MAX: f64 = 1e40;
const PS: [f64; 4] = [0.5, 1.0, 1.5, 2.5];

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn deterministic_law() {
    for p in PS {
        let c = 2.0f64;
        let m = moment_from_laplace(|k, s| (-c).powi(k as i32) * (-c * s).exp(), &moment_params(p, 1.0).unwrap(), S_MAX)
            .unwrap();
        assert!(rel(m, c.powf(p)) < 1e-6, "p={p}: {m}");
    }
}

#[test]
fn exponential_law() {
    for p in PS {
        let lt = |k: u32, s: f64| {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * gamma(k as f64 + 1.0).unwrap() * (1.0 + s).powi(-(k as i32) - 1)
        };
        let m = moment_from_laplace(lt, &moment_params(p, 1.0).unwrap(), S_MAX).unwrap();
        assert!(rel(m, gamma(1.0 + p).unwrap()) < 1e-6, "p={p}: {m}");
    }
}

#[test]
fn gamma_law() {
    let shape = 2.5;
    for p in PS {
        let lt = |k: u32, s: f64| {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            let rising = gamma(shape + k as f64).unwrap() / gamma(shape).unwrap();
            sign * rising * (1.0 + s).powf(-shape - k as f64)
        };
        let m = moment_from_laplace(lt, &moment_params(p, 1.0).unwrap(), S_MAX).unwrap();
        let exact = gamma(shape + p).unwrap() / gamma(shape).unwrap();
        assert!(rel(m, exact) < 1e-6, "p={p}: {m} vs {exact}");
    }
}

#[test]
fn first_moment_of_point_mass() {
    let c: f64 = 3.7;
    let m = moment_from_laplace(|k, s| (-c).powi(k as i32) * (-c * s).exp(), &moment_params(1.0, 1.0).unwrap(), S_MAX)
        .unwrap();
    assert!((m - c).abs() < 1e-8);
}

#[test]
fn constants() {
    let p = moment_params(1.0, 1.0).unwrap();
    assert!((c_constant(&p).unwrap() - 2.0).abs() < 1e-13);
    assert!((remainder_bound(&p).unwrap() - 2.0 * (-2f64).exp()).abs() < 1e-15);
    let h = moment_params(0.5, 1.0).unwrap();
    // 2·1·4^{−1/2}·Be(1/2, 1)/Γ(1/2) = 2/√π
    assert!((c_constant(&h).unwrap() - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-13);
    let bound = (-1f64).exp() / (std::f64::consts::PI.sqrt() * 1.5);
    assert!((remainder_bound(&h).unwrap() - bound).abs() < 1e-15);
    assert_eq!(remainder_bound(&moment_params(1.0, 50.0).unwrap()), remainder_bound(&p));
}

#[test]
fn routes_agree() {
    for (p, t) in [(0.5, 5.0), (1.0, 10.0), (1.5, 40.0), (2.5, 30.0), (4.0, 200.0)] {
        let params = moment_params(p, t).unwrap();
        let d = leading_term(&params, Route::Direct).unwrap();
        let s = leading_term(&params, Route::Split).unwrap();
        assert_eq!((d.sign, s.sign), (1, 1));
        assert!((d.log_mag - s.log_mag).abs() < 1e-6, "(p,t)=({p},{t})");
    }
}

#[test]
fn first_moment_is_exponential() {
    // E[X] = e^{t/3}, so the computed part may miss it by at most the remainder bound
    for t in [5.0, 10.0, 20.0] {
        let b = fractional_moment(&moment_params(1.0, t).unwrap(), 3).unwrap();
        let gap = (b.total.to_f64() - (t / 3.0).exp()).abs();
        assert!(gap <= b.remainder_bound, "t={t}: gap {gap}");
    }
}

#[test]
fn decomposition_at_t20() {
    let b = fractional_moment(&moment_params(1.0, 20.0).unwrap(), 3).unwrap();
    assert_eq!(b.total.sign, 1);
    let rate = b.total.log_mag / 20.0;
    assert!((rate / (1.0 / 3.0) - 1.0).abs() < 0.25);
    let lead = b.leading.to_f64();
    assert!((b.total.to_f64() - lead).abs() < 0.5 * lead);
}

#[test]
fn higher_term_grid_doubling() {
    let params = moment_params(1.0, 10.0).unwrap();
    let a = higher_term_with(&params, 2, 40).unwrap();
    let b = higher_term_with(&params, 2, 80).unwrap();
    assert_eq!(a.sign, b.sign);
    assert!((a.log_mag - b.log_mag).abs() < 0.05);
}

#[test]
fn windows_enforced() {
    assert!(leading_term(&moment_params(1.0, 201.0).unwrap(), Route::Split).is_err());
    assert!(leading_term(&moment_params(4.5, 1.0).unwrap(), Route::Split).is_err());
    assert!(higher_term_with(&moment_params(1.0, 31.0).unwrap(), 2, 40).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn composition_counts(l in 1usize..6, n in 0u32..6) {
        let c = compositions(l, n).unwrap();
        let binom = |a: u64, b: u64| (1..=b).fold(1u64, |acc, k| acc * (a - b + k) / k);
        prop_assert_eq!(c.len() as u64, binom(n as u64 + l as u64 - 1, l as u64 - 1));
        prop_assert!(c.len() as u64 <= (l as u64).pow(n).max(1));
        prop_assert!(c.iter().all(|c| c.parts.iter().sum::<u32>() == n));
    }

    #[test]
    fn leibniz_identity(s in 0.05f64..2.0, t in 0.5f64..8.0, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
        let prod = |s: f64| phi(0, s, t, x1).unwrap() * phi(0, s, t, x2).unwrap();
        let h = 1e-3 * s;
        let fd = (prod(s + h) - 2.0 * prod(s) + prod(s - h)) / (h * h);
        let exact = product_derivative(2, s, t, &[x1, x2]).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1e-8), "{} vs {}", fd, exact);
    }
}
