//! Fractional moments E[Z^p e^{pt/12}] of the half-line SHE with Brownian
//! initial data: the decomposition A_p + Σ_L B_{p,L} + R_p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm_pfaffian::{
    factorial, ln_double_factorial, phi_unchecked, series_terms, softplus, FredholmContext, PANEL_NODES,
};
use crate::goe_kernel::{k12_diag_log, k12_diag_plain};
use crate::quadrature::{
    gauss_legendre, graded_edges, integrate, integrate_log_domain, integrate_power_singularity_graded,
    LogAccumulator, LogValue, QuadratureGrid,
};
use crate::special_functions::{gamma, gamma_beta, ln_gamma, AIRY_WINDOW};

pub const MAX_P: f64 = 4.0;
pub const MAX_T_LEADING: f64 = 200.0;
pub const MAX_T_HIGHER: f64 = 30.0;
pub const MAX_COMPOSITIONS: usize = 1_000_000;

/// Default node count for the B_{p,L} tensor grid.
pub const DEFAULT_B_NODES: usize = 80;

/// Log-profile drop that ends the x-range of A_p.
const PROFILE_DROP: f64 = 45.0;

const X_NODES: usize = 20;
const S_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentParams {
    pub p: f64,
    pub n: u32,
    pub alpha: f64,
    pub t: f64,
}

impl MomentParams {
    /// t^{1/3}
    pub fn t_third(&self) -> f64 {
        self.t.cbrt()
    }

    /// (2n + 1)/2
    fn beta(&self) -> f64 {
        self.n as f64 + 0.5
    }
}

/// n = ⌊p⌋ + 1, α = p + 1 − n. Integer p gives α = 0.
pub fn moment_params(p: f64, t: f64) -> Result<MomentParams> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("p = {p} must be positive")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    let n = p.floor() + 1.0;
    if n > 28.0 {
        return Err(Error::Range { what: "p", value: p, lo: 0.0, hi: 27.0 });
    }
    Ok(MomentParams { p, n: n as u32, alpha: p + 1.0 - n, t })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub parts: Vec<u32>,
    pub n: u32,
}

impl Composition {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// n! / ∏ m_i!
    pub fn multinomial(&self) -> f64 {
        self.parts.iter().fold(factorial(self.n as usize), |acc, &m| acc / factorial(m as usize))
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All (m_1, …, m_L) with Σ m_i = n, in lexicographic order.
pub fn compositions(l: usize, n: u32) -> Result<Vec<Composition>> {
    if l == 0 {
        return Err(Error::domain("composition length must be at least 1"));
    }
    let count = binomial(n as u64 + l as u64 - 1, l as u64 - 1);
    if count > MAX_COMPOSITIONS as f64 {
        return Err(Error::Range {
            what: "composition count",
            value: count,
            lo: 0.0,
            hi: MAX_COMPOSITIONS as f64,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = Vec::with_capacity(l);
    fn rec(l: usize, left: u32, n: u32, cur: &mut Vec<u32>, out: &mut Vec<Composition>) {
        if cur.len() + 1 == l {
            cur.push(left);
            out.push(Composition { parts: cur.clone(), n });
            cur.pop();
            return;
        }
        for m in 0..=left {
            cur.push(m);
            rec(l, left - m, n, cur, out);
            cur.pop();
        }
    }
    rec(l, n, n, &mut cur, &mut out);
    Ok(out)
}

/// ∂ⁿ_s ∏_i φ_{s,t}(x_i) by the Leibniz expansion over compositions.
pub fn product_derivative(n: u32, s: f64, t: f64, xs: &[f64]) -> Result<f64> {
    crate::fredholm_pfaffian::FermiFactor::new(s, t, n)?;
    let comps = compositions(xs.len(), n)?;
    Ok(comps
        .iter()
        .map(|c| {
            c.multinomial()
                * c.parts
                    .iter()
                    .zip(xs)
                    .map(|(&m, &x)| phi_unchecked(m, s, t, x))
                    .product::<f64>()
        })
        .sum())
}

/// c_p = 2ⁿ(2n−1)!!·4^{α−1}·Be(1−α, (2n−1)/2 + α)/Γ(1−α).
pub fn c_constant(params: &MomentParams) -> Result<f64> {
    Ok(ln_c_constant(params)?.exp())
}

fn ln_c_constant(params: &MomentParams) -> Result<f64> {
    let n = params.n as f64;
    let a = params.alpha;
    let (_, be) = gamma_beta(1.0 - a, (2.0 * n - 1.0) / 2.0 + a)?;
    Ok(n * std::f64::consts::LN_2 + ln_double_factorial(params.n) + (a - 1.0) * 4f64.ln() + be.ln()
        - ln_gamma(1.0 - a)?)
}

/// ln of 2ⁿ(2n−1)!!/Γ(1−α), the prefactor of A_p after pulling out (−1)ⁿ.
fn ln_prefactor(params: &MomentParams) -> Result<f64> {
    Ok(params.n as f64 * std::f64::consts::LN_2 + ln_double_factorial(params.n) - ln_gamma(1.0 - params.alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    Direct,
    Split,
}

fn check_leading(params: &MomentParams) -> Result<()> {
    if params.p > MAX_P {
        return Err(Error::Range { what: "p", value: params.p, lo: 0.0, hi: MAX_P });
    }
    if params.t > MAX_T_LEADING {
        return Err(Error::Range { what: "t", value: params.t, lo: 0.0, hi: MAX_T_LEADING });
    }
    Ok(())
}

/// ln K₁₂(x, x); plain evaluation left of 0, scaled Airy values right of it.
/// Below the Airy window the leading density √|x|/π stands in.
fn ln_k12_diag(x: f64) -> Result<f64> {
    if x >= 0.0 {
        k12_diag_log(x)?.ln()
    } else if x >= AIRY_WINDOW.0 {
        let v = k12_diag_plain(x)?;
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::numeric("leading term", format!("K12({x},{x}) = {v} is not positive")))
        }
    } else {
        Ok(0.5 * (-x).ln() - std::f64::consts::PI.ln())
    }
}

/// End of the x-range: where ln K₁₂(x,x) + pt^{1/3}x falls 45 below its peak.
fn x_upper(params: &MomentParams) -> Result<f64> {
    let pt = params.p * params.t_third();
    let profile = |x: f64| -> Result<f64> { Ok(ln_k12_diag(x)? + pt * x) };
    // K₁₂(x,x) ~ Ai(x)/2 for large x, so the profile peaks near (pT)²
    let x_peak = pt * pt;
    let peak = profile(x_peak)?.max(profile(0.25 * x_peak)?).max(profile(0.0)?);
    let mut x = x_peak.max(1.0);
    while profile(x)? > peak - PROFILE_DROP {
        x += 1.0;
    }
    Ok(x)
}

/// Log-domain ∫ over x of exp(ln K₁₂(x,x) + h(x)) from −∞ to the upper
/// cut, with the piece below the Airy window closed by √|x|/π.
fn x_integral<H: Fn(f64) -> Result<f64>>(params: &MomentParams, h: H) -> Result<LogValue> {
    let hi = x_upper(params)?;
    let lo = AIRY_WINDOW.0;
    let panels = (hi - lo).ceil() as usize;
    let grid = QuadratureGrid::composite(lo, hi, panels, X_NODES)?;
    let pt = params.p * params.t_third();
    let closure_span = (PROFILE_DROP / pt).min(1e4);
    let cpanels = (closure_span.ceil() as usize).clamp(1, 500);
    let closure = QuadratureGrid::composite(lo - closure_span, lo, cpanels, X_NODES)?;
    let sum = |g: &QuadratureGrid| -> Result<LogValue> {
        let mut acc = LogAccumulator::new();
        for (&x, &w) in g.nodes.iter().zip(&g.weights) {
            let v = ln_k12_diag(x)? + h(x)?;
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonFinite { x });
            }
            acc.push(LogValue::from_ln(v + w.ln()));
        }
        Ok(acc.total())
    };
    let main = sum(&grid)?;
    let tail = sum(&closure)?;
    Ok(main + tail)
}

/// ln ∫_0^γ u^{−α}(1+u)^{−β} du, for γ given by its log.
fn ln_incomplete_beta(ln_g: f64, alpha: f64, beta: f64) -> Result<f64> {
    let ln_a = ln_g.min(0.0);
    let a = ln_a.exp();
    let head = integrate_power_singularity_graded(|v| (1.0 + a * v).powf(-beta), alpha, S_NODES, 1e-10)?;
    let mut total = LogValue::from_ln((1.0 - alpha) * ln_a + head.ln());
    if ln_g > 0.0 {
        let v_hi = ln_g.min(200.0);
        let body = integrate(|v| ((1.0 - alpha) * v - beta * softplus(v)).exp(), (0.0, v_hi), X_NODES)?;
        total = total + LogValue::from_f64(body);
    }
    total.ln()
}

/// ln ∫_1^∞ s^{−α}(1+γs)^{−β} ds via s = e^v.
fn ln_upper_s_integral(ln_g: f64, alpha: f64, beta: f64) -> Result<f64> {
    let rate = alpha + beta - 1.0;
    let v_hi = (-ln_g).max(0.0) + 2.0 * PROFILE_DROP / rate;
    integrate_log_domain(
        |v| LogValue::from_ln((1.0 - alpha) * v - beta * softplus(ln_g + v)),
        (0.0, v_hi),
        X_NODES,
    )?
    .ln()
}

/// A_p(t) = (−1)ⁿ/Γ(1−α) ∫_0^1 s^{−α} ∫ K₁₂(x,x) φ⁽ⁿ⁾_{s,t}(x) dx ds.
pub fn leading_term(params: &MomentParams, route: Route) -> Result<LogValue> {
    check_leading(params)?;
    let (tt, a, b) = (params.t_third(), params.alpha, params.beta());
    let ln4 = 4f64.ln();
    match route {
        Route::Direct => {
            // inner s-integral = γ^{α−1} ∫_0^γ u^{−α}(1+u)^{−β} du with γ = 4e^{Tx}
            let c0 = ln_prefactor(params)? + (a - 1.0) * ln4;
            let v = x_integral(params, |x| {
                Ok(params.p * tt * x + ln_incomplete_beta(ln4 + tt * x, a, b)?)
            })?;
            Ok(v * LogValue::from_ln(c0))
        }
        Route::Split => {
            let first = x_integral(params, |x| Ok(params.p * tt * x))? * LogValue::from_ln(ln_c_constant(params)?);
            let second = x_integral(params, |x| {
                Ok(params.n as f64 * tt * x + ln_upper_s_integral(ln4 + tt * x, a, b)?)
            })? * LogValue::from_ln(ln_prefactor(params)?);
            Ok(first - second)
        }
    }
}

/// x-window of the tensor grid for B_{p,L}.
pub fn b_window(params: &MomentParams) -> (f64, f64) {
    (-8.0, 8.0f64.max(8.0 + 0.5 * params.p * params.p * params.t.powf(2.0 / 3.0)))
}

/// B_{p,L}(t) on the default tensor grid.
pub fn higher_term(params: &MomentParams, l: usize) -> Result<LogValue> {
    higher_term_with(params, l, DEFAULT_B_NODES)
}

/// B_{p,L}(t) on a tensor grid of `m` nodes (a multiple of 10).
pub fn higher_term_with(params: &MomentParams, l: usize, m: usize) -> Result<LogValue> {
    if !(2..=3).contains(&l) {
        return Err(Error::Range { what: "L", value: l as f64, lo: 2.0, hi: 3.0 });
    }
    if params.t > MAX_T_HIGHER {
        return Err(Error::Range { what: "t", value: params.t, lo: 0.0, hi: MAX_T_HIGHER });
    }
    if params.p > MAX_P {
        return Err(Error::Range { what: "p", value: params.p, lo: 0.0, hi: MAX_P });
    }
    if !m.is_multiple_of(PANEL_NODES) {
        return Err(Error::Config(format!("m = {m} must be a multiple of {PANEL_NODES}")));
    }
    let ctx = FredholmContext::new(b_window(params), m, l)?;
    let (n, a, t) = (params.n, params.alpha, params.t);
    let comps = compositions(l, n)?;
    let coef: Vec<f64> = comps.iter().map(Composition::multinomial).collect();
    // s-nodes: s = u^{1/(1−α)} on graded u-panels reaching below the smallest feature
    let s_min = 1e-3 * 0.25 * (-params.t_third() * ctx.window().1).exp();
    let u_min = s_min.powf(1.0 - a);
    let e = 1.0 / (1.0 - a);
    let rule = gauss_legendre(S_NODES)?;
    let mut acc = 0.0;
    for (lo, hi) in graded_edges(u_min) {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (un, uw) in rule.nodes.iter().zip(&rule.weights) {
            let s = (c + r * un).powf(e);
            let tab: Vec<Vec<f64>> = (0..=n)
                .map(|k| ctx.grid.nodes.iter().map(|&x| phi_unchecked(k, s, t, x)).collect())
                .collect();
            let g = match l {
                2 => {
                    let d = |i: usize, j: usize| -> f64 {
                        comps
                            .iter()
                            .zip(&coef)
                            .map(|(cp, c)| c * tab[cp.parts[0] as usize][i] * tab[cp.parts[1] as usize][j])
                            .sum()
                    };
                    series_terms(&ctx, |_| 0.0, d, |_, _, _| 0.0)?[1]
                }
                _ => {
                    let d = |i: usize, j: usize, k: usize| -> f64 {
                        comps
                            .iter()
                            .zip(&coef)
                            .map(|(cp, c)| {
                                c * tab[cp.parts[0] as usize][i]
                                    * tab[cp.parts[1] as usize][j]
                                    * tab[cp.parts[2] as usize][k]
                            })
                            .sum()
                    };
                    series_terms(&ctx, |_| 0.0, |_, _| 0.0, d)?[2]
                }
            };
            acc += e * r * uw * g;
        }
    }
    if !acc.is_finite() {
        return Err(Error::numeric("higher term", "non-finite tensor sum"));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(LogValue::from_f64(sign * acc / (gamma(1.0 - a)? * factorial(l))))
}

/// nⁿe^{−n}/(Γ(1−α)(n+α)), a t-uniform bound on |R_p(t)|.
pub fn remainder_bound(params: &MomentParams) -> Result<f64> {
    let n = params.n as f64;
    Ok((n * n.ln() - n - ln_gamma(1.0 - params.alpha)?).exp() / (n + params.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBreakdown {
    pub leading: LogValue,
    pub higher: Vec<LogValue>,
    /// Half-width of the uncertainty interval around `total`.
    pub remainder_bound: f64,
    /// leading + Σ higher, without the remainder.
    pub total: LogValue,
}

/// A_p + Σ_{L=2}^{L_max} B_{p,L}, with R_p reported as a bound.
pub fn fractional_moment(params: &MomentParams, l_max: usize) -> Result<MomentBreakdown> {
    fractional_moment_with(params, l_max, DEFAULT_B_NODES)
}

/// As [`fractional_moment`] with `m` x-nodes per axis in the B_{p,L} tensors.
pub fn fractional_moment_with(params: &MomentParams, l_max: usize, m: usize) -> Result<MomentBreakdown> {
    if !(1..=3).contains(&l_max) {
        return Err(Error::Range { what: "L_max", value: l_max as f64, lo: 1.0, hi: 3.0 });
    }
    let leading = leading_term(params, Route::Split)?;
    let higher: Vec<LogValue> = (2..=l_max).map(|l| higher_term_with(params, l, m)).collect::<Result<_>>()?;
    let total = higher.iter().fold(leading, |acc, b| acc + *b);
    Ok(MomentBreakdown { leading, higher, remainder_bound: remainder_bound(params)?, total })
}

/// E[X^p] = (−1)ⁿ/Γ(1−α) ∫_0^∞ s^{−α} ∂ⁿ_s E[e^{−sX}] ds, with
/// `laplace(k, s)` returning the k-th s-derivative. The integral is split at
/// s = 1 and the tail is taken over s = e^v up to `s_max`.
pub fn moment_from_laplace<F: Fn(u32, f64) -> f64>(laplace: F, params: &MomentParams, s_max: f64) -> Result<f64> {
    if !(s_max > 1.0) {
        return Err(Error::domain(format!("s_max = {s_max} must exceed 1")));
    }
    let (n, a) = (params.n, params.alpha);
    let head = integrate_power_singularity_graded(|s| laplace(n, s), a, X_NODES, 1e-8)?;
    let tail = integrate(|v| v.exp().powf(1.0 - a) * laplace(n, v.exp()), (0.0, s_max.ln()), X_NODES)?;
    if !head.is_finite() {
        return Err(Error::NonFinite { x: 0.0 });
    }
    if !tail.is_finite() {
        return Err(Error::NonFinite { x: s_max });
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * (head + tail) / gamma(1.0 - a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_examples() {
        let p = moment_params(1.0, 1.0).unwrap();
        assert_eq!((p.n, p.alpha), (2, 0.0));
        let p = moment_params(1.5, 1.0).unwrap();
        assert_eq!((p.n, p.alpha), (2, 0.5));
        let p = moment_params(0.25, 1.0).unwrap();
        assert_eq!((p.n, p.alpha), (1, 0.25));
        assert!(moment_params(0.0, 1.0).is_err());
    }

    #[test]
    fn composition_examples() {
        let c = compositions(2, 2).unwrap();
        let parts: Vec<Vec<u32>> = c.iter().map(|c| c.parts.clone()).collect();
        assert_eq!(parts, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(compositions(5, 4).unwrap().len(), 70);
        assert_eq!(c[1].multinomial(), 2.0);
        assert!(compositions(40, 40).is_err());
    }

    #[test]
    fn constants() {
        let p1 = moment_params(1.0, 1.0).unwrap();
        assert!((c_constant(&p1).unwrap() - 2.0).abs() < 1e-13);
        assert!((remainder_bound(&p1).unwrap() - 2.0 * (-2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_limits() {
        let (a, b) = (0.3, 2.5);
        let full = gamma_beta(1.0 - a, b + a - 1.0).unwrap().1;
        assert!((ln_incomplete_beta(300.0, a, b).unwrap() - full.ln()).abs() < 1e-10);
        let small = ln_incomplete_beta(-40.0, a, b).unwrap();
        assert!((small - ((1.0 - a) * -40.0 - (1.0 - a).ln())).abs() < 1e-10);
    }

    #[test]
    fn leading_routes_agree() {
        let p = moment_params(1.0, 10.0).unwrap();
        let d = leading_term(&p, Route::Direct).unwrap();
        let s = leading_term(&p, Route::Split).unwrap();
        assert_eq!(d.sign, 1);
        assert!((d.log_mag - s.log_mag).abs() < 1e-6);
    }
}
