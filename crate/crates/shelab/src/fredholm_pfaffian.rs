//! Fredholm Pfaffians of the GOE-Airy kernel: Fermi factor, series and
//! determinant routes, the half-line SHE Laplace transform and F_GOE.
//!
//! Both routes discretize on composite Gauss panels. The discontinuous
//! −sgn(x−y)/4 part of K₂₂ is integrated with product weights
//! `S_ij = ∫ sgn(x_i − y) ℓ_j(y) dy` (ℓ_j the panel Lagrange basis), which
//! keeps the convergence spectral.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antisym_linalg::{determinant, pfaffian_small, sqrt_continued, SquareMatrix};
use crate::error::{Error, Result};
use crate::goe_kernel::{KernelBlocks, DEFAULT_WINDOW};
use crate::quadrature::{gauss_legendre, LogValue, QuadratureGrid};
use crate::special_functions::double_factorial;

/// Gauss nodes per panel of a Fredholm grid.
pub const PANEL_NODES: usize = 10;

/// Default node count of a Fredholm grid.
pub const DEFAULT_M: usize = 80;

/// Default series truncation.
pub const DEFAULT_L_MAX: usize = 3;

/// Largest series order supported by the tensor route.
pub const MAX_SERIES_ORDER: usize = 3;

/// Halving depth allowed when refining a continuation path.
pub const MAX_REFINEMENTS: usize = 20;

/// Fermi factor φ_{s,t}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiFactor {
    pub s: f64,
    pub t: f64,
    pub k: u32,
}

impl FermiFactor {
    pub fn new(s: f64, t: f64, k: u32) -> Result<Self> {
        check_st(s, t)?;
        Ok(FermiFactor { s, t, k })
    }

    pub fn eval(&self, x: f64) -> f64 {
        phi_unchecked(self.k, self.s, self.t, x)
    }
}

fn check_st(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("s = {s} must be a finite non-negative number")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    Ok(())
}

/// ln(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// φ^{(k)}_{s,t}(x), the k-th s-derivative of 1/√(1 + 4s e^{t^{1/3}x}) − 1.
pub fn phi(k: u32, s: f64, t: f64, x: f64) -> Result<f64> {
    check_st(s, t)?;
    double_factorial(k)?;
    Ok(phi_unchecked(k, s, t, x))
}

pub(crate) fn phi_unchecked(k: u32, s: f64, t: f64, x: f64) -> f64 {
    let tx = t.cbrt() * x;
    if k == 0 {
        if s == 0.0 {
            return 0.0;
        }
        let g = 4.0 * s * tx.exp();
        if g.is_infinite() {
            return -1.0;
        }
        let r = (1.0 + g).sqrt();
        return -g / (r * (1.0 + r));
    }
    let lead = (k as f64) * std::f64::consts::LN_2 + ln_double_factorial(k);
    let damp = if s == 0.0 { 0.0 } else { softplus((4.0 * s).ln() + tx) };
    let mag = (lead + k as f64 * tx - (k as f64 + 0.5) * damp).exp();
    if k.is_multiple_of(2) {
        mag
    } else {
        -mag
    }
}

pub(crate) fn ln_double_factorial(k: u32) -> f64 {
    (1..=k).map(|j| f64::from(2 * j - 1).ln()).sum()
}

/// Discretization shared by both Fredholm routes.
#[derive(Debug)]
pub struct FredholmContext {
    pub grid: QuadratureGrid,
    pub l_max: usize,
    pub j_block: [[f64; 2]; 2],
    panels: usize,
    sgn_weights: Vec<f64>,
    kernel: OnceLock<Result<KernelBlocks>>,
    tensors: OnceLock<Result<Tensors>>,
}

impl FredholmContext {
    /// Composite grid of `m` nodes (a multiple of 10) on `window`.
    pub fn new(window: (f64, f64), m: usize, l_max: usize) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(PANEL_NODES) {
            return Err(Error::Config(format!("m = {m} must be a positive multiple of {PANEL_NODES}")));
        }
        if l_max == 0 {
            return Err(Error::Config("L_max must be at least 1".into()));
        }
        let panels = m / PANEL_NODES;
        let grid = QuadratureGrid::composite(window.0, window.1, panels, PANEL_NODES)?;
        let sgn_weights = sgn_integration_matrix(&grid, panels)?;
        Ok(FredholmContext {
            grid,
            l_max,
            j_block: [[0.0, 1.0], [-1.0, 0.0]],
            panels,
            sgn_weights,
            kernel: OnceLock::new(),
            tensors: OnceLock::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.grid.m
    }

    pub fn window(&self) -> (f64, f64) {
        self.grid.window
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Same grid layout on another window.
    pub fn with_window(&self, window: (f64, f64)) -> Result<Self> {
        Self::new(window, self.m(), self.l_max)
    }

    /// `S_ij = ∫ sgn(x_i − y) ℓ_j(y) dy`, row-major.
    pub fn sgn_weights(&self) -> &[f64] {
        &self.sgn_weights
    }

    pub fn kernel(&self) -> Result<&KernelBlocks> {
        self.kernel
            .get_or_init(|| KernelBlocks::new(&self.grid.nodes))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn tensors(&self) -> Result<&Tensors> {
        self.tensors
            .get_or_init(|| Tensors::build(self))
            .as_ref()
            .map_err(Clone::clone)
    }
}

impl Default for FredholmContext {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW, DEFAULT_M, DEFAULT_L_MAX).expect("default context is valid")
    }
}

/// Legendre values P_0..P_{n} at u.
fn legendre_values(u: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = u;
    }
    for d in 2..=n {
        let df = d as f64;
        p[d] = ((2.0 * df - 1.0) * u * p[d - 1] - (df - 1.0) * p[d - 2]) / df;
    }
    p
}

fn sgn_integration_matrix(grid: &QuadratureGrid, panels: usize) -> Result<Vec<f64>> {
    let k = PANEL_NODES;
    let rule = gauss_legendre(k)?;
    let (u, w) = (&rule.nodes, &rule.weights);
    // q[a][b] = ∫_{-1}^{u_a} ℓ_b on the reference panel
    let pv: Vec<Vec<f64>> = u.iter().map(|&x| legendre_values(x, k)).collect();
    let mut q = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let mut acc = 0.5 * (u[a] + 1.0);
            for d in 1..k {
                acc += 0.5 * pv[b][d] * (pv[a][d + 1] - pv[a][d - 1]);
            }
            q[a][b] = w[b] * acc;
        }
    }
    let m = grid.m;
    let mut s = vec![0.0; m * m];
    for p in 0..panels {
        for (a, qa) in q.iter().enumerate() {
            let i = p * k + a;
            for j in 0..m {
                let pj = j / k;
                s[i * m + j] = if pj == p {
                    let h = 0.5 * (grid.window.1 - grid.window.0) / panels as f64;
                    2.0 * h * qa[j % k] - grid.weights[j]
                } else if pj < p {
                    grid.weights[j]
                } else {
                    -grid.weights[j]
                };
            }
        }
    }
    Ok(s)
}

fn f_at_nodes<F: Fn(f64) -> f64>(f: &F, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    grid.nodes
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { x })
            }
        })
        .collect()
}

/// det(I − J·K_w) for weights `fx` at the nodes.
fn fredholm_matrix_det(ctx: &FredholmContext, fx: &[f64]) -> Result<LogValue> {
    let kb = ctx.kernel()?;
    let m = ctx.m();
    let n = 2 * m;
    let w = &ctx.grid.weights;
    let s = ctx.sgn_weights();
    let mut a = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..m {
            let (wf, f) = (w[j] * fx[j], fx[j]);
            let k11 = kb.k11(i, j) * wf;
            let k12 = kb.k12(i, j) * wf;
            let k21 = kb.k21(i, j) * wf;
            let k22 = kb.k22_smooth(i, j) * wf - 0.25 * s[i * m + j] * f;
            // rows of J·K: (J K)(2i,·) = K(2i+1,·), (J K)(2i+1,·) = −K(2i,·)
            a[(2 * i) * n + 2 * j] = -k21;
            a[(2 * i) * n + 2 * j + 1] = -k22;
            a[(2 * i + 1) * n + 2 * j] = k11;
            a[(2 * i + 1) * n + 2 * j + 1] = k12;
        }
    }
    for d in 0..n {
        a[d * n + d] += 1.0;
    }
    determinant(&SquareMatrix { dim: n, data: a })
}

/// Runs `eval` along `path`, inserting midpoints where the square-root
/// continuation is ambiguous. Returns the continued root at the last point.
fn continue_along<E: Fn(f64) -> Result<LogValue>>(eval: E, path: &[f64]) -> Result<LogValue> {
    let mut params = path.to_vec();
    let mut values: Vec<LogValue> = params.iter().map(|&p| eval(p)).collect::<Result<_>>()?;
    for _ in 0..=MAX_REFINEMENTS * path.len() {
        match sqrt_continued(&values) {
            Ok(roots) => return Ok(*roots.last().expect("non-empty path")),
            Err(Error::RefinePath { index }) => {
                let (a, b) = (params[index - 1], params[index]);
                let mid = 0.5 * (a + b);
                if (b - a).abs() <= f64::EPSILON * b.abs().max(1.0) * 4.0 {
                    return Err(Error::numeric("sign continuation", format!("path cannot be refined near {b}")));
                }
                params.insert(index, mid);
                values.insert(index, eval(mid)?);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::numeric("sign continuation", "refinement budget exhausted"))
}

/// Uniform scaling path 0, 1/4, …, 1.
pub fn default_path() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

/// Fredholm Pfaffian Pf(J + K) on L²(f dx) by the determinant route: the sign-continued
/// square root of det(I − J·K_w) along the scalings `path` of `f`, which must
/// run from 0 to 1.
pub fn fredholm_det<F: Fn(f64) -> f64>(f: F, ctx: &FredholmContext, path: &[f64]) -> Result<f64> {
    if path.len() < 2 || path[0] != 0.0 || *path.last().unwrap_or(&0.0) != 1.0 {
        return Err(Error::domain("scaling path must run from 0 to 1"));
    }
    let fx = f_at_nodes(&f, &ctx.grid)?;
    let root = continue_along(
        |lam| {
            let scaled: Vec<f64> = fx.iter().map(|v| lam * v).collect();
            fredholm_matrix_det(ctx, &scaled)
        },
        path,
    )?;
    Ok(root.to_f64())
}

/// Correlation tensors with the sgn part integrated by product weights,
/// summed over orderings: for each set i < j (< k), the weight such that
/// Σ_{ordered tuples} ρ_L ∏w · W = Σ_{sets} R · W for symmetric W.
#[derive(Debug)]
struct Tensors {
    r1: Vec<f64>,
    r2: Vec<(u32, u32, f64)>,
    r3: Vec<(u32, u32, u32, f64)>,
}

impl Tensors {
    fn build(ctx: &FredholmContext) -> Result<Self> {
        let kb = ctx.kernel()?;
        let m = ctx.m();
        let w = &ctx.grid.weights;
        let s = ctx.sgn_weights();
        let r1: Vec<f64> = (0..m).map(|i| kb.k12(i, i) * w[i]).collect();
        // pair term: C_uv (−1/4)(S[u,v] w_u − S[v,u] w_v)
        let pair = |u: usize, v: usize| -0.25 * (s[u * m + v] * w[u] - s[v * m + u] * w[v]);
        let r2: Vec<(u32, u32, f64)> = if ctx.l_max >= 2 {
            (0..m)
                .into_par_iter()
                .flat_map_iter(|i| {
                    (i + 1..m).map(move |j| {
                        let a = block_matrix(kb, &[i, j]);
                        let p0 = pfaffian_small(&a, 4);
                        let c = -kb.k11(i, j);
                        (i as u32, j as u32, 2.0 * p0 * w[i] * w[j] + c * pair(i, j))
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        let r3: Vec<(u32, u32, u32, f64)> = if ctx.l_max >= 3 {
            (0..m)
                .into_par_iter()
                .flat_map_iter(|i| {
                    (i + 1..m).flat_map(move |j| {
                        (j + 1..m).map(move |k| {
                            let a = block_matrix(kb, &[i, j, k]);
                            let p0 = pfaffian_small(&a, 6);
                            let minor = |r: [usize; 4]| {
                                let g = |x: usize, y: usize| a[r[x] * 6 + r[y]];
                                g(0, 1) * g(2, 3) - g(0, 2) * g(1, 3) + g(0, 3) * g(1, 2)
                            };
                            let c_ij = -minor([0, 2, 4, 5]);
                            let c_ik = -minor([0, 2, 3, 4]);
                            let c_jk = -minor([0, 1, 2, 4]);
                            let v = 6.0 * p0 * w[i] * w[j] * w[k]
                                + 3.0
                                    * (c_ij * pair(i, j) * w[k]
                                        + c_ik * pair(i, k) * w[j]
                                        + c_jk * pair(j, k) * w[i]);
                            (i as u32, j as u32, k as u32, v)
                        })
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Tensors { r1, r2, r3 })
    }
}

/// Smooth part of D (K₂₂ without sgn) at the node indices `idx`.
fn block_matrix(kb: &KernelBlocks, idx: &[usize]) -> Vec<f64> {
    let n = 2 * idx.len();
    let mut a = vec![0.0; n * n];
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            a[(2 * p) * n + 2 * q] = kb.k11(i, j);
            a[(2 * p) * n + 2 * q + 1] = kb.k12(i, j);
            a[(2 * p + 1) * n + 2 * q] = kb.k21(i, j);
            a[(2 * p + 1) * n + 2 * q + 1] = kb.k22_smooth(i, j);
        }
    }
    a
}

/// Order-by-order sums Σ_{sets} R_L · W for L = 1..=l_max.
pub(crate) fn series_terms<W1, W2, W3>(ctx: &FredholmContext, w1: W1, w2: W2, w3: W3) -> Result<Vec<f64>>
where
    W1: Fn(usize) -> f64 + Sync,
    W2: Fn(usize, usize) -> f64 + Sync,
    W3: Fn(usize, usize, usize) -> f64 + Sync,
{
    let t = ctx.tensors()?;
    let mut out = vec![t.r1.iter().enumerate().map(|(i, r)| r * w1(i)).sum::<f64>()];
    if ctx.l_max >= 2 {
        out.push(ordered_sum(&t.r2, |&(i, j, r)| r * w2(i as usize, j as usize)));
    }
    if ctx.l_max >= 3 {
        out.push(ordered_sum(&t.r3, |&(i, j, k, r)| r * w3(i as usize, j as usize, k as usize)));
    }
    Ok(out)
}

/// Parallel sum with a fixed chunking and left-to-right reduction.
fn ordered_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = items
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(&f).sum::<f64>())
        .collect();
    parts.iter().sum()
}

/// Truncated Fredholm Pfaffian series 1 + Σ_{L ≤ L_max} (1/L!) Σ ρ_L ∏ w f.
pub fn fredholm_series<F: Fn(f64) -> f64>(f: F, ctx: &FredholmContext) -> Result<f64> {
    Ok(fredholm_series_terms(f, ctx)?.iter().sum::<f64>() + 1.0)
}

/// The individual terms (1/L!) Σ ρ_L ∏ w f, L = 1..=L_max.
pub fn fredholm_series_terms<F: Fn(f64) -> f64>(f: F, ctx: &FredholmContext) -> Result<Vec<f64>> {
    if ctx.l_max > MAX_SERIES_ORDER {
        return Err(Error::Range {
            what: "L_max",
            value: ctx.l_max as f64,
            lo: 1.0,
            hi: MAX_SERIES_ORDER as f64,
        });
    }
    let fx = f_at_nodes(&f, &ctx.grid)?;
    let raw = series_terms(ctx, |i| fx[i], |i, j| fx[i] * fx[j], |i, j, k| fx[i] * fx[j] * fx[k])?;
    Ok(raw
        .iter()
        .enumerate()
        .map(|(l, v)| v / factorial(l + 1))
        .collect())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// E[exp(−s·Z(2t,0)e^{t/12})] = Pf(J + K) on L²(φ_{s,t} dx), by the determinant route
/// with continuation in s along s·2^{−j}.
pub fn laplace_transform(s: f64, t: f64, ctx: &FredholmContext) -> Result<f64> {
    check_st(s, t)?;
    if s == 0.0 {
        return Ok(1.0);
    }
    let mut path = vec![0.0];
    path.extend((0..=10).rev().map(|j| s * 0.5f64.powi(j)));
    let root = continue_along(
        |sv| {
            let fx: Vec<f64> = ctx.grid.nodes.iter().map(|&x| phi_unchecked(0, sv, t, x)).collect();
            fredholm_matrix_det(ctx, &fx)
        },
        &path,
    )?;
    Ok(root.to_f64())
}

/// F_GOE(s0) = P(a₁ ≤ s0), the Fredholm Pfaffian of −𝟙_{(s0, ∞)}.
pub fn goe_cdf(s0: f64, ctx: &FredholmContext) -> Result<f64> {
    let hi = if ctx.window().1 >= s0 + 6.0 { ctx.window().1 } else { s0 + 8.0 };
    if !(s0 >= crate::special_functions::AIRY_WINDOW.0 && hi <= crate::special_functions::AIRY_WINDOW.1) {
        return Err(Error::Range {
            what: "s0",
            value: s0,
            lo: crate::special_functions::AIRY_WINDOW.0,
            hi: crate::special_functions::AIRY_WINDOW.1 - 8.0,
        });
    }
    let sub = ctx.with_window((s0, hi))?;
    let path: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    fredholm_det(|_| -1.0, &sub, &path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0, 0.0, 3.0, 1.7).unwrap(), 0.0);
        // 4 s e^{x} = 3 at t = 1
        let x = (3.0f64 / (4.0 * 0.2)).ln();
        assert!((phi(0, 0.2, 1.0, x).unwrap() + 0.5).abs() < 1e-15);
        let (s, t, x) = (0.3, 5.0, 1.0);
        let h = 1e-5;
        let fd = (phi(0, s + h, t, x).unwrap() - phi(0, s - h, t, x).unwrap()) / (2.0 * h);
        let d1 = phi(1, s, t, x).unwrap();
        assert!((fd / d1 - 1.0).abs() < 1e-6);
        assert!(phi(0, -1.0, 1.0, 0.0).is_err());
        assert!(phi(0, 0.5, 1.0, 600.0).unwrap() >= -1.0);
    }

    #[test]
    fn sgn_weights_integrate_exactly() {
        let ctx = FredholmContext::new((-2.0, 3.0), 30, 1).unwrap();
        let s = ctx.sgn_weights();
        let m = ctx.m();
        // ∫ sgn(x - y) y^3 dy over [-2, 3] for polynomial degree < 10
        for i in 0..m {
            let x = ctx.grid.nodes[i];
            let approx: f64 = (0..m).map(|j| s[i * m + j] * ctx.grid.nodes[j].powi(3)).sum();
            let exact = (x.powi(4) - 16.0) / 4.0 - (81.0 - x.powi(4)) / 4.0;
            assert!((approx - exact).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn trivial_weights() {
        let ctx = FredholmContext::new((-8.0, 8.0), 40, 3).unwrap();
        assert_eq!(fredholm_series(|_| 0.0, &ctx).unwrap(), 1.0);
        assert!((fredholm_det(|_| 0.0, &ctx, &default_path()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(laplace_transform(0.0, 2.0, &ctx).unwrap(), 1.0);
        assert!(FredholmContext::new((-1.0, 1.0), 35, 3).is_err());
    }

    #[test]
    fn first_order_series_is_trace() {
        let ctx = FredholmContext::new((-8.0, 8.0), 40, 1).unwrap();
        let f = |x: f64| -0.1 * (-x * x).exp();
        let v = fredholm_series(f, &ctx).unwrap();
        let kb = ctx.kernel().unwrap();
        let tr: f64 = (0..ctx.m()).map(|i| kb.k12(i, i) * ctx.grid.weights[i] * f(ctx.grid.nodes[i])).sum();
        assert!((v - 1.0 - tr).abs() < 1e-15);
    }

    #[test]
    fn determinant_route_matches_plain_pfaffian() {
        use crate::antisym_linalg::{pfaffian, AntisymMatrix};
        let ctx = FredholmContext::new((-6.0, 6.0), 60, 1).unwrap();
        let f = |x: f64| -0.4 * (-0.5 * x * x).exp();
        let det = fredholm_det(f, &ctx, &default_path()).unwrap();
        let kb = ctx.kernel().unwrap();
        let m = ctx.m();
        let n = 2 * m;
        let d = kb.matrix();
        let sw: Vec<f64> = (0..m).map(|i| (-ctx.grid.weights[i] * f(ctx.grid.nodes[i])).sqrt()).collect();
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] = -d[r * n + c] * sw[r / 2] * sw[c / 2];
            }
        }
        for i in 0..m {
            a[(2 * i) * n + 2 * i + 1] += 1.0;
            a[(2 * i + 1) * n + 2 * i] -= 1.0;
        }
        let pf = pfaffian(&AntisymMatrix::new(n, a).unwrap()).unwrap();
        assert!((pf - det).abs() < 1e-3, "pf={pf} det={det}");
    }
}
