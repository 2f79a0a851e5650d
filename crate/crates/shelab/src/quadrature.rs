//! Gauss–Legendre rules and the integration contracts used across the crate.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest rule size served by [`gauss_legendre`].
pub const MAX_NODES: usize = 512;

/// Truncation length of [`integrate_semi_infinite`] in units of the decay scale.
pub const SEMI_INFINITE_SPAN: f64 = 40.0;

/// Widest panel [`integrate`] uses before switching to a composite rule.
pub const MAX_PANEL_WIDTH: f64 = 5.0;

/// Nodes and weights of a quadrature rule on `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub window: (f64, f64),
    pub m: usize,
}

impl QuadratureGrid {
    /// `per_panel`-point Gauss rule on each of `panels` equal panels of `[lo, hi]`.
    pub fn composite(lo: f64, hi: f64, panels: usize, per_panel: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("bad window ({lo}, {hi})")));
        }
        if panels == 0 {
            return Err(Error::domain("panel count must be positive"));
        }
        let rule = gauss_legendre(per_panel)?;
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a = lo + h * p as f64;
            let b = if p + 1 == panels { hi } else { a + h };
            let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
            for (u, w) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(c + r * u);
                weights.push(r * w);
            }
        }
        Ok(QuadratureGrid {
            m: nodes.len(),
            nodes,
            weights,
            window: (lo, hi),
        })
    }

    /// `m`-point Gauss rule mapped onto `[lo, hi]`.
    pub fn mapped(lo: f64, hi: f64, m: usize) -> Result<Self> {
        Self::composite(lo, hi, 1, m)
    }

    /// Weighted sum of `f` over the nodes, left to right.
    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Signed value stored as `sign * exp(log_mag)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub sign: i8,
    pub log_mag: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        sign: 1,
        log_mag: 0.0,
    };

    pub fn new(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                sign: if v > 0.0 { 1 } else { -1 },
                log_mag: v.abs().ln(),
            }
        }
    }

    /// Positive value given by its logarithm.
    pub fn from_ln(log_mag: f64) -> Self {
        Self::new(1, log_mag)
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_mag.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        LogValue {
            sign: self.sign.abs(),
            log_mag: self.log_mag,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }

    /// Square root of a non-negative value.
    pub fn sqrt(self) -> Result<Self> {
        if self.sign < 0 {
            return Err(Error::domain("square root of a negative LogValue"));
        }
        Ok(Self::new(self.sign, 0.5 * self.log_mag))
    }

    /// Natural log of a positive value.
    pub fn ln(self) -> Result<f64> {
        if self.sign <= 0 {
            return Err(Error::domain("log of a non-positive LogValue"));
        }
        Ok(self.log_mag)
    }
}

impl Neg for LogValue {
    type Output = Self;

    fn neg(self) -> Self {
        LogValue {
            sign: -self.sign,
            log_mag: self.log_mag,
        }
    }
}

impl Mul for LogValue {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self::new(self.sign * o.sign, self.log_mag + o.log_mag)
    }
}

impl Div for LogValue {
    type Output = Self;

    fn div(self, o: Self) -> Self {
        Self::new(self.sign * o.sign, self.log_mag - o.log_mag)
    }
}

impl Add for LogValue {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_mag >= o.log_mag {
            (self, o)
        } else {
            (o, self)
        };
        let r = (small.log_mag - big.log_mag).exp();
        if big.sign == small.sign {
            Self::new(big.sign, big.log_mag + r.ln_1p())
        } else if r >= 1.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.log_mag + (-r).ln_1p())
        }
    }
}

impl Sub for LogValue {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

/// Order-preserving sum of signed log terms. Positive and negative parts are
/// accumulated separately and combined once.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogAccumulator {
    pos: LogValue,
    neg: LogValue,
}

impl LogAccumulator {
    pub fn new() -> Self {
        LogAccumulator {
            pos: LogValue::ZERO,
            neg: LogValue::ZERO,
        }
    }

    pub fn push(&mut self, v: LogValue) {
        match v.sign {
            1 => self.pos = self.pos + v,
            -1 => self.neg = self.neg - v,
            _ => {}
        }
    }

    pub fn total(&self) -> LogValue {
        self.pos - self.neg
    }
}

type RuleCache = RwLock<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>;

fn rule_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn legendre_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule with `m` nodes on (−1, 1).
pub fn gauss_legendre(m: usize) -> Result<QuadratureGrid> {
    if m == 0 || m > MAX_NODES {
        return Err(Error::Range {
            what: "m",
            value: m as f64,
            lo: 1.0,
            hi: MAX_NODES as f64,
        });
    }
    let cached = rule_cache().read().expect("rule cache poisoned").get(&m).cloned();
    let rule = match cached {
        Some(r) => r,
        None => {
            let r = Arc::new(legendre_rule(m));
            rule_cache()
                .write()
                .expect("rule cache poisoned")
                .entry(m)
                .or_insert(r)
                .clone()
        }
    };
    Ok(QuadratureGrid {
        nodes: rule.0.clone(),
        weights: rule.1.clone(),
        window: (-1.0, 1.0),
        m,
    })
}

fn panel_count(lo: f64, hi: f64) -> usize {
    let span = hi - lo;
    if span > 10.0 {
        (span / MAX_PANEL_WIDTH).ceil() as usize
    } else {
        1
    }
}

/// Gauss–Legendre estimate of `∫_lo^hi f` with `m` nodes per panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, window: (f64, f64), m: usize) -> Result<f64> {
    let (lo, hi) = window;
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate(f, (hi, lo), m).map(|v| -v);
    }
    QuadratureGrid::composite(lo, hi, panel_count(lo, hi), m)?.apply(f)
}

/// `∫_lo^∞ f`, truncated at `lo + 40·decay_scale`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    decay_scale: f64,
    m: usize,
) -> Result<f64> {
    if !(decay_scale > 0.0) {
        return Err(Error::domain(format!("decay_scale = {decay_scale} must be positive")));
    }
    integrate(f, (lo, lo + SEMI_INFINITE_SPAN * decay_scale), m)
}

/// `∫ f` for an integrand given in log form, accumulated with log-sum-exp.
pub fn integrate_log_domain<F: Fn(f64) -> LogValue>(
    log_f: F,
    window: (f64, f64),
    m: usize,
) -> Result<LogValue> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(Error::domain(format!("bad window ({lo}, {hi})")));
    }
    let grid = QuadratureGrid::composite(lo, hi, panel_count(lo, hi), m)?;
    log_sum(&grid, log_f)
}

/// Log-domain weighted sum over an explicit grid.
pub fn log_sum<F: Fn(f64) -> LogValue>(grid: &QuadratureGrid, log_f: F) -> Result<LogValue> {
    let mut acc = LogAccumulator::new();
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = log_f(x);
        if v.sign != 0 && !v.log_mag.is_finite() {
            return Err(Error::NonFinite { x });
        }
        acc.push(LogValue::new(v.sign, v.log_mag + w.ln()));
    }
    Ok(acc.total())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Range {
            what: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// `∫_0^1 s^{−α} g(s) ds` through `s = u^{1/(1−α)}`.
pub fn integrate_power_singularity<F: Fn(f64) -> f64>(g: F, alpha: f64, m: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let e = 1.0 / (1.0 - alpha);
    let v = integrate(|u: f64| g(u.powf(e)), (0.0, 1.0), m)?;
    Ok(e * v)
}

/// Like [`integrate_power_singularity`], with geometrically graded panels in
/// `u` (ratio 1/4, smallest panel edge `u_min`) for integrands whose features
/// sit at very small `s`.
pub fn integrate_power_singularity_graded<F: Fn(f64) -> f64>(
    g: F,
    alpha: f64,
    m: usize,
    u_min: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let e = 1.0 / (1.0 - alpha);
    let mut acc = 0.0;
    for (a, b) in graded_edges(u_min) {
        acc += integrate(|u: f64| g(u.powf(e)), (a, b), m)?;
    }
    Ok(e * acc)
}

/// Panel edges `[0, u_min], …, [1/16, 1/4], [1/4, 1]`.
pub(crate) fn graded_edges(u_min: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![(0.25, 1.0)];
    let mut b = 0.25;
    while b > u_min {
        edges.push((0.25 * b, b));
        b *= 0.25;
    }
    edges.push((0.0, b));
    edges.reverse();
    edges
}
