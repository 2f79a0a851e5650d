//! GOE-Airy Pfaffian kernel: entries, diagonal K₁₂, envelopes, block matrix
//! assembly and correlation functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antisym_linalg::{pfaffian, AntisymMatrix};
use crate::error::{Error, Result};
use crate::quadrature::{LogValue, QuadratureGrid};
use crate::special_functions::{
    airy, airy_scaled_pair, airy_square_tail, airy_unchecked, airy_upper_tail, upper_tail_fast,
    AiryValue, AIRY_WINDOW,
};

/// λ beyond the Airy turning point at which kernel integrals are truncated.
pub const LAMBDA_SPAN: f64 = 40.0;

/// Gauss nodes per unit-length λ panel.
const LAMBDA_NODES: usize = 16;

/// Default kernel-argument window for Fredholm work.
pub const DEFAULT_WINDOW: (f64, f64) = (-12.0, 12.0);

/// Below this separation the Christoffel–Darboux quotient is replaced by quadrature.
const CD_MIN_SEPARATION: f64 = 1e-2;

/// sgn with sgn(0) = 0.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One of the four kernel entries, by row and column kind (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelEntrySelector {
    pub row_kind: u8,
    pub col_kind: u8,
}

impl KernelEntrySelector {
    pub const K11: Self = Self { row_kind: 1, col_kind: 1 };
    pub const K12: Self = Self { row_kind: 1, col_kind: 2 };
    pub const K21: Self = Self { row_kind: 2, col_kind: 1 };
    pub const K22: Self = Self { row_kind: 2, col_kind: 2 };

    pub fn new(row_kind: u8, col_kind: u8) -> Result<Self> {
        if !(1..=2).contains(&row_kind) || !(1..=2).contains(&col_kind) {
            return Err(Error::domain(format!("kernel kinds must be 1 or 2, got ({row_kind}, {col_kind})")));
        }
        Ok(Self { row_kind, col_kind })
    }
}

/// Which display a kernel entry is evaluated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formula {
    /// The defining integrals, with inner tails by direct quadrature.
    Primary,
    /// Integration by parts for K₁₁, Fubini-reduced K₂₂, Christoffel–Darboux K₁₂.
    Alternate,
}

fn check_arg(x: f64) -> Result<()> {
    if !(AIRY_WINDOW.0..=AIRY_WINDOW.1).contains(&x) {
        return Err(Error::Range {
            what: "kernel argument",
            value: x,
            lo: AIRY_WINDOW.0,
            hi: AIRY_WINDOW.1,
        });
    }
    Ok(())
}

/// λ-grid `[0, max(0, −lo) + 40]` in unit panels.
pub fn lambda_grid(lo: f64) -> QuadratureGrid {
    let hi = (-lo).max(0.0) + LAMBDA_SPAN;
    let panels = hi.ceil() as usize;
    QuadratureGrid::composite(0.0, hi, panels, LAMBDA_NODES).expect("valid λ grid")
}

fn tail_quadrature(z: f64) -> f64 {
    if z > AIRY_WINDOW.1 {
        upper_tail_fast(z)
    } else {
        airy_upper_tail(z).expect("argument inside window")
    }
}

/// Kernel entry `sel` at (x, y).
pub fn k_entry(sel: KernelEntrySelector, x: f64, y: f64, formula: Formula) -> Result<f64> {
    KernelEntrySelector::new(sel.row_kind, sel.col_kind)?;
    check_arg(x)?;
    check_arg(y)?;
    let grid = lambda_grid(x.min(y));
    let av = |z: f64| airy_unchecked(z);
    let quad = |f: &dyn Fn(f64) -> f64| -> f64 {
        grid.nodes.iter().zip(&grid.weights).map(|(&l, &w)| w * f(l)).sum()
    };
    let v = match (sel.row_kind, sel.col_kind, formula) {
        (1, 1, Formula::Primary) => quad(&|l| {
            let (a, b) = (av(x + l), av(y + l));
            a.ai * b.ai_prime - b.ai * a.ai_prime
        }),
        (1, 1, Formula::Alternate) => {
            -av(x).ai * av(y).ai - 2.0 * quad(&|l| av(x + l).ai_prime * av(y + l).ai)
        }
        (1, 2, f) => k12(x, y, f, &quad),
        (2, 1, f) => -k12(y, x, f, &quad),
        (2, 2, Formula::Primary) => {
            let i_xy = quad(&|l| av(x + l).ai * tail_quadrature(y + l));
            let i_yx = quad(&|l| av(y + l).ai * tail_quadrature(x + l));
            0.25 * i_xy - 0.25 * i_yx - 0.25 * tail_quadrature(x) + 0.25 * tail_quadrature(y)
                - 0.25 * sgn(x - y)
        }
        (2, 2, Formula::Alternate) => {
            let (tx, ty) = (upper_tail_fast(x), upper_tail_fast(y));
            let i_xy = quad(&|l| av(x + l).ai * upper_tail_fast(y + l));
            0.5 * i_xy - 0.25 * tx * ty - 0.25 * tx + 0.25 * ty - 0.25 * sgn(x - y)
        }
        _ => unreachable!("selector validated above"),
    };
    Ok(v)
}

/// Integrates a function of λ over the kernel's λ range.
type LambdaQuad<'a> = &'a dyn Fn(&dyn Fn(f64) -> f64) -> f64;

fn k12(x: f64, y: f64, formula: Formula, quad: LambdaQuad) -> f64 {
    let ax = airy_unchecked(x);
    match formula {
        Formula::Primary => {
            let ai_ai = quad(&|l| airy_unchecked(x + l).ai * airy_unchecked(y + l).ai);
            ai_ai + 0.5 * ax.ai * (1.0 - tail_quadrature(y))
        }
        Formula::Alternate => {
            let ay = airy_unchecked(y);
            let ai_ai = if (x - y).abs() >= CD_MIN_SEPARATION {
                (ax.ai * ay.ai_prime - ax.ai_prime * ay.ai) / (x - y)
            } else {
                quad(&|l| airy_unchecked(x + l).ai * airy_unchecked(y + l).ai)
            };
            ai_ai + 0.5 * ax.ai * (1.0 - upper_tail_fast(y))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagMode {
    Plain,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiagValue {
    Plain(f64),
    Log(LogValue),
}

impl DiagValue {
    pub fn to_f64(self) -> f64 {
        match self {
            DiagValue::Plain(v) => v,
            DiagValue::Log(l) => l.to_f64(),
        }
    }
}

/// K₁₂(x, x) = ∫_x^∞ Ai² + ½Ai(x)∫_{−∞}^x Ai.
pub fn k12_diag(x: f64, mode: DiagMode) -> Result<DiagValue> {
    match mode {
        DiagMode::Plain => Ok(DiagValue::Plain(k12_diag_plain(x)?)),
        DiagMode::Log => Ok(DiagValue::Log(k12_diag_log(x)?)),
    }
}

pub fn k12_diag_plain(x: f64) -> Result<f64> {
    let AiryValue { ai, .. } = airy(x)?;
    Ok(airy_square_tail(x)? + 0.5 * ai * (1.0 - upper_tail_fast(x)))
}

/// Log of K₁₂(x, x) for any `x ≥ 0`, from scaled Airy values.
pub fn k12_diag_log(x: f64) -> Result<LogValue> {
    if !(x >= 0.0) {
        return Err(Error::Range {
            what: "x (log mode)",
            value: x,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let (a, ap) = airy_scaled_pair(x)?;
    let z = 2.0 / 3.0 * x * x.sqrt();
    let tail = if x <= AIRY_WINDOW.1 { upper_tail_fast(x) } else { 0.0 };
    let square = (ap * ap - x * a * a).max(0.0);
    let inner = 0.5 * a * (1.0 - tail) + (-z).exp() * square;
    Ok(LogValue::new(1, inner.ln() - z))
}

/// Bound family F_{α,β}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub alpha: f64,
    pub beta: f64,
}

impl Envelope {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Envelope { alpha, beta }
    }

    pub fn eval(&self, x: f64) -> f64 {
        envelope(*self, x)
    }

    /// Pointwise product F_{α₁,β₁}·F_{α₂,β₂} = F_{α₁+α₂,β₁+β₂}.
    pub fn product(self, o: Envelope) -> Envelope {
        Envelope::new(self.alpha + o.alpha, self.beta + o.beta)
    }
}

/// F_{α,β}(x) = e^{−αx^{3/2}} for x ≥ 0 and (1 − x)^β for x < 0.
pub fn envelope(e: Envelope, x: f64) -> f64 {
    if x >= 0.0 {
        (-e.alpha * x * x.sqrt()).exp()
    } else {
        (1.0 - x).powf(e.beta)
    }
}

/// Kernel arguments x₁…x_L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoints {
    points: Vec<f64>,
}

impl EvaluationPoints {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("at least one evaluation point is required"));
        }
        for &x in &points {
            check_arg(x)?;
        }
        Ok(EvaluationPoints { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smooth kernel blocks at a node set, sharing one λ-grid. The K₂₂ block
/// excludes the −sgn(x−y)/4 term, which callers add (or integrate) themselves.
#[derive(Debug, Clone)]
pub struct KernelBlocks {
    pub nodes: Vec<f64>,
    pub k11: Vec<f64>,
    pub k12: Vec<f64>,
    pub k22_smooth: Vec<f64>,
}

impl KernelBlocks {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::domain("empty node set"));
        }
        for &x in nodes {
            check_arg(x)?;
        }
        let m = nodes.len();
        let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let grid = lambda_grid(lo);
        let nl = grid.m;
        // per node: Ai, Ai' and T on the shared λ-grid
        let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = nodes
            .par_iter()
            .map(|&x| {
                let mut a = Vec::with_capacity(nl);
                let mut ap = Vec::with_capacity(nl);
                let mut t = Vec::with_capacity(nl);
                for &l in &grid.nodes {
                    let v = airy_unchecked(x + l);
                    a.push(v.ai);
                    ap.push(v.ai_prime);
                    t.push(upper_tail_fast(x + l));
                }
                (a, ap, t)
            })
            .collect();
        let w = &grid.weights;
        let at: Vec<(f64, f64)> = nodes
            .iter()
            .map(|&x| (airy_unchecked(x).ai, upper_tail_fast(x)))
            .collect();
        let blocks: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (ai, api, _) = &rows[i];
                let mut r11 = vec![0.0; m];
                let mut r12 = vec![0.0; m];
                let mut rint = vec![0.0; m];
                for j in 0..m {
                    let (aj, apj, tj) = &rows[j];
                    let (mut s11, mut s12, mut s_at) = (0.0, 0.0, 0.0);
                    for k in 0..nl {
                        let wa = w[k] * ai[k];
                        s11 += wa * apj[k] - w[k] * api[k] * aj[k];
                        s12 += wa * aj[k];
                        s_at += wa * tj[k];
                    }
                    r11[j] = s11;
                    r12[j] = s12 + 0.5 * at[i].0 * (1.0 - at[j].1);
                    rint[j] = s_at;
                }
                (r11, r12, rint)
            })
            .collect();
        let mut k11 = vec![0.0; m * m];
        let mut k12 = vec![0.0; m * m];
        let mut int_at = vec![0.0; m * m];
        for (i, (r11, r12, rint)) in blocks.into_iter().enumerate() {
            k11[i * m..(i + 1) * m].copy_from_slice(&r11);
            k12[i * m..(i + 1) * m].copy_from_slice(&r12);
            int_at[i * m..(i + 1) * m].copy_from_slice(&rint);
        }
        let mut k22_smooth = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                k22_smooth[i * m + j] = 0.25 * (int_at[i * m + j] - int_at[j * m + i])
                    - 0.25 * at[i].1
                    + 0.25 * at[j].1;
            }
        }
        // exact antisymmetry of K₁₁
        for i in 0..m {
            k11[i * m + i] = 0.0;
            for j in 0..i {
                let v = 0.5 * (k11[i * m + j] - k11[j * m + i]);
                k11[i * m + j] = v;
                k11[j * m + i] = -v;
            }
        }
        Ok(KernelBlocks {
            nodes: nodes.to_vec(),
            k11,
            k12,
            k22_smooth,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k11(&self, i: usize, j: usize) -> f64 {
        self.k11[i * self.len() + j]
    }

    pub fn k12(&self, i: usize, j: usize) -> f64 {
        self.k12[i * self.len() + j]
    }

    pub fn k21(&self, i: usize, j: usize) -> f64 {
        -self.k12(j, i)
    }

    pub fn k22_smooth(&self, i: usize, j: usize) -> f64 {
        self.k22_smooth[i * self.len() + j]
    }

    pub fn k22(&self, i: usize, j: usize) -> f64 {
        self.k22_smooth(i, j) - 0.25 * sgn(self.nodes[i] - self.nodes[j])
    }

    /// The 2L×2L matrix D with D(2i−1,2j−1) = K₁₁, D(2i−1,2j) = K₁₂,
    /// D(2i,2j−1) = K₂₁, D(2i,2j) = K₂₂ (1-based).
    pub fn matrix(&self) -> Vec<f64> {
        let m = self.len();
        let n = 2 * m;
        let mut d = vec![0.0; n * n];
        for i in 0..m {
            for j in 0..m {
                d[(2 * i) * n + 2 * j] = self.k11(i, j);
                d[(2 * i) * n + 2 * j + 1] = self.k12(i, j);
                d[(2 * i + 1) * n + 2 * j] = self.k21(i, j);
                d[(2 * i + 1) * n + 2 * j + 1] = self.k22(i, j);
            }
        }
        d
    }
}

/// The antisymmetric matrix D at the given points.
pub fn assemble(pts: &EvaluationPoints) -> Result<AntisymMatrix<f64>> {
    let blocks = KernelBlocks::new(pts.points())?;
    AntisymMatrix::new(2 * pts.len(), blocks.matrix())
}

/// ρ_L(x₁…x_L) = Pf[K(x_i, x_j)].
pub fn correlation(pts: &EvaluationPoints) -> Result<f64> {
    pfaffian(&assemble(pts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K12_00: f64 = 0.185_330_168_408_935;

    #[test]
    fn diagonal_values() {
        for f in [Formula::Primary, Formula::Alternate] {
            assert!(k_entry(KernelEntrySelector::K11, 0.7, 0.7, f).unwrap().abs() < 1e-12);
            assert!(k_entry(KernelEntrySelector::K22, 0.0, 0.0, f).unwrap().abs() < 1e-12);
            let v = k_entry(KernelEntrySelector::K12, 0.0, 0.0, f).unwrap();
            assert!((v - K12_00).abs() < 1e-10, "{f:?}: {v}");
        }
        assert!((k12_diag(0.0, DiagMode::Plain).unwrap().to_f64() - K12_00).abs() < 1e-10);
        let l = k12_diag(0.0, DiagMode::Log).unwrap().to_f64();
        assert!((l - K12_00).abs() < 1e-10);
        assert!(k12_diag(-1.0, DiagMode::Log).is_err());
    }

    #[test]
    fn log_mode_matches_plain() {
        for i in 0..60 {
            let x = 0.5 * i as f64;
            let p = k12_diag_plain(x).unwrap();
            let l = k12_diag_log(x).unwrap();
            assert!((l.log_mag - p.ln()).abs() < 1e-9, "x={x}");
        }
        let far = k12_diag_log(600.0).unwrap();
        assert!(far.sign == 1 && far.log_mag < -9000.0 && far.log_mag.is_finite());
    }

    #[test]
    fn envelope_examples() {
        let e = Envelope::new(1.0 / 3.0, 2.0);
        assert_eq!(e.eval(0.0), 1.0);
        assert!((e.eval(-3.0) - 16.0).abs() < 1e-12);
        let a = Envelope::new(1.0 / 3.0, 1.0);
        let p = a.product(a);
        assert!((a.eval(2.5) * a.eval(2.5) - p.eval(2.5)).abs() < 1e-12);
        assert!((p.eval(2.5) - Envelope::new(2.0 / 3.0, 2.0).eval(2.5)).abs() < 1e-15);
    }

    #[test]
    fn assemble_single_point() {
        let pts = EvaluationPoints::new(vec![0.0]).unwrap();
        let d = assemble(&pts).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - K12_00).abs() < 1e-10);
        assert!((d.get(1, 0) + K12_00).abs() < 1e-10);
        assert!((correlation(&pts).unwrap() - K12_00).abs() < 1e-10);
    }

    #[test]
    fn blocks_match_entries() {
        let pts = [-6.5, -1.25, 0.0, 2.0, 4.5];
        let b = KernelBlocks::new(&pts).unwrap();
        for (i, &x) in pts.iter().enumerate() {
            for (j, &y) in pts.iter().enumerate() {
                let e11 = k_entry(KernelEntrySelector::K11, x, y, Formula::Primary).unwrap();
                let e12 = k_entry(KernelEntrySelector::K12, x, y, Formula::Primary).unwrap();
                let e22 = k_entry(KernelEntrySelector::K22, x, y, Formula::Primary).unwrap();
                assert!((b.k11(i, j) - e11).abs() < 1e-10);
                assert!((b.k12(i, j) - e12).abs() < 1e-10);
                assert!((b.k22(i, j) - e22).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn window_errors() {
        assert!(k_entry(KernelEntrySelector::K11, -31.0, 0.0, Formula::Primary).is_err());
        assert!(EvaluationPoints::new(vec![]).is_err());
        assert!(KernelEntrySelector::new(3, 1).is_err());
    }
}
