//! Pfaffians, LU determinants and sign-continued square roots.

use num_complex::ComplexFloat;

use crate::error::{Error, Result};
use crate::quadrature::LogValue;

/// Relative pivot size below which a matrix is treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Allowed |A + Aᵀ| relative to the largest entry.
pub const ANTISYMMETRY_TOLERANCE: f64 = 1e-10;

/// Largest log-magnitude jump of a determinant between consecutive path points.
pub const MAX_LOG_JUMP: f64 = 4.605_170_185_988_091; // ln 100

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Copy> SquareMatrix<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::domain(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }
}

/// Even-dimensional antisymmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymMatrix<T> {
    inner: SquareMatrix<T>,
}

impl<T: ComplexFloat<Real = f64>> AntisymMatrix<T> {
    /// Validates antisymmetry and zeroes the diagonal.
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim % 2 == 1 {
            return Err(Error::OddDimension(dim));
        }
        let mut m = SquareMatrix::new(dim, data)?;
        let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let mut defect = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                defect = defect.max((m.get(i, j) + m.get(j, i)).abs());
            }
        }
        if defect > ANTISYMMETRY_TOLERANCE * scale {
            return Err(Error::NotAntisymmetric { defect });
        }
        for i in 0..dim {
            m.data[i * dim + i] = T::zero();
        }
        Ok(AntisymMatrix { inner: m })
    }

    /// Builds from the strictly upper triangle, row by row.
    pub fn from_upper(dim: usize, upper: &[T]) -> Result<Self> {
        if dim % 2 == 1 {
            return Err(Error::OddDimension(dim));
        }
        if upper.len() != dim * (dim - 1) / 2 {
            return Err(Error::domain("upper triangle has the wrong length"));
        }
        let mut data = vec![T::zero(); dim * dim];
        let mut k = 0;
        for i in 0..dim {
            for j in i + 1..dim {
                data[i * dim + j] = upper[k];
                data[j * dim + i] = -upper[k];
                k += 1;
            }
        }
        Ok(AntisymMatrix {
            inner: SquareMatrix { dim, data },
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner.get(i, j)
    }

    pub fn as_square(&self) -> &SquareMatrix<T> {
        &self.inner
    }
}

/// Pfaffian by Parlett–Reid elimination with partial pivoting.
pub fn pfaffian<T: ComplexFloat<Real = f64>>(a: &AntisymMatrix<T>) -> Result<T> {
    let n = a.dim();
    let mut m = a.inner.data.clone();
    Ok(pfaffian_in_place(&mut m, n))
}

/// Pfaffian of a row-major antisymmetric buffer, destroying it.
pub(crate) fn pfaffian_in_place<T: ComplexFloat<Real = f64>>(m: &mut [T], n: usize) -> T {
    if n == 0 {
        return T::one();
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return T::zero();
    }
    let mut pf = T::one();
    let idx = |i: usize, j: usize| i * n + j;
    for k in (0..n - 1).step_by(2) {
        let mut kp = k + 1;
        let mut best = m[idx(k + 1, k)].abs();
        for r in k + 2..n {
            let v = m[idx(r, k)].abs();
            if v > best {
                best = v;
                kp = r;
            }
        }
        if kp != k + 1 {
            for c in 0..n {
                m.swap(idx(k + 1, c), idx(kp, c));
            }
            for r in 0..n {
                m.swap(idx(r, k + 1), idx(r, kp));
            }
            pf = -pf;
        }
        if best <= PIVOT_THRESHOLD * scale {
            return T::zero();
        }
        let piv = m[idx(k, k + 1)];
        pf = pf * piv;
        if k + 2 < n {
            let tau: Vec<T> = (k + 2..n).map(|c| m[idx(k, c)] / piv).collect();
            let col: Vec<T> = (k + 2..n).map(|r| m[idx(r, k + 1)]).collect();
            for (a, r) in (k + 2..n).enumerate() {
                for (b, c) in (k + 2..n).enumerate() {
                    m[idx(r, c)] = m[idx(r, c)] + tau[a] * col[b] - col[a] * tau[b];
                }
            }
        }
    }
    pf
}

/// Pfaffian of a small antisymmetric matrix given as a full row-major slice.
/// Uses closed forms up to dimension 6.
pub(crate) fn pfaffian_small(m: &[f64], n: usize) -> f64 {
    let a = |i: usize, j: usize| m[i * n + j];
    match n {
        0 => 1.0,
        2 => a(0, 1),
        4 => a(0, 1) * a(2, 3) - a(0, 2) * a(1, 3) + a(0, 3) * a(1, 2),
        6 => {
            // expansion along the first row
            let mut acc = 0.0;
            for j in 1..6 {
                let rest: Vec<usize> = (1..6).filter(|&k| k != j).collect();
                let (p, q, r, s) = (rest[0], rest[1], rest[2], rest[3]);
                let minor = a(p, q) * a(r, s) - a(p, r) * a(q, s) + a(p, s) * a(q, r);
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                acc += sign * a(0, j) * minor;
            }
            acc
        }
        _ => {
            let mut buf = m.to_vec();
            pfaffian_in_place(&mut buf, n)
        }
    }
}

/// LU determinant with partial pivoting, returned as a [`LogValue`].
pub fn determinant(m: &SquareMatrix<f64>) -> Result<LogValue> {
    let n = m.dim;
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("determinant", "non-finite matrix entry"));
    }
    let mut a = m.data.clone();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if n == 0 {
        return Ok(LogValue::ONE);
    }
    if scale == 0.0 {
        return Ok(LogValue::ZERO);
    }
    let mut sign: i8 = 1;
    let mut log_mag = 0.0;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= PIVOT_THRESHOLD * scale {
            return Ok(LogValue::ZERO);
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            sign = -sign;
        }
        let piv = a[k * n + k];
        if piv < 0.0 {
            sign = -sign;
        }
        log_mag += piv.abs().ln();
        for r in k + 1..n {
            let f = a[r * n + k] / piv;
            if f != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
    }
    Ok(LogValue::new(sign, log_mag))
}

/// Square roots of determinant values along a path, with the sign of the root
/// carried by continuity from the anchor value 1 at the start of the path.
pub fn sqrt_continued(values: &[LogValue]) -> Result<Vec<LogValue>> {
    let first = values
        .first()
        .ok_or_else(|| Error::domain("empty continuation path"))?;
    if first.sign != 1 || first.log_mag.abs() > 1e-9 {
        return Err(Error::domain("continuation path must start at the value 1"));
    }
    let mut out = Vec::with_capacity(values.len());
    out.push(LogValue::ONE);
    let mut sign = 1;
    for (i, w) in values.windows(2).enumerate() {
        let (prev, cur) = (w[0], w[1]);
        if cur.sign != 1 || (cur.log_mag - prev.log_mag).abs() > MAX_LOG_JUMP {
            return Err(Error::RefinePath { index: i + 1 });
        }
        // a Pfaffian changing sign would drive the determinant through zero,
        // which the jump bound excludes; the sign is therefore inherited
        sign *= cur.sign;
        out.push(LogValue::new(sign, 0.5 * cur.log_mag));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn closed_forms() {
        let a = AntisymMatrix::from_upper(2, &[3.7]).unwrap();
        assert_eq!(pfaffian(&a).unwrap(), 3.7);
        let a = AntisymMatrix::from_upper(4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((pfaffian(&a).unwrap() - 8.0).abs() < 1e-13);
        assert!((pfaffian_small(&a.as_square().data, 4) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn complex_entries() {
        let i = Complex64::new(0.0, 1.0);
        let up = [i, Complex64::new(2.0, 0.0), Complex64::new(3.0, -1.0), Complex64::new(4.0, 0.5), Complex64::new(5.0, 0.0), Complex64::new(6.0, 2.0)];
        let a = AntisymMatrix::from_upper(4, &up).unwrap();
        let expect = up[0] * up[5] - up[1] * up[4] + up[2] * up[3];
        assert!((pfaffian(&a).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(matches!(AntisymMatrix::<f64>::new(3, vec![0.0; 9]), Err(Error::OddDimension(3))));
        let bad = vec![0.0, 1.0, 1.0, 0.0];
        assert!(matches!(AntisymMatrix::new(2, bad), Err(Error::NotAntisymmetric { .. })));
    }

    #[test]
    fn determinant_examples() {
        let mut id = vec![0.0; 36];
        for k in 0..6 {
            id[k * 7] = 1.0;
        }
        let d = determinant(&SquareMatrix::new(6, id).unwrap()).unwrap();
        assert_eq!((d.sign, d.log_mag), (1, 0.0));
        let d = determinant(&SquareMatrix::new(2, vec![2.0, 0.0, 0.0, 3.0]).unwrap()).unwrap();
        assert_eq!(d.sign, 1);
        assert!((d.log_mag - 6f64.ln()).abs() < 1e-15);
        let d = determinant(&SquareMatrix::new(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap()).unwrap();
        assert_eq!(d.sign, 0);
    }

    #[test]
    fn continuation_examples() {
        let p = |v: &[f64]| v.iter().map(|&x| LogValue::from_f64(x)).collect::<Vec<_>>();
        let r = sqrt_continued(&p(&[1.0, 4.0])).unwrap();
        assert!((r[1].to_f64() - 2.0).abs() < 1e-15);
        let r = sqrt_continued(&p(&[1.0, 0.25, 0.01])).unwrap();
        assert!((r[1].to_f64() - 0.5).abs() < 1e-15);
        assert!((r[2].to_f64() - 0.1).abs() < 1e-15);
        let e = sqrt_continued(&p(&[1.0, 1e-30, 0.9])).unwrap_err();
        assert_eq!(e, Error::RefinePath { index: 1 });
    }
}
