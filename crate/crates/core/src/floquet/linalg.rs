//! Dense complex Gaussian elimination with partial pivoting.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot floor: a pivot below this fraction of the largest entry
/// of the input matrix is treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-13;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `a x = b`. Ties in pivot magnitude go to the lowest row index so
/// the elimination order is fully determined by the input.
pub fn solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::Dimension(format!("matrix is {}x{}", a.rows, a.cols)));
    }
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} entries, expected {n}",
            b.len()
        )));
    }
    if !a.is_finite() || b.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Dimension("non-finite entries".into()));
    }

    let threshold = PIVOT_FLOOR * a.max_abs();
    let mut m = a.data.clone();
    let mut x = b.to_vec();

    for k in 0..n {
        let mut p = k;
        let mut best = m[k * n + k].norm();
        for r in k + 1..n {
            let v = m[r * n + k].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= threshold || best == 0.0 {
            return Err(Error::Singular {
                index: k,
                magnitude: best,
                threshold,
            });
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let inv = m[k * n + k].inv();
        for r in k + 1..n {
            let f = m[r * n + k] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            m[r * n + k] = Complex64::new(0.0, 0.0);
            for c in k + 1..n {
                let mk = m[k * n + c];
                m[r * n + c] -= f * mk;
            }
            let xk = x[k];
            x[r] -= f * xk;
        }
    }

    for k in (0..n).rev() {
        let mut acc = x[k];
        for c in k + 1..n {
            acc -= m[k * n + c] * x[c];
        }
        x[k] = acc / m[k * n + k];
    }
    Ok(x)
}

/// `‖a x - b‖∞`
pub fn residual_inf(a: &ComplexMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).norm())
        .fold(0.0, f64::max)
}
