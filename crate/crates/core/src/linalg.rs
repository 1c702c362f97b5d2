//! Small dense complex linear algebra.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Replace M by (M + M^H)/2.
    pub fn hermitize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in i..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = v;
                self[(j, i)] = v.conj();
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LDL^H factorisation of a Hermitian positive definite matrix.
///
/// Returns the unit lower factor and the real pivots. A pivot below
/// `rel_tol` times its own diagonal entry is reported as rank deficiency.
pub fn ldl_hermitian(g: &CMatrix, rel_tol: f64) -> Result<(CMatrix, Vec<f64>)> {
    let n = g.rows();
    let mut l = CMatrix::identity(n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = g[(j, j)].re;
        for k in 0..j {
            dj -= l[(j, k)].norm_sqr() * d[k];
        }
        if !(dj > rel_tol * g[(j, j)].re.abs()) || !dj.is_finite() {
            return Err(Error::Resolution(format!(
                "Gram pivot {j} = {dj:e} not positive relative to diagonal {:e}",
                g[(j, j)].re
            )));
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut v = g[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj() * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok((l, d))
}

/// Inverse of a unit lower triangular matrix.
pub fn unit_lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.rows();
    let mut inv = CMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let mut s = Complex64::new(0.0, 0.0);
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s;
        }
    }
    inv
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &CMatrix) -> Complex64 {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm())).unwrap_or(k);
        if a[(p, k)].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            det = -det;
        }
        let piv = a[(k, k)];
        det *= piv;
        for i in (k + 1)..n {
            let f = a[(i, k)] / piv;
            for j in k..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    det
}

/// Smallest singular value, from the eigenvalues of M^H M (Jacobi sweeps).
pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    let h = m.adjoint().mul(m);
    hermitian_eigenvalues(&h).into_iter().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.rows();
    let mut a = h.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * a.max_abs().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / r;
                let theta = 0.5 * (2.0 * r).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // rotation acting on columns p, q: J = [[c, s·phase], [−s·conj(phase), c]]
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s * phase.conj();
                    a[(k, q)] = akp * s * phase + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s * phase;
                    a[(q, k)] = apk * s * phase.conj() + aqk * c;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}
