//! Small dense linear algebra.
//!
//! Everything here targets desk-scale problems (a handful of rows and
//! columns), so the routines favour determinism and simplicity over
//! asymptotic speed.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;
use core::ops::{Index, IndexMut};
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices. Returns `None` when rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Self { rows: nrows, cols: ncols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `selfᵀ * v`, without forming the transpose.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.tr_mul_vec_add(v, &mut out);
        out
    }

    /// `out += selfᵀ * v`.
    pub fn tr_mul_vec_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Matrix {
        self.transpose().matmul(self)
    }

    /// `self selfᵀ`.
    pub fn outer_gram(&self) -> Matrix {
        self.matmul(&self.transpose())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Only the upper triangle is read. Sweeps run until the off-diagonal mass
/// drops below `1e-30` relative to the Frobenius norm; the rotation order is
/// fixed so results are bit-reproducible.
pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    assert!(a.is_square(), "symmetric_eigen needs a square matrix");
    let n = a.rows();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = a[(i, j)];
            m[(j, i)] = a[(i, j)];
        }
    }
    let mut v = Matrix::identity(n);
    let total: f64 = m.as_slice().iter().map(|x| x * x).sum();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Solves `a x = rhs` by Gaussian elimination with partial pivoting.
///
/// Returns `None` if a pivot falls below `pivot_tol · max|a|`.
pub fn lu_solve(a: &Matrix, rhs: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    assert!(a.is_square());
    let n = a.rows();
    assert_eq!(rhs.len(), n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let (piv, pmax) =
            (col..n).map(|r| (r, m[(r, col)].abs())).fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= pivot_tol * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            b.swap(col, piv);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= f * m[(col, j)];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / m[(i, i)];
    }
    Some(x)
}

/// Minimum-norm least-squares solution of `a x = rhs` for symmetric `a`,
/// through its eigen-decomposition. Eigenvalues with magnitude below
/// `rel_tol · max|λ|` are treated as zero.
pub fn symmetric_pinv_solve(a: &Matrix, rhs: &[f64], rel_tol: f64) -> Vec<f64> {
    let eig = symmetric_eigen(a);
    let n = a.rows();
    let lmax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = rel_tol * lmax.max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let coef: f64 = (0..n).map(|i| eig.vectors[(i, k)] * rhs[i]).sum::<f64>() / lam;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * eig.vectors[(i, k)];
        }
    }
    x
}

/// Minimum-norm least-squares solution of the (possibly rectangular,
/// rank-deficient) system `a x = rhs`, via the normal equations' pseudo-inverse.
pub fn least_squares_min_norm(a: &Matrix, rhs: &[f64], rel_tol: f64) -> Vec<f64> {
    let atb = a.tr_mul_vec(rhs);
    symmetric_pinv_solve(&a.gram(), &atb, rel_tol)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The matrix is scaled so that its infinity norm is at most 1/2, then the
/// series is summed to 20 terms (truncation below 1e-25 relative) and squared
/// back up.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square());
    let n = a.rows();
    let norm = a.norm_inf();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a.scaled(2f64.powi(-(squarings as i32)));
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=20 {
        term = term.matmul(&scaled).scaled(1.0 / k as f64);
        result = result.add(&term);
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Characteristic polynomial coefficients of a square matrix by the
/// Faddeev–LeVerrier recursion. Returns `c` with
/// `det(sI − a) = s^n + c[0] s^{n−1} + … + c[n−1]`.
pub fn characteristic_polynomial(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.rows();
    let mut coeffs = Vec::with_capacity(n);
    let mut m = Matrix::identity(n);
    for k in 1..=n {
        let am = a.matmul(&m);
        let trace: f64 = (0..n).map(|i| am[(i, i)]).sum();
        let c = -trace / k as f64;
        coeffs.push(c);
        m = am;
        for i in 0..n {
            m[(i, i)] += c;
        }
    }
    coeffs
}

/// All complex roots of the monic polynomial `s^n + c[0] s^{n−1} + … + c[n−1]`
/// by Durand–Kerner iteration followed by Newton polishing.
pub fn monic_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let radius = 1.0 + coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> =
        (0..n).map(|k| seed.powu(k as u32) * radius * 0.5 + Complex64::new(1e-3 * k as f64, 0.0)).collect();
    for _ in 0..2000 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let (p, _) = eval(roots[i]);
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-300, 0.0);
            }
            let step = p / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *r - p / dp;
            if eval(next).0.norm() < p.norm() {
                *r = next;
            } else {
                break;
            }
        }
        if r.im.abs() <= 1e-12 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Eigenvalues of a small general real matrix, sorted by real part.
pub fn eigenvalues(a: &Matrix) -> Vec<Complex64> {
    monic_roots(&characteristic_polynomial(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        let q = Matrix::from_rows(&[[1.0, -0.5], [-0.5, 1.0]]).unwrap();
        let e = symmetric_eigen(&q);
        assert!(close(e.values[0], 0.5, 1e-14));
        assert!(close(e.values[1], 1.5, 1e-14));
        // eigenvector check
        for k in 0..2 {
            let v = [e.vectors[(0, k)], e.vectors[(1, k)]];
            let qv = q.mul_vec(&v);
            assert!(close(qv[0], e.values[k] * v[0], 1e-14));
            assert!(close(qv[1], e.values[k] * v[1], 1e-14));
        }
    }

    #[test]
    fn jacobi_diagonal_and_empty() {
        let e = symmetric_eigen(&Matrix::diagonal(&[5.0, 2.0, 3.0]));
        assert_eq!(e.values, vec![2.0, 3.0, 5.0]);
        let e = symmetric_eigen(&Matrix::zeros(0, 0));
        assert!(e.values.is_empty());
        assert_eq!(e.min(), 0.0);
    }

    #[test]
    fn lu_detects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(lu_solve(&a, &[1.0, 2.0], 1e-12).is_none());
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(lu_solve(&a, &[3.0, 4.0], 1e-12).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn pinv_gives_min_norm() {
        // x1 + x2 = 2 written symmetrically: [[1,1],[1,1]] x = [2,2]
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let x = symmetric_pinv_solve(&a, &[2.0, 2.0], 1e-12);
        assert!(close(x[0], 1.0, 1e-14) && close(x[1], 1.0, 1e-14));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.0;
        let a = Matrix::from_rows(&[[0.0, -t], [t, 0.0]]).unwrap();
        let e = expm(&a);
        assert!(close(e[(0, 0)], t.cos(), 1e-13));
        assert!(close(e[(1, 0)], t.sin(), 1e-13));
        let z = expm(&Matrix::zeros(3, 3));
        assert_eq!(z, Matrix::identity(3));
    }

    #[test]
    fn expm_diagonal_large_norm() {
        let e = expm(&Matrix::diagonal(&[-30.0, 3.0]));
        assert!(((e[(0, 0)] - (-30.0f64).exp()) / (-30.0f64).exp()).abs() < 1e-11);
        assert!(((e[(1, 1)] - 3.0f64.exp()) / 3.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn charpoly_and_roots() {
        // s^2 + 3s + 1 from a companion-like matrix
        let a = Matrix::from_rows(&[[-3.0, -1.0], [1.0, 0.0]]).unwrap();
        let c = characteristic_polynomial(&a);
        assert!(close(c[0], 3.0, 1e-14) && close(c[1], 1.0, 1e-14));
        let r = eigenvalues(&a);
        let d = 5f64.sqrt();
        assert!(close(r[0].re, (-3.0 - d) / 2.0, 1e-12));
        assert!(close(r[1].re, (-3.0 + d) / 2.0, 1e-12));
        assert_eq!(r[0].im, 0.0);
    }

    #[test]
    fn complex_pair_roots() {
        // s^2 + s + 1 -> (-1 ± i√3)/2
        let r = monic_roots(&[1.0, 1.0]);
        assert!(close(r[0].re, -0.5, 1e-13));
        assert!(close(r[0].im.abs(), 3f64.sqrt() / 2.0, 1e-13));
    }

    #[test]
    fn double_root_is_located() {
        // (s + 1)^2
        let r = monic_roots(&[2.0, 1.0]);
        for z in r {
            assert!(close(z.re, -1.0, 1e-7), "{z}");
        }
    }
}
