//! Dense complex/real kernels used by the solvers.
//!
//! Matrices are row-major. Complex data is `num_complex::Complex64`, which is
//! `repr(C)` and therefore viewable as interleaved `[re, im]` pairs of `f64`;
//! the Gram product exploits this to run on the real GEMM.

use num_complex::Complex64;

use crate::parallel;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Wraps row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "CMatrix::from_vec length");
        CMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn conj_transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "RMatrix::from_vec length");
        RMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RMatrix { rows, cols, data }
    }

    /// Stacks equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "RMatrix::from_rows ragged input");
            data.extend_from_slice(r);
        }
        RMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

pub(crate) fn as_f64(z: &[Complex64]) -> &[f64] {
    // SAFETY: Complex64 is repr(C) { re: f64, im: f64 }.
    unsafe { std::slice::from_raw_parts(z.as_ptr() as *const f64, z.len() * 2) }
}

const GRAM_BLOCK: usize = 64;

/// `C[i0.., ..] (+)= alpha * A_blk * B^T` on real row-major operands.
#[allow(clippy::too_many_arguments)]
fn dgemm_abt(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= (m - 1) * lda + k);
    debug_assert!(b.len() >= (n - 1) * ldb + k);
    debug_assert!(c.len() >= (m - 1) * ldc + n);
    // SAFETY: bounds checked above; B is read transposed through its strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            lda as isize,
            1,
            b.as_ptr(),
            1,
            ldb as isize,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

/// `C = A B^T` for row-major real `A` (m × k), `B` (n × k) and `C` (m × n).
pub fn real_abt(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    if k == 0 {
        c[..m * n].fill(0.0);
        return;
    }
    dgemm_abt(m, n, k, 1.0, a, k, b, k, 0.0, c, n);
}

/// Hermitian Gram matrix `A A*` (m × m) of a row-major complex `A`.
///
/// With `x_j` the interleaved real view of row `j` and `y_j` that of `i·A_j`,
/// `Re G_jl = x_j·x_l` and `Im G_jl = -y_j·x_l`; both are real GEMMs on the
/// original buffer. Only the lower block triangle is computed.
pub fn gram(a: &CMatrix) -> CMatrix {
    let m = a.rows;
    let k2 = 2 * a.cols;
    let x = as_f64(&a.data);
    let nblocks = m.div_ceil(GRAM_BLOCK);

    let blocks: Vec<(Vec<f64>, Vec<f64>)> = parallel::map_range(nblocks, |b| {
        let i0 = b * GRAM_BLOCK;
        let i1 = (i0 + GRAM_BLOCK).min(m);
        let bm = i1 - i0;
        let xb = &x[i0 * k2..i1 * k2];
        let mut re = vec![0.0; bm * i1];
        let mut im = vec![0.0; bm * i1];
        dgemm_abt(bm, i1, k2, 1.0, xb, k2, x, k2, 0.0, &mut re, i1);
        let mut yb = vec![0.0; bm * k2];
        for (dst, src) in yb.chunks_exact_mut(2).zip(xb.chunks_exact(2)) {
            dst[0] = -src[1];
            dst[1] = src[0];
        }
        dgemm_abt(bm, i1, k2, -1.0, &yb, k2, x, k2, 0.0, &mut im, i1);
        (re, im)
    });

    let mut g = CMatrix::zeros(m, m);
    for (b, (re, im)) in blocks.iter().enumerate() {
        let i0 = b * GRAM_BLOCK;
        let i1 = (i0 + GRAM_BLOCK).min(m);
        for i in i0..i1 {
            let r = i - i0;
            for j in 0..i {
                let z = Complex64::new(re[r * i1 + j], im[r * i1 + j]);
                g.data[i * m + j] = z;
                g.data[j * m + i] = z.conj();
            }
            g.data[i * m + i] = Complex64::new(re[r * i1 + i], 0.0);
        }
    }
    g
}

/// Complex GEMM `C = op(A) * B` with row-major `B` and explicit strides for `A`.
#[allow(clippy::too_many_arguments)]
fn zgemm_raw(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    rsa: usize,
    csa: usize,
    b: &[Complex64],
    ldb: usize,
    c: &mut [Complex64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            c[i * ldc..i * ldc + n].fill(Complex64::new(0.0, 0.0));
        }
        return;
    }
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() >= (k - 1) * ldb + n);
    debug_assert!(c.len() >= (m - 1) * ldc + n);
    // SAFETY: bounds checked above; Complex64 has the layout of [f64; 2].
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            rsa as isize,
            csa as isize,
            b.as_ptr() as *const [f64; 2],
            ldb as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            ldc as isize,
            1,
        );
    }
}

const ROW_BLOCK: usize = 256;

/// `A * B` for row-major complex operands, parallel over row blocks of `A`.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.cols, b.rows, "matmul inner dimension");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = CMatrix::zeros(m, n);
    if n == 0 {
        return c;
    }
    parallel::for_each_chunk_mut(&mut c.data, ROW_BLOCK * n, |blk, out| {
        let i0 = blk * ROW_BLOCK;
        let rows = out.len() / n;
        zgemm_raw(rows, k, n, &a.data[i0 * k..], k, 1, &b.data, n, out, n);
    });
    c
}

/// `A* W` (N × r) for `A` (m × N) and `W` (m × r), parallel over output rows.
///
/// Computed as `conj(A^T conj(W))` since the GEMM backend has no conjugate flag.
pub fn adjoint_matmul(a: &CMatrix, w: &CMatrix) -> CMatrix {
    assert_eq!(a.rows, w.rows, "adjoint_matmul inner dimension");
    let (m, n_feat, r) = (a.rows, a.cols, w.cols);
    let wc: Vec<Complex64> = w.data.iter().map(|z| z.conj()).collect();
    let mut c = CMatrix::zeros(n_feat, r);
    if r == 0 {
        return c;
    }
    parallel::for_each_chunk_mut(&mut c.data, ROW_BLOCK * r, |blk, out| {
        let k0 = blk * ROW_BLOCK;
        let rows = out.len() / r;
        zgemm_raw(rows, m, r, &a.data[k0..], 1, n_feat, &wc, r, out, r);
        for z in out.iter_mut() {
            *z = z.conj();
        }
    });
    c
}

/// Scalar field abstraction shared by the real and complex Cholesky paths.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn re(self) -> f64;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    /// `Σ a_k conj(b_k)`
    fn dot_conj(a: &[Self], b: &[Self]) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn dot_conj(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = [0.0f64; 4];
        let ca = a.chunks_exact(4);
        let cb = b.chunks_exact(4);
        let (ra, rb) = (ca.remainder(), cb.remainder());
        for (x, y) in ca.zip(cb) {
            for l in 0..4 {
                acc[l] += x[l] * y[l];
            }
        }
        let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        for (x, y) in ra.iter().zip(rb) {
            s += x * y;
        }
        s
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let (mut sr, mut si) = ([0.0f64; 2], [0.0f64; 2]);
        let ca = a.chunks_exact(2);
        let cb = b.chunks_exact(2);
        let (ra, rb) = (ca.remainder(), cb.remainder());
        for (x, y) in ca.zip(cb) {
            for l in 0..2 {
                sr[l] += x[l].re * y[l].re + x[l].im * y[l].im;
                si[l] += x[l].im * y[l].re - x[l].re * y[l].im;
            }
        }
        let mut s = Complex64::new(sr[0] + sr[1], si[0] + si[1]);
        for (x, y) in ra.iter().zip(rb) {
            s += x * y.conj();
        }
        s
    }
}

/// In-place lower Cholesky of a Hermitian positive definite `n × n` row-major
/// matrix with `shift` added to the diagonal. On success the lower triangle
/// holds `L` and the strict upper triangle is zeroed. Returns the first
/// failing pivot index otherwise.
///
/// A squared pivot at or below `n·ε` times the mean diagonal is treated as a
/// failure: it is indistinguishable from rounding noise on a singular matrix.
pub fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize, shift: f64) -> Result<(), usize> {
    assert_eq!(a.len(), n * n);
    let mean_diag = (0..n).map(|i| a[i * n + i].re()).sum::<f64>() / n.max(1) as f64;
    let floor = n as f64 * f64::EPSILON * mean_diag.abs();
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = a.split_at_mut(i * n);
            let row_i = &mut tail[..n];
            let s = if j == i {
                let d = row_i[i].re() + shift - T::dot_conj(&row_i[..i], &row_i[..i]).re();
                if !(d > floor) || !d.is_finite() {
                    return Err(i);
                }
                T::from_real(d.sqrt())
            } else {
                let row_j = &head[j * n..j * n + n];
                let dot = T::dot_conj(&row_i[..j], &row_j[..j]);
                (row_i[j] - dot) / row_j[j]
            };
            row_i[j] = s;
        }
        for v in &mut a[i * n + i + 1..(i + 1) * n] {
            *v = T::zero();
        }
    }
    Ok(())
}

/// Solves `L L* x = b` in place for one right-hand side.
pub fn cholesky_solve_in_place<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut s = b[i];
        for (lv, bv) in row.iter().zip(&b[..i]) {
            s = s - *lv * *bv;
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k * n + i].conj() * b[k];
        }
        b[i] = s / l[i * n + i].conj();
    }
}

/// Extreme eigenvalues `(min, max)` of a Hermitian matrix.
pub fn hermitian_extreme_eigenvalues(h: &CMatrix) -> (f64, f64) {
    assert_eq!(h.rows, h.cols);
    let n = h.rows;
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        // Symmetrize to guard the solver against rounding asymmetry.
        (h.get(i, j) + h.get(j, i).conj()) * 0.5
    });
    let ev = m.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Extreme eigenvalues of a real symmetric matrix.
pub fn symmetric_extreme_eigenvalues(s: &RMatrix) -> (f64, f64) {
    assert_eq!(s.rows, s.cols);
    let n = s.rows;
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (s.get(i, j) + s.get(j, i)));
    let ev = m.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
