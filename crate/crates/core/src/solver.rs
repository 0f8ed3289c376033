//! Min-norm interpolation through a Cholesky factorization of the Gram matrix.
//!
//! For `A` (m × N, m ≤ N) the min-norm solution of `A c = y` is
//! `c = A* (A A*)^{-1} y`. The Gram matrix is factorized once; if the plain
//! factorization fails, a diagonal shift is escalated along
//! [`JITTER_LADDER`] (relative to the mean diagonal, which is `N` for
//! feature matrices). When a shift was needed the dual solve `G w = y` is
//! followed by a few sweeps of iterative refinement against the assembled
//! Gram matrix. The returned coefficients are always `A* w`, so every
//! solution lies in the row space of `A`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{self, CMatrix, RMatrix, Scalar};
use crate::parallel;

/// Relative diagonal shifts tried in order.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-14, 1e-12, 1e-10, 1e-8];

/// Maximum refinement sweeps after a shifted factorization.
pub const MAX_REFINEMENT_STEPS: usize = 10;

/// Residual target: `‖A c - y‖∞ ≤ RESIDUAL_TOL · max(1, ‖y‖∞)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Cholesky factor of `A A* + jitter I`.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    size: usize,
    gram: CMatrix,
    factor: CMatrix,
    jitter_used: f64,
    scale_hint: usize,
}

/// Factorizes a Hermitian matrix, escalating the diagonal shift on failure.
/// Returns the factor and the absolute shift used.
pub(crate) fn factorize_with_ladder<T: Scalar>(
    g: &[T],
    n: usize,
    min_eig: impl FnOnce() -> f64,
) -> Result<(Vec<T>, f64)> {
    let scale = if n == 0 {
        1.0
    } else {
        (0..n).map(|i| g[i * n + i].re()).sum::<f64>() / n as f64
    };
    if !scale.is_finite() || g.iter().any(|v| !v.re().is_finite() || !v.abs().is_finite()) {
        return Err(Error::Conditioning {
            max_jitter: 0.0,
            min_eigenvalue: f64::NAN,
        });
    }
    let mut work = vec![T::zero(); n * n];
    for step in JITTER_LADDER {
        let shift = step * scale;
        work.copy_from_slice(g);
        if linalg::cholesky_in_place(&mut work, n, shift).is_ok() {
            return Ok((work, shift));
        }
    }
    Err(Error::Conditioning {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * scale,
        min_eigenvalue: min_eig(),
    })
}

/// Solves `L L* X = B` for every column of row-major `B` (n × r), in parallel
/// over columns.
pub(crate) fn solve_columns<T: Scalar>(l: &[T], n: usize, b: &[T], r: usize) -> Vec<T> {
    let mut cols: Vec<Vec<T>> = (0..r).map(|j| (0..n).map(|i| b[i * r + j]).collect()).collect();
    parallel::for_each_mut(&mut cols, |c| linalg::cholesky_solve_in_place(l, n, c));
    let mut out = vec![T::zero(); n * r];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            out[i * r + j] = *v;
        }
    }
    out
}

/// Factorizes `A A*`.
pub fn gram_factorize(a: &FeatureMatrix) -> Result<GramFactorization> {
    if a.rows() > a.cols() {
        return Err(Error::param(format!(
            "min-norm interpolation needs at least as many features as constraints ({} < {})",
            a.cols(),
            a.rows()
        )));
    }
    let g = linalg::gram(a);
    factorize_gram(g, a.cols())
}

/// Factorizes an already assembled Gram matrix.
pub fn factorize_gram(g: CMatrix, scale_hint: usize) -> Result<GramFactorization> {
    let n = g.rows();
    let (factor, jitter_used) =
        factorize_with_ladder(g.as_slice(), n, || linalg::hermitian_extreme_eigenvalues(&g).0)?;
    Ok(GramFactorization {
        size: n,
        gram: g,
        factor: CMatrix::from_vec(n, n, factor),
        jitter_used,
        scale_hint,
    })
}

impl GramFactorization {
    pub fn size(&self) -> usize {
        self.size
    }

    /// The unshifted Gram matrix `A A*`.
    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// Lower-triangular factor.
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    /// Absolute diagonal shift (0 when the plain factorization succeeded).
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn scale_hint(&self) -> usize {
        self.scale_hint
    }

    /// `(A A* + jitter I)^{-1} B` for an `m × r` right-hand side.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows(), self.size, "right-hand side row count");
        let out = solve_columns(self.factor.as_slice(), self.size, b.as_slice(), b.cols());
        CMatrix::from_vec(self.size, b.cols(), out)
    }
}

/// Outcome of a min-norm solve.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    /// `N × r` coefficients, column `j` for right-hand side `j`.
    pub coefficients: CMatrix,
    pub jitter_used: f64,
    /// `max_j ‖A c_j − y_j‖∞ / max(1, ‖y_j‖∞)`.
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

fn real_to_complex(y: &RMatrix) -> CMatrix {
    CMatrix::from_vec(
        y.rows(),
        y.cols(),
        y.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )
}

fn relative_residuals(a: &FeatureMatrix, c: &CMatrix, y: &CMatrix) -> (CMatrix, f64) {
    let ac = linalg::matmul(a, c);
    let r = CMatrix::from_vec(
        y.rows(),
        y.cols(),
        y.as_slice().iter().zip(ac.as_slice()).map(|(u, v)| u - v).collect(),
    );
    let cols = y.cols();
    let mut worst: f64 = 0.0;
    for j in 0..cols {
        let mut rmax: f64 = 0.0;
        let mut ymax: f64 = 0.0;
        for i in 0..y.rows() {
            rmax = rmax.max(r.get(i, j).norm());
            ymax = ymax.max(y.get(i, j).norm());
        }
        worst = worst.max(rmax / ymax.max(1.0));
    }
    (r, worst)
}

/// Min-norm coefficients for every column of `y` against one factorization.
pub fn solve_min_norm(a: &FeatureMatrix, fact: &GramFactorization, y: &RMatrix) -> Result<MinNormSolution> {
    if y.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: y.rows(),
            context: "right-hand side rows vs feature matrix rows",
        });
    }
    if fact.size() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: fact.size(),
            context: "factorization size vs feature matrix rows",
        });
    }
    let yc = real_to_complex(y);
    let mut w = fact.solve(&yc);
    let mut steps = 0;
    if fact.jitter_used() > 0.0 {
        let dual_residual = |w: &CMatrix| {
            let gw = linalg::matmul(&fact.gram, w);
            let r: Vec<Complex64> = yc.as_slice().iter().zip(gw.as_slice()).map(|(u, v)| u - v).collect();
            let worst = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            (CMatrix::from_vec(yc.rows(), yc.cols(), r), worst)
        };
        let (mut r, mut res) = dual_residual(&w);
        while steps < MAX_REFINEMENT_STEPS {
            let dw = fact.solve(&r);
            let mut w_new = w.clone();
            for (u, d) in w_new.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                *u += d;
            }
            let (r_new, res_new) = dual_residual(&w_new);
            if !(res_new < 0.99 * res) {
                break;
            }
            w = w_new;
            r = r_new;
            res = res_new;
            steps += 1;
        }
    }
    let c = linalg::adjoint_matmul(a, &w);
    let (_, res) = relative_residuals(a, &c, &yc);
    Ok(MinNormSolution {
        coefficients: c,
        jitter_used: fact.jitter_used(),
        relative_residual: res,
        refinement_steps: steps,
    })
}

/// Min-norm solution of `A c = y`.
pub fn min_norm_fit(a: &FeatureMatrix, y: &[f64]) -> Result<Vec<Complex64>> {
    let ym = RMatrix::from_vec(y.len(), 1, y.to_vec());
    Ok(min_norm_fit_multi(a, &ym)?.into_vec())
}

/// Min-norm solutions for all columns of `Y` (m × m'), one shared factorization.
pub fn min_norm_fit_multi(a: &FeatureMatrix, y: &RMatrix) -> Result<CMatrix> {
    if y.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: y.rows(),
            context: "right-hand side rows vs feature matrix rows",
        });
    }
    let fact = gram_factorize(a)?;
    Ok(solve_min_norm(a, &fact, y)?.coefficients)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of `(1/N) A A*`.
pub fn gram_spectrum_bounds(a: &FeatureMatrix) -> (f64, f64) {
    let mut g = linalg::gram(a);
    let inv_n = 1.0 / a.cols() as f64;
    for z in g.as_mut_slice() {
        *z *= inv_n;
    }
    linalg::hermitian_extreme_eigenvalues(&g)
}
