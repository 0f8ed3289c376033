//! Kernel interpolation baselines: RBF, Laplace and Matérn.

use std::sync::Arc;

use crate::domain::KernelSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};
use crate::parallel;
use crate::solver;

/// Chebyshev coefficients of Temme's auxiliary gamma functions on [-1, 1]
/// (as in SLATEC/GSL `bessel_temme`).
const G1_DAT: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_842,
    0.001_862_451_930_072_068_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087_4e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_210_2e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_DAT: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn cheb_eval(c: &[f64], x: f64) -> f64 {
    let y2 = 2.0 * x;
    let (mut d, mut dd) = (0.0, 0.0);
    for &cj in c[1..].iter().rev() {
        let t = d;
        d = y2 * d - dd + cj;
        dd = t;
    }
    x * d - dd + 0.5 * c[0]
}

/// `(1/Γ(1+μ), 1/Γ(1-μ), g1, g2)` for |μ| ≤ 1/2.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let x = 4.0 * mu.abs() - 1.0;
    let g1 = cheb_eval(&G1_DAT, x);
    let g2 = cheb_eval(&G2_DAT, x);
    (1.0 / (g2 - mu * g1), 1.0 / (g2 + mu * g1), g1, g2)
}

/// `e^x K_μ(x)` and `e^x K_{μ+1}(x)` by Temme's series, |μ| ≤ 1/2, x < 2.
fn k_scaled_temme(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = std::f64::consts::PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON { 1.0 } else { pi_mu / pi_mu.sin() };
    let sinhrat = if sigma.abs() < f64::EPSILON { 1.0 } else { sigma.sinh() / sigma };
    let (g_1pmu, g_1mmu, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * g_1pmu;
    let mut qk = 0.5 * half_x_mu * g_1mmu;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..15_000 {
        let k = k as f64;
        fk = (k * fk + pk + qk) / (k * k - mu * mu);
        ck *= half_x * half_x / k;
        pk /= k - mu;
        qk /= k + mu;
        let hk = -k * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    let ex = x.exp();
    (sum0 * ex, sum1 * 2.0 / x * ex)
}

/// `e^x K_μ(x)` and `e^x K_{μ+1}(x)` by Steed's continued fraction, x ≥ 2.
fn k_scaled_steed(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;
    let mut s = 1.0 + bqi * delhi;
    for i in 2..10_000 {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi = (bi * di - 1.0) * delhi;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    (k_mu, k_mu * (mu + x + 0.5 - hi) / x)
}

/// `ln(e^x K_ν(x))` for ν ≥ 0, x > 0.
pub fn ln_bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x > 0.0, "bessel K needs nu >= 0, x > 0");
    let n = (nu + 0.5).floor();
    let mu = nu - n;
    let (mut k_cur, mut k_next) = if x < 2.0 { k_scaled_temme(mu, x) } else { k_scaled_steed(mu, x) };
    let mut ln_scale = 0.0;
    for i in 0..n as usize {
        let k_new = 2.0 * (mu + i as f64 + 1.0) / x * k_next + k_cur;
        k_cur = k_next;
        k_next = k_new;
        if k_next > 1e250 {
            ln_scale += k_next.ln();
            k_cur /= k_next;
            k_next = 1.0;
        }
    }
    k_cur.ln() + ln_scale
}

/// Modified Bessel function of the second kind `K_ν(x)`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    (ln_bessel_k_scaled(nu.abs(), x) - x).exp()
}

/// `ln Γ(x)` for x > 0.
fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

fn matern(sigma: f64, nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / sigma;
    if z == 0.0 {
        return 1.0;
    }
    let ln_k = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() + ln_bessel_k_scaled(nu, z) - z;
    ln_k.exp().min(1.0)
}

/// Kernel value `k(x, y)`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
            context: "kernel argument dimensions",
        });
    }
    Ok(kernel_unchecked(spec, x, y))
}

fn kernel_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Rbf { gamma } => {
            (-gamma * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
        }
        KernelSpec::Laplace { gamma } => (-gamma * x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>()).exp(),
        KernelSpec::Matern { sigma, nu } => {
            let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            matern(sigma, nu, r)
        }
    }
}

/// Kernel matrix between the rows of `x` and the rows of `y`.
pub fn kernel_matrix(spec: &KernelSpec, x: &RMatrix, y: &RMatrix) -> RMatrix {
    assert_eq!(x.cols(), y.cols(), "kernel_matrix dimensions");
    let rows = parallel::map_range(x.rows(), |i| {
        let xi = x.row(i);
        (0..y.rows()).map(|j| kernel_unchecked(spec, xi, y.row(j))).collect::<Vec<f64>>()
    });
    RMatrix::from_vec(x.rows(), y.rows(), rows.concat())
}

/// Multi-output kernel interpolant sharing one set of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    pub spec: KernelSpec,
    pub centers: Arc<RMatrix>,
    /// `M × r` dual coefficients, column `j` for output `j`.
    pub weights: RMatrix,
    pub jitter_used: f64,
}

/// Single-output kernel interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelInterpolant {
    pub spec: KernelSpec,
    pub centers: Arc<RMatrix>,
    pub weights: Vec<f64>,
    pub jitter_used: f64,
}

/// Fits every column of `y` by kernel interpolation at the rows of `x`.
pub fn kernel_fit_multi(spec: &KernelSpec, x: &RMatrix, y: &RMatrix) -> Result<KernelFit> {
    spec.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.rows(),
            context: "target rows vs center count",
        });
    }
    if x.rows() == 0 {
        return Err(Error::data("kernel fit needs at least one center"));
    }
    let n = x.rows();
    let k = kernel_matrix(spec, x, x);
    let (l, jitter_used) = solver::factorize_with_ladder(k.as_slice(), n, || linalg::symmetric_extreme_eigenvalues(&k).0)?;
    let w = solver::solve_columns(&l, n, y.as_slice(), y.cols());
    Ok(KernelFit {
        spec: *spec,
        centers: Arc::new(x.clone()),
        weights: RMatrix::from_vec(n, y.cols(), w),
        jitter_used,
    })
}

/// One interpolant per target column, sharing a single factorization.
pub fn kernel_fit(spec: &KernelSpec, x: &RMatrix, y: &RMatrix) -> Result<Vec<KernelInterpolant>> {
    Ok(kernel_fit_multi(spec, x, y)?.interpolants())
}

impl KernelFit {
    pub fn interpolants(&self) -> Vec<KernelInterpolant> {
        (0..self.weights.cols())
            .map(|j| KernelInterpolant {
                spec: self.spec,
                centers: Arc::clone(&self.centers),
                weights: self.weights.column(j),
                jitter_used: self.jitter_used,
            })
            .collect()
    }

    /// Predictions for every row of `x`, one column per output.
    pub fn predict_batch(&self, x: &RMatrix) -> Result<RMatrix> {
        if x.cols() != self.centers.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.centers.cols(),
                got: x.cols(),
                context: "query dimension",
            });
        }
        let k = kernel_matrix(&self.spec, x, &self.centers);
        let (m, n, r) = (x.rows(), self.centers.rows(), self.weights.cols());
        let mut out = vec![0.0; m * r];
        let wt = RMatrix::from_fn(r, n, |i, j| self.weights.get(j, i));
        linalg::real_abt(m, r, n, k.as_slice(), wt.as_slice(), &mut out);
        Ok(RMatrix::from_vec(m, r, out))
    }
}

/// `Σ_ℓ w_ℓ k(x, center_ℓ)`.
pub fn kernel_predict(interp: &KernelInterpolant, x: &[f64]) -> Result<f64> {
    if x.len() != interp.centers.cols() {
        return Err(Error::DimensionMismatch {
            expected: interp.centers.cols(),
            got: x.len(),
            context: "query dimension",
        });
    }
    Ok((0..interp.centers.rows())
        .map(|l| interp.weights[l] * kernel_unchecked(&interp.spec, x, interp.centers.row(l)))
        .sum())
}
