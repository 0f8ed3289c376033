//! Random Fourier frequencies and feature matrices.

use num_complex::Complex64;

use crate::domain::{Distribution, GridId, RfConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::parallel;
use crate::rng::Stream;

/// Scales below this are treated as numerical zero.
pub const MIN_GAMMA: f64 = 1e-100;

/// `N` frequency vectors plus the recipe that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEnsemble {
    dim: usize,
    count: usize,
    frequencies: Vec<f64>,
    distribution: Distribution,
    gamma: f64,
    seed: u64,
}

/// Dense `m × N` matrix with entries `exp(i<ω_k, x_j>)`.
pub type FeatureMatrix = CMatrix;

fn check_params(dim: usize, count: usize, gamma: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("feature dimension must be positive"));
    }
    if count == 0 {
        return Err(Error::param("feature count must be positive"));
    }
    if !(gamma.is_finite() && gamma >= MIN_GAMMA) {
        return Err(Error::param(format!(
            "feature scale gamma must be finite and at least {MIN_GAMMA:e}, got {gamma:e}"
        )));
    }
    Ok(())
}

/// Tensor-product Cauchy frequencies with scale `gamma`.
///
/// Each coordinate is `gamma * tan(pi * (U - 1/2))`, `U` uniform on (0,1),
/// drawn frequency by frequency, coordinate by coordinate.
pub fn sample_cauchy(dim: usize, count: usize, gamma: f64, seed: u64) -> Result<FeatureEnsemble> {
    check_params(dim, count, gamma)?;
    let mut s = Stream::new(seed);
    let frequencies = (0..dim * count)
        .map(|_| gamma * (std::f64::consts::PI * (s.uniform_open() - 0.5)).tan())
        .collect();
    Ok(FeatureEnsemble {
        dim,
        count,
        frequencies,
        distribution: Distribution::Cauchy,
        gamma,
        seed,
    })
}

/// Gaussian frequencies, each coordinate `N(0, 2 gamma)`.
pub fn sample_gaussian(dim: usize, count: usize, gamma: f64, seed: u64) -> Result<FeatureEnsemble> {
    check_params(dim, count, gamma)?;
    let mut s = Stream::new(seed);
    let sd = (2.0 * gamma).sqrt();
    let frequencies = (0..dim * count).map(|_| sd * s.normal()).collect();
    Ok(FeatureEnsemble {
        dim,
        count,
        frequencies,
        distribution: Distribution::Gaussian,
        gamma,
        seed,
    })
}

/// Samples according to `cfg` in dimension `dim`.
pub fn sample(cfg: &RfConfig, dim: usize) -> Result<FeatureEnsemble> {
    match cfg.distribution {
        Distribution::Cauchy => sample_cauchy(dim, cfg.n_features, cfg.gamma, cfg.seed),
        Distribution::Gaussian => sample_gaussian(dim, cfg.n_features, cfg.gamma, cfg.seed),
    }
}

impl FeatureEnsemble {
    /// Ensemble with explicit frequencies (`count × dim`, row-major).
    pub fn from_parts(
        dim: usize,
        frequencies: Vec<f64>,
        distribution: Distribution,
        gamma: f64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || frequencies.is_empty() || frequencies.len() % dim != 0 {
            return Err(Error::data(format!(
                "frequency array of length {} does not split into vectors of dimension {dim}",
                frequencies.len()
            )));
        }
        if let Some(p) = frequencies.iter().position(|w| !w.is_finite()) {
            return Err(Error::data(format!("non-finite frequency entry at position {p}")));
        }
        Ok(FeatureEnsemble {
            dim,
            count: frequencies.len() / dim,
            frequencies,
            distribution,
            gamma,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> RfConfig {
        RfConfig {
            distribution: self.distribution,
            gamma: self.gamma,
            n_features: self.count,
            seed: self.seed,
        }
    }

    pub fn frequency(&self, k: usize) -> &[f64] {
        &self.frequencies[k * self.dim..(k + 1) * self.dim]
    }

    /// Flattened `count × dim` frequencies.
    pub fn flat_frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Phases `<ω_k, x>` for every `k`.
    pub fn phases(&self, x: &[f64]) -> Vec<f64> {
        self.frequencies
            .chunks_exact(self.dim)
            .map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Feature row `exp(i<ω_k, x>)`.
    pub fn feature_row(&self, x: &[f64]) -> Vec<Complex64> {
        self.phases(x)
            .into_iter()
            .map(|p| {
                let (s, c) = p.sin_cos();
                Complex64::new(c, s)
            })
            .collect()
    }

    /// Monte-Carlo kernel estimate `(1/N) Σ_k exp(i<ω_k, x - y>)`.
    pub fn empirical_kernel(&self, x: &[f64], y: &[f64]) -> Complex64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let sum: Complex64 = self.feature_row(&d).into_iter().sum();
        sum / self.count as f64
    }
}

/// Kernel whose Fourier transform is the frequency density: Laplace for
/// Cauchy, RBF for Gaussian.
pub fn limit_kernel(distribution: Distribution, gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    match distribution {
        Distribution::Cauchy => {
            (-gamma * x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>()).exp()
        }
        Distribution::Gaussian => {
            (-gamma * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
        }
    }
}

const ASSEMBLE_ROWS: usize = 32;
const EVAL_BLOCK_ENTRIES: usize = 1 << 22;

/// Feature matrix for flattened points (`m × dim`, row-major).
pub fn assemble(ensemble: &FeatureEnsemble, points: &[f64], dim: usize) -> Result<FeatureMatrix> {
    if dim != ensemble.dim {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim,
            got: dim,
            context: "point dimension vs ensemble dimension",
        });
    }
    if points.len() % dim != 0 {
        return Err(Error::data("point array length is not a multiple of the dimension"));
    }
    let m = points.len() / dim;
    let n = ensemble.count;
    let mut a = CMatrix::zeros(m, n);
    parallel::for_each_chunk_mut(a.as_mut_slice(), ASSEMBLE_ROWS * n, |blk, out| {
        let r0 = blk * ASSEMBLE_ROWS;
        let rows = out.len() / n;
        let pts = &points[r0 * dim..(r0 + rows) * dim];
        let mut ph = vec![0.0; rows * n];
        linalg::real_abt(rows, n, dim, pts, &ensemble.frequencies, &mut ph);
        for (z, p) in out.iter_mut().zip(&ph) {
            let (s, c) = p.sin_cos();
            *z = Complex64::new(c, s);
        }
    });
    Ok(a)
}

/// Feature matrix for a list of points.
pub fn assemble_rows(ensemble: &FeatureEnsemble, points: &[Vec<f64>]) -> Result<FeatureMatrix> {
    let dim = points.first().map_or(ensemble.dim, Vec::len);
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
                context: "point dimension",
            });
        }
        flat.extend_from_slice(p);
    }
    assemble(ensemble, &flat, dim)
}

/// A trained random feature function `x ↦ Re Σ_k c_k exp(i<ω_k, x>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureInterpolant {
    pub ensemble: FeatureEnsemble,
    pub coefficients: Vec<Complex64>,
    pub train_grid_id: Option<GridId>,
    pub jitter_used: f64,
}

impl RandomFeatureInterpolant {
    pub fn new(ensemble: FeatureEnsemble, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != ensemble.count {
            return Err(Error::DimensionMismatch {
                expected: ensemble.count,
                got: coefficients.len(),
                context: "coefficient count vs ensemble size",
            });
        }
        Ok(RandomFeatureInterpolant {
            ensemble,
            coefficients,
            train_grid_id: None,
            jitter_used: 0.0,
        })
    }

    /// Values at flattened points.
    pub fn evaluate_many(&self, points: &[f64], dim: usize) -> Result<Vec<f64>> {
        if dim != self.ensemble.dim {
            return Err(Error::DimensionMismatch {
                expected: self.ensemble.dim,
                got: dim,
                context: "point dimension vs ensemble dimension",
            });
        }
        if points.len() % dim != 0 {
            return Err(Error::data("point array length is not a multiple of the dimension"));
        }
        let c = CMatrix::from_vec(self.coefficients.len(), 1, self.coefficients.clone());
        // Bound the feature block to about 64 MiB.
        let block = (EVAL_BLOCK_ENTRIES / self.ensemble.count.max(1)).max(1);
        let mut out = Vec::with_capacity(points.len() / dim);
        for chunk in points.chunks(block * dim) {
            let a = assemble(&self.ensemble, chunk, dim)?;
            out.extend(linalg::matmul(&a, &c).as_slice().iter().map(|z| z.re));
        }
        Ok(out)
    }
}

/// `Re Σ_k c_k exp(i<ω_k, x>)`.
pub fn evaluate(interp: &RandomFeatureInterpolant, x: &[f64]) -> Result<f64> {
    if x.len() != interp.ensemble.dim {
        return Err(Error::DimensionMismatch {
            expected: interp.ensemble.dim,
            got: x.len(),
            context: "evaluation point dimension",
        });
    }
    let mut acc = 0.0;
    for (p, c) in interp.ensemble.phases(x).into_iter().zip(&interp.coefficients) {
        let (s, co) = p.sin_cos();
        acc += c.re * co - c.im * s;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_validation() {
        assert!(sample_cauchy(1, 10, 0.0, 1).is_err());
        assert!(sample_cauchy(1, 10, -1.0, 1).is_err());
        assert!(sample_gaussian(1, 10, 1e-300, 1).is_err());
        assert!(sample_gaussian(0, 10, 1.0, 1).is_err());
        assert!(sample_gaussian(1, 0, 1.0, 1).is_err());
        assert!(sample_gaussian(1, 10, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn cauchy_median_abs_is_gamma() {
        let e = sample_cauchy(1, 1_000_000, 1.0, 3).unwrap();
        let mut a: Vec<f64> = e.flat_frequencies().iter().map(|w| w.abs()).collect();
        let mid = a.len() / 2;
        let (_, med, _) = a.select_nth_unstable_by(mid, |x, y| x.total_cmp(y));
        assert!((*med - 1.0).abs() < 0.01, "median {med}");
    }

    #[test]
    fn cauchy_characteristic_function() {
        let e = sample_cauchy(1, 1_000_000, 1.0, 4).unwrap();
        let v = e.empirical_kernel(&[2.0], &[0.0]);
        assert!((v.re - (-2.0f64).exp()).abs() < 5e-3, "{v}");
    }

    #[test]
    fn gaussian_variance() {
        let e = sample_gaussian(1, 1_000_000, 0.5, 5).unwrap();
        let w = e.flat_frequencies();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn origin_row_and_zero_frequency_column() {
        let e = FeatureEnsemble::from_parts(2, vec![0.0, 0.0, 1.5, -2.0, 3.0, 0.25], Distribution::Cauchy, 1.0, 0)
            .unwrap();
        let a = assemble(&e, &[0.0, 0.0, 0.3, 0.7, -1.0, 2.0], 2).unwrap();
        for k in 0..3 {
            assert_eq!(a.get(0, k), Complex64::new(1.0, 0.0));
        }
        for j in 0..3 {
            assert_eq!(a.get(j, 0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn assemble_matches_entrywise_and_rejects_dim_mismatch() {
        let e = sample_gaussian(3, 2, 2.0, 6).unwrap();
        let pts = [0.1, 0.2, 0.3, -0.5, 0.0, 0.9, 1.0, 1.0, -1.0];
        let a = assemble(&e, &pts, 3).unwrap();
        for j in 0..3 {
            for k in 0..2 {
                let w = e.frequency(k);
                let ph: f64 = (0..3).map(|i| w[i] * pts[j * 3 + i]).sum();
                let z = Complex64::new(ph.cos(), ph.sin());
                assert!((a.get(j, k) - z).norm() < 1e-12);
                assert!((a.get(j, k).norm() - 1.0).abs() < 1e-12);
            }
        }
        let err = assemble(&e, &[0.0, 0.0], 2).unwrap_err();
        assert!(err.to_string().contains('3') && err.to_string().contains('2'));
    }

    #[test]
    fn unit_coefficient_on_zero_frequency_is_constant() {
        let e = FeatureEnsemble::from_parts(1, vec![0.0, 5.0], Distribution::Cauchy, 1.0, 0).unwrap();
        let f = RandomFeatureInterpolant::new(e, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
            .unwrap();
        for x in [-3.0, 0.0, 0.4, 10.0] {
            assert_eq!(evaluate(&f, &[x]).unwrap(), 1.0);
        }
        assert!(evaluate(&f, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn same_seed_reproduces_bits() {
        let a = sample_cauchy(4, 100, 0.3, 99).unwrap();
        let b = sample_cauchy(4, 100, 0.3, 99).unwrap();
        let c = sample_cauchy(4, 100, 0.3, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.flat_frequencies(), c.flat_frequencies());
    }
}
