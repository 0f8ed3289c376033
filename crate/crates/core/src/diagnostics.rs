//! Empirical checks of the theory: fill-in distance, Gram concentration,
//! test error, and error/time decay studies.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen;
use crate::domain::{min_separation, CollocationGrid, Distribution, FieldSample, RfConfig};
use crate::error::{Error, Result};
use crate::features;
use crate::kernels;
use crate::linalg::{self, RMatrix};
use crate::operator::{self, TrainConfig};
use crate::parallel;
use crate::rng::{derive_seed, Stream};

/// Minimum probe budget for [`fill_in_distance`].
pub const MIN_PROBES: usize = 1000;

/// Constant in the feature-count condition `N ≥ C η⁻² m log(m / 2δ)`.
pub const CONCENTRATION_C: f64 = 6.0;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton point `i` in `[0,1)^d`, shifted modulo 1 by `shift`.
fn halton(i: u64, shift: &[f64], out: &mut [f64]) {
    for (a, o) in out.iter_mut().enumerate() {
        *o = (radical_inverse(i + 1, PRIMES[a]) + shift[a]).fract();
    }
}

/// Lower bound on `h_X = max_{x∈D} min_j ‖x - x_j‖₂` from `probe_count`
/// randomly shifted Halton probes, plus the domain corners.
pub fn fill_in_distance(grid: &CollocationGrid, probe_count: usize, seed: u64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::data("fill-in distance of an empty grid"));
    }
    if probe_count < MIN_PROBES {
        return Err(Error::param(format!("probe_count must be at least {MIN_PROBES}")));
    }
    let d = grid.dim();
    if d > PRIMES.len() {
        return Err(Error::param(format!("fill-in distance supports dimension up to {}", PRIMES.len())));
    }
    let lo = grid.domain_lo();
    let hi = grid.domain_hi();
    let mut s = Stream::new(seed);
    let shift: Vec<f64> = (0..d).map(|_| s.uniform_in(0.0, 1.0)).collect();
    let nearest = |p: &[f64]| -> f64 {
        grid.points()
            .map(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    let probes = parallel::map_range(probe_count, |i| {
        let mut u = vec![0.0; d];
        halton(i as u64, &shift, &mut u);
        let p: Vec<f64> = (0..d).map(|a| lo[a] + (hi[a] - lo[a]) * u[a]).collect();
        nearest(&p)
    });
    let mut best = probes.into_iter().fold(0.0, f64::max);
    if d <= 10 {
        for c in 0..(1usize << d) {
            let p: Vec<f64> = (0..d).map(|a| if c >> a & 1 == 1 { hi[a] } else { lo[a] }).collect();
            best = best.max(nearest(&p));
        }
    }
    Ok(best.sqrt())
}

/// Outcome of a concentration experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `‖(1/N) A A* - I‖₂` per trial.
    pub deviations: Vec<f64>,
    pub p95: f64,
    /// Theoretical bound `2η` with `η = sqrt(C m log(m / 2δ) / N)`.
    pub eta_bound: f64,
    pub eta: f64,
    pub separation: f64,
    /// Scale needed by the theory, `(1/K) log(m / η)`.
    pub gamma_required: f64,
}

impl ConcentrationReport {
    pub fn count_within(&self, bound: f64) -> usize {
        self.deviations.iter().filter(|&&d| d <= bound).count()
    }
}

/// `η` solving `N = C η⁻² m log(m / 2δ)`.
pub fn eta_for(n_features: usize, m: usize, delta: f64) -> f64 {
    let l = (m as f64 / (2.0 * delta)).ln().max(0.0);
    (CONCENTRATION_C * m as f64 * l / n_features as f64).sqrt()
}

/// Feature count `⌈C η⁻² m log(m / 2δ)⌉`.
pub fn n_for(eta: f64, m: usize, delta: f64) -> usize {
    (CONCENTRATION_C * m as f64 * (m as f64 / (2.0 * delta)).ln() / (eta * eta)).ceil() as usize
}

/// Empirical 95th percentile (nearest rank).
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Spectral deviation `‖(1/N) A A* - I‖₂` of one ensemble on `grid`.
pub fn gram_deviation(grid: &CollocationGrid, cfg: &RfConfig) -> Result<f64> {
    let ens = features::sample(cfg, grid.dim())?;
    let a = features::assemble(&ens, grid.flat_points(), grid.dim())?;
    let mut g = linalg::gram(&a);
    let inv_n = 1.0 / cfg.n_features as f64;
    let m = g.rows();
    for i in 0..m {
        for j in 0..m {
            let v = if i == j {
                // Unit-modulus rows: the diagonal is exactly N.
                num_complex::Complex64::new(0.0, 0.0)
            } else {
                g.get(i, j) * inv_n
            };
            g.set(i, j, v);
        }
    }
    let (lo, hi) = linalg::hermitian_extreme_eigenvalues(&g);
    Ok(lo.abs().max(hi.abs()))
}

/// Per-trial Gram deviations with fresh ensembles.
pub fn concentration_check(
    grid: &CollocationGrid,
    distribution: Distribution,
    gamma: f64,
    n_features: usize,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta must lie in (0, 1)"));
    }
    let m = grid.len();
    let deviations = parallel::map_range(trials, |t| {
        let cfg = RfConfig {
            distribution,
            gamma,
            n_features,
            seed: derive_seed(seed, t as u64),
        };
        gram_deviation(grid, &cfg)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let eta = eta_for(n_features, m, delta);
    let separation = if m >= 2 { min_separation(grid)? } else { f64::INFINITY };
    Ok(ConcentrationReport {
        p95: percentile(&deviations, 0.95),
        deviations,
        eta_bound: 2.0 * eta,
        eta,
        separation,
        gamma_required: (m as f64 / eta).ln().max(0.0) / separation,
    })
}

/// `sqrt(Σ‖G - Ĝ‖² / Σ‖G‖²)` with the uniform grid quadrature.
pub fn relative_test_error(predictions: &[FieldSample], truths: &[FieldSample]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
            context: "prediction count vs truth count",
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in predictions.iter().zip(truths) {
        if p.grid_id != t.grid_id {
            return Err(Error::data("prediction and truth live on different grids"));
        }
        if p.values.len() != t.values.len() {
            return Err(Error::DimensionMismatch {
                expected: t.values.len(),
                got: p.values.len(),
                context: "prediction length",
            });
        }
        num += p.values.iter().zip(&t.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        den += t.values.iter().map(|b| b * b).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::data("relative error undefined for all-zero truths"));
    }
    Ok((num / den).sqrt())
}

/// [`relative_test_error`] on row-major prediction and truth matrices.
pub fn relative_error_matrix(pred: &RMatrix, truth: &RMatrix) -> Result<f64> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(Error::data("prediction and truth matrices differ in shape"));
    }
    let num: f64 = pred.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.as_slice().iter().map(|b| b * b).sum();
    if den == 0.0 {
        return Err(Error::data("relative error undefined for all-zero truths"));
    }
    Ok((num / den).sqrt())
}

/// Generator configuration for a decay study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum DecayTask {
    /// Operator learning on Advection I.
    Advection1 {
        train: usize,
        test: usize,
        resolution: usize,
        distribution: Distribution,
        gamma: f64,
    },
    /// Recovery of a Laplace-kernel expansion from `m` equispaced samples,
    /// scored on a fine grid.
    Rkhs {
        m: usize,
        kernel_gamma: f64,
        n_centers: usize,
        distribution: Distribution,
        gamma: f64,
        fine: usize,
    },
}

/// One row of a decay study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n_features: usize,
    pub median_error: f64,
    pub median_seconds: f64,
}

/// Result of [`decay_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub error_slope: f64,
    pub time_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Error and training time of one run; `(error, seconds)`.
pub fn decay_trial(task: &DecayTask, n_features: usize, trial_seed: u64) -> Result<(f64, f64)> {
    let data_seed = derive_seed(trial_seed, 0);
    let feat_seed = derive_seed(trial_seed, 1);
    match *task {
        DecayTask::Advection1 {
            train,
            test,
            resolution,
            distribution,
            gamma,
        } => {
            let tr = datagen::gen_advection1(train, resolution, data_seed)?;
            let te = datagen::gen_advection1(test, resolution, derive_seed(data_seed, 1 << 40))?;
            let cfg = TrainConfig::new(distribution, gamma, n_features, feat_seed);
            let t0 = Instant::now();
            let model = operator::train_operator(&tr, &cfg)?;
            let secs = t0.elapsed().as_secs_f64();
            let pred = model.predict_batch(&te.inputs)?;
            Ok((relative_error_matrix(&pred, &te.outputs)?, secs))
        }
        DecayTask::Rkhs {
            m,
            kernel_gamma,
            n_centers,
            distribution,
            gamma,
            fine,
        } => {
            let t = datagen::gen_rkhs_regression(m, kernel_gamma, n_centers, data_seed)?;
            let cfg = RfConfig {
                distribution,
                gamma,
                n_features,
                seed: feat_seed,
            };
            let t0 = Instant::now();
            let f = operator::recover(&t.grid, &t.sample, &cfg)?;
            let secs = t0.elapsed().as_secs_f64();
            let xs: Vec<f64> = (0..fine).map(|i| (i as f64 + 0.5) / fine as f64).collect();
            let pred = f.evaluate_many(&xs, 1)?;
            let truth: Vec<f64> = xs.iter().map(|&x| t.target.eval(x)).collect();
            let num: f64 = pred.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum();
            let den: f64 = truth.iter().map(|b| b * b).sum();
            Ok(((num / den).sqrt(), secs))
        }
    }
}

/// Median error and training time per feature count over `trials` seeds.
///
/// Trial `t` uses the same data and feature seeds at every `N`.
pub fn decay_study(task: &DecayTask, n_list: &[usize], trials: usize, seed: u64) -> Result<DecayReport> {
    if n_list.len() < 4 {
        return Err(Error::param("decay study needs at least four feature counts"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("feature counts must be strictly increasing"));
    }
    if trials == 0 {
        return Err(Error::param("decay study needs at least one trial"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let runs = parallel::map_range(trials, |t| decay_trial(task, n, derive_seed(seed, t as u64)))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let errs: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let secs: Vec<f64> = runs.iter().map(|r| r.1).collect();
        rows.push(DecayRow {
            n_features: n,
            median_error: median(&errs),
            median_seconds: median(&secs),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n_features as f64).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.median_error.max(f64::MIN_POSITIVE)).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.median_seconds.max(1e-9)).collect();
    Ok(DecayReport {
        error_slope: loglog_slope(&ns, &es),
        time_slope: loglog_slope(&ns, &ts),
        rows,
    })
}

/// Random feature interpolation against Laplace-kernel interpolation on the
/// same points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelLimitRow {
    pub seed: u64,
    pub sup_diff: f64,
}

/// For each seed: `m` uniform points in [0,1] with `U[-1,1]` targets, Cauchy
/// features of scale `gamma`, and the sup-norm gap between the two
/// interpolants on `test_points` uniform test points.
pub fn kernel_limit_check(
    m: usize,
    gamma: f64,
    n_features: usize,
    seeds: &[u64],
    test_points: usize,
) -> Result<Vec<KernelLimitRow>> {
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut s = Stream::new(seed);
        let x: Vec<f64> = (0..m).map(|_| s.uniform_in(0.0, 1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| s.uniform_in(-1.0, 1.0)).collect();
        let xt: Vec<f64> = (0..test_points).map(|_| s.uniform_in(0.0, 1.0)).collect();
        let grid = CollocationGrid::new(1, x.clone(), vec![0.0], vec![1.0])?;
        let sample = FieldSample::new(&grid, y.clone())?;
        let rf = operator::recover(
            &grid,
            &sample,
            &RfConfig {
                distribution: Distribution::Cauchy,
                gamma,
                n_features,
                seed: derive_seed(seed, 1),
            },
        )?;
        let rf_pred = rf.evaluate_many(&xt, 1)?;
        let kf = kernels::kernel_fit_multi(
            &crate::domain::KernelSpec::Laplace { gamma },
            &RMatrix::from_vec(m, 1, x),
            &RMatrix::from_vec(m, 1, y),
        )?;
        let k_pred = kf.predict_batch(&RMatrix::from_vec(test_points, 1, xt))?;
        let sup_diff = rf_pred
            .iter()
            .zip(k_pred.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(KernelLimitRow { seed, sup_diff });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_in_two_endpoints() {
        let g = CollocationGrid::new(1, vec![0.0, 1.0], vec![0.0], vec![1.0]).unwrap();
        let h = fill_in_distance(&g, 1000, 0).unwrap();
        assert!(h <= 0.5 && h > 0.499, "{h}");
        assert!(fill_in_distance(&g, 999, 0).is_err());
    }

    #[test]
    fn fill_in_equispaced_is_half_spacing() {
        let g = CollocationGrid::equispaced_closed(11, 0.0, 1.0).unwrap();
        let h = fill_in_distance(&g, 4000, 1).unwrap();
        assert!(h <= 0.05 + 1e-15 && h > 0.0495, "{h}");
    }

    #[test]
    fn single_point_concentration_is_exact() {
        let g = CollocationGrid::new(1, vec![0.4], vec![0.0], vec![1.0]).unwrap();
        let r = concentration_check(&g, Distribution::Cauchy, 1.0, 100, 5, 0.05, 0).unwrap();
        assert!(r.deviations.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn relative_error_examples() {
        let g = CollocationGrid::cell_centers_1d(2).unwrap();
        let f = |v: Vec<f64>| FieldSample::new(&g, v).unwrap();
        let truths = vec![f(vec![1.0, 0.0]), f(vec![0.0, 1.0])];
        let preds = vec![f(vec![1.0, 1.0]), f(vec![0.0, 1.0])];
        assert!((relative_test_error(&preds, &truths).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(relative_test_error(&truths, &truths).unwrap(), 0.0);
        let zeros = vec![f(vec![0.0, 0.0]), f(vec![0.0, 0.0])];
        assert_eq!(relative_test_error(&zeros, &truths).unwrap(), 1.0);
        assert!(relative_test_error(&truths, &zeros).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn eta_and_n_are_inverse() {
        let n = n_for(0.25, 50, 0.05);
        assert_eq!(n, 29831);
        assert!(eta_for(n, 50, 0.05) <= 0.25);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 0.95), 95.0);
    }
}
