//! Synthetic benchmark data.
//!
//! The advection problems transport an initial profile on the periodic unit
//! interval with unit speed up to `t = 0.5`, so the solution operator is a
//! shift by one half. Grids are cell-centred, `x_j = (j + 0.5) / res`; for even
//! resolutions the output is the input rolled by `res / 2` points, which is
//! exact for indicator-valued data.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{CollocationGrid, FieldSample, OperatorDataset};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::parallel;
use crate::rng::{derive_seed, Stream};

/// Transport distance of the advection benchmarks.
pub const SHIFT: f64 = 0.5;

/// Advection I square-wave parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWave {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl SquareWave {
    pub fn eval(&self, x: f64) -> f64 {
        if (x - self.center).abs() <= 0.5 * self.width {
            self.height
        } else {
            0.0
        }
    }

    fn draw(s: &mut Stream) -> Self {
        let center = s.uniform_in(0.3, 0.7);
        let width = s.uniform_in(0.3, 0.6);
        let height = s.uniform_in(1.0, 2.0);
        SquareWave { center, width, height }
    }
}

/// Advection II profile: a box plus a half-ellipse bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxAndBump {
    pub c1: f64,
    pub w: f64,
    pub h1: f64,
    pub c2: f64,
    pub h2: f64,
    pub a2: f64,
}

impl BoxAndBump {
    pub fn eval(&self, x: f64) -> f64 {
        let boxed = if (x - self.c1).abs() <= self.w { self.h1 } else { 0.0 };
        let d = x - self.c2;
        boxed + (self.h2 * self.h2 - self.a2 * self.a2 * d * d).max(0.0).sqrt()
    }
}

/// Uniform sampling boxes of the Advection II parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Advection2Ranges {
    pub c1: (f64, f64),
    pub w: (f64, f64),
    pub h1: (f64, f64),
    pub c2: (f64, f64),
    pub h2: (f64, f64),
    pub a2: (f64, f64),
}

impl Default for Advection2Ranges {
    fn default() -> Self {
        Advection2Ranges {
            c1: (0.2, 0.4),
            w: (0.05, 0.15),
            h1: (0.5, 1.5),
            c2: (0.6, 0.8),
            h2: (0.5, 1.5),
            a2: (5.0, 15.0),
        }
    }
}

impl Advection2Ranges {
    fn draw(&self, s: &mut Stream) -> BoxAndBump {
        let mut u = |r: (f64, f64)| s.uniform_in(r.0, r.1);
        BoxAndBump {
            c1: u(self.c1),
            w: u(self.w),
            h1: u(self.h1),
            c2: u(self.c2),
            h2: u(self.h2),
            a2: u(self.a2),
        }
    }
}

/// Gaussian random field parameters for Advection III, covariance
/// `(-Δ + tau² I)^(-power)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Advection3Params {
    pub tau: f64,
    pub power: f64,
}

impl Default for Advection3Params {
    fn default() -> Self {
        Advection3Params { tau: 3.0, power: 2.0 }
    }
}

/// Default Advection III resolution.
pub const ADVECTION3_RESOLUTION: usize = 200;

/// Shifts samples on a cell-centred periodic grid by [`SHIFT`].
fn transport(grid: &CollocationGrid, u: &[f64], profile: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = u.len();
    let s = SHIFT * n as f64;
    if s.fract() == 0.0 {
        let s = s as usize % n;
        (0..n).map(|j| u[(j + n - s) % n]).collect()
    } else {
        grid.points().map(|x| profile((x[0] - SHIFT).rem_euclid(1.0))).collect()
    }
}

fn build_dataset<P, F>(m: usize, resolution: usize, seed: u64, draw: P) -> Result<OperatorDataset>
where
    P: Fn(&mut Stream, &CollocationGrid) -> Result<F> + Sync + Send,
    F: Fn(f64) -> f64,
{
    if resolution < 2 {
        return Err(Error::param("resolution must be at least 2"));
    }
    if m == 0 {
        return Err(Error::param("sample count must be positive"));
    }
    let grid = CollocationGrid::cell_centers_1d(resolution)?;
    let pairs = parallel::map_range(m, |l| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut s = Stream::new(derive_seed(seed, l as u64));
        let profile = draw(&mut s, &grid)?;
        let u: Vec<f64> = grid.points().map(|x| profile(x[0])).collect();
        let v = transport(&grid, &u, &profile);
        Ok((u, v))
    });
    let mut inputs = Vec::with_capacity(m * resolution);
    let mut outputs = Vec::with_capacity(m * resolution);
    for p in pairs {
        let (u, v) = p?;
        inputs.extend(u);
        outputs.extend(v);
    }
    OperatorDataset::new(
        grid.clone(),
        grid,
        RMatrix::from_vec(m, resolution, inputs),
        RMatrix::from_vec(m, resolution, outputs),
    )
}

/// Square-wave parameters of the `m` samples [`gen_advection1`] would draw.
pub fn advection1_parameters(m: usize, seed: u64) -> Vec<SquareWave> {
    (0..m)
        .map(|l| SquareWave::draw(&mut Stream::new(derive_seed(seed, l as u64))))
        .collect()
}

/// Advection I: square waves `h·1[c - b/2, c + b/2]` with
/// `(c, b, h) ~ U([0.3,0.7] × [0.3,0.6] × [1,2])`, shifted by one half.
pub fn gen_advection1(m: usize, resolution: usize, seed: u64) -> Result<OperatorDataset> {
    build_dataset(m, resolution, seed, |s, _| {
        let w = SquareWave::draw(s);
        Ok(move |x: f64| w.eval(x))
    })
}

/// Advection II: box plus half-ellipse profiles with the given parameter boxes.
pub fn gen_advection2_with(m: usize, resolution: usize, seed: u64, ranges: &Advection2Ranges) -> Result<OperatorDataset> {
    build_dataset(m, resolution, seed, |s, _| {
        let p = ranges.draw(s);
        Ok(move |x: f64| p.eval(x))
    })
}

/// Advection II with the default parameter boxes.
pub fn gen_advection2(m: usize, resolution: usize, seed: u64) -> Result<OperatorDataset> {
    gen_advection2_with(m, resolution, seed, &Advection2Ranges::default())
}

/// `-1 + 2·1{v ≥ 0}` pointwise.
pub fn sign_field(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Advection III: `u = -1 + 2·1{ũ ≥ 0}` with `ũ` a periodic Gaussian field.
pub fn gen_advection3_with(m: usize, resolution: usize, seed: u64, params: &Advection3Params) -> Result<OperatorDataset> {
    build_dataset(m, resolution, seed, |s, grid| {
        let g = gp_sample(grid, params.tau, params.power, s.next_u64())?;
        let vals = sign_field(&g.values);
        let n = vals.len();
        // Piecewise-constant reading of the cell values for off-grid shifts.
        Ok(move |x: f64| vals[((x * n as f64).floor() as usize).min(n - 1)])
    })
}

/// Advection III with `tau = 3`, `power = 2`.
pub fn gen_advection3(m: usize, resolution: usize, seed: u64) -> Result<OperatorDataset> {
    gen_advection3_with(m, resolution, seed, &Advection3Params::default())
}

/// Checks that `grid` is an equispaced periodic tensor grid and returns its shape.
fn periodic_shape(grid: &CollocationGrid) -> Result<Vec<usize>> {
    let shape = grid
        .shape()
        .ok_or_else(|| Error::data("spectral sampling needs a regular tensor grid"))?
        .to_vec();
    let d = grid.dim();
    let h: Vec<f64> = (0..d)
        .map(|i| (grid.domain_hi()[i] - grid.domain_lo()[i]) / shape[i] as f64)
        .collect();
    let first = grid.point(0);
    let offset: Vec<f64> = (0..d).map(|i| (first[i] - grid.domain_lo()[i]) / h[i]).collect();
    for (flat, p) in grid.points().enumerate() {
        let mut rem = flat;
        for ax in (0..d).rev() {
            let j = rem % shape[ax];
            rem /= shape[ax];
            let expect = grid.domain_lo()[ax] + (j as f64 + offset[ax]) * h[ax];
            if (p[ax] - expect).abs() > 1e-9 * h[ax] {
                return Err(Error::data(format!(
                    "grid point {flat} {p:?} breaks the equispaced periodic layout"
                )));
            }
        }
    }
    Ok(shape)
}

/// In-place FFT of a row-major tensor along every axis.
fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total = data.len();
    let mut stride = 1;
    for ax in (0..shape.len()).rev() {
        let n = shape[ax];
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                for (k, z) in line.iter_mut().enumerate() {
                    *z = data[base + off + k * stride];
                }
                fft.process(&mut line);
                for (k, z) in line.iter().enumerate() {
                    data[base + off + k * stride] = *z;
                }
            }
        }
        stride *= n;
    }
}

/// Eigenvalue of the discrete periodic `-Δ` for mode `k` of an `n`-point axis
/// with spacing `h`.
pub fn laplacian_symbol(k: usize, n: usize, h: f64) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
    4.0 * s * s / (h * h)
}

/// Spectral filter `(|k|² + tau²)^(-power/2)` per mode, zero at the mean mode.
/// The field covariance is `Σ_k filter_k² e_k e_k*` with the unit-modulus
/// modes `e_k(x_j) = exp(2πi k·j / n)`.
pub fn gp_filter(shape: &[usize], lengths: &[f64], tau: f64, power: f64) -> Vec<f64> {
    let total: usize = shape.iter().product();
    let d = shape.len();
    (0..total)
        .map(|flat| {
            if flat == 0 {
                return 0.0;
            }
            let mut rem = flat;
            let mut lap = 0.0;
            for ax in (0..d).rev() {
                let k = rem % shape[ax];
                rem /= shape[ax];
                lap += laplacian_symbol(k, shape[ax], lengths[ax] / shape[ax] as f64);
            }
            (lap + tau * tau).powf(-0.5 * power)
        })
        .collect()
}

/// Periodic Gaussian random field with covariance `(-Δ + tau² I)^(-power)`.
///
/// White noise is transformed to Fourier space (yielding i.i.d. coefficients
/// with exact conjugate symmetry), each mode is scaled by the square root of
/// the spectral density, the mean mode is dropped, and the result is
/// transformed back. The variance of each point is `Σ_k (|k|² + tau²)^(-power)`
/// over the non-zero modes.
pub fn gp_sample(grid: &CollocationGrid, tau: f64, power: f64, seed: u64) -> Result<FieldSample> {
    if !tau.is_finite() || !power.is_finite() {
        return Err(Error::param("tau and power must be finite"));
    }
    let shape = periodic_shape(grid)?;
    let lengths: Vec<f64> = (0..grid.dim()).map(|i| grid.domain_hi()[i] - grid.domain_lo()[i]).collect();
    let filter = gp_filter(&shape, &lengths, tau, power);
    let n = grid.len();
    let mut s = Stream::new(seed);
    let mut buf: Vec<Complex64> = (0..n).map(|_| Complex64::new(s.normal(), 0.0)).collect();
    fft_nd(&mut buf, &shape, false);
    for (z, f) in buf.iter_mut().zip(&filter) {
        *z *= *f;
    }
    fft_nd(&mut buf, &shape, true);
    let scale = 1.0 / (n as f64).sqrt();
    let mut values: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    for v in &mut values {
        *v -= mean;
    }
    FieldSample::new(grid, values)
}

/// Finite Laplace-kernel expansion `f(x) = Σ_i a_i exp(-γ|x - z_i|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceExpansion {
    pub gamma: f64,
    pub centers: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl LaplaceExpansion {
    pub fn eval(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.amplitudes)
            .map(|(z, a)| a * (-self.gamma * (x - z).abs()).exp())
            .sum()
    }
}

/// Regression task for a Laplace-kernel expansion on an equispaced grid.
#[derive(Debug, Clone)]
pub struct RkhsTask {
    pub grid: CollocationGrid,
    pub sample: FieldSample,
    pub target: LaplaceExpansion,
}

/// `m` equispaced points on [0, 1] sampling a random expansion with centers
/// `z_i ~ U[0,1]` and amplitudes `a_i ~ U[-1,1]`.
pub fn gen_rkhs_regression(m: usize, kernel_gamma: f64, n_centers: usize, seed: u64) -> Result<RkhsTask> {
    let mut s = Stream::new(seed);
    let mut centers = Vec::with_capacity(n_centers);
    let mut amplitudes = Vec::with_capacity(n_centers);
    for _ in 0..n_centers {
        centers.push(s.uniform_in(0.0, 1.0));
        amplitudes.push(s.uniform_in(-1.0, 1.0));
    }
    rkhs_task(m, LaplaceExpansion { gamma: kernel_gamma, centers, amplitudes })
}

/// Regression task for a given expansion.
pub fn rkhs_task(m: usize, target: LaplaceExpansion) -> Result<RkhsTask> {
    if m < 2 {
        return Err(Error::param("regression grid needs at least 2 points"));
    }
    if !(target.gamma.is_finite() && target.gamma > 0.0) {
        return Err(Error::param("kernel gamma must be positive"));
    }
    let grid = CollocationGrid::equispaced_closed(m, 0.0, 1.0)?;
    let sample = crate::domain::sampling_apply(&grid, |x| target.eval(x[0]))?;
    Ok(RkhsTask { grid, sample, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_wave_transport_example() {
        let w = SquareWave { center: 0.5, width: 0.4, height: 1.0 };
        let g = CollocationGrid::cell_centers_1d(40).unwrap();
        let u: Vec<f64> = g.points().map(|x| w.eval(x[0])).collect();
        let v = transport(&g, &u, |x| w.eval(x));
        for (j, x) in g.points().enumerate() {
            let x = x[0];
            let inside = x >= 0.8 || x <= 0.2;
            assert_eq!(v[j], if inside { 1.0 } else { 0.0 }, "x = {x}");
        }
    }

    #[test]
    fn advection1_shift_and_mass() {
        let d = gen_advection1(50, 40, 1).unwrap();
        for l in 0..d.len() {
            let u = d.input(l);
            let v = d.output(l);
            for j in 0..40 {
                assert_eq!(v[j].to_bits(), u[(j + 20) % 40].to_bits());
            }
            assert_eq!(u.iter().sum::<f64>(), v.iter().sum::<f64>());
            let h = u.iter().cloned().fold(0.0, f64::max);
            assert!(u.iter().all(|&x| x == 0.0 || x == h));
        }
    }

    #[test]
    fn odd_resolution_uses_exact_profile() {
        let d = gen_advection1(5, 41, 2).unwrap();
        let params = advection1_parameters(5, 2);
        for (l, w) in params.iter().enumerate() {
            for (j, x) in d.output_grid.points().enumerate() {
                assert_eq!(d.output(l)[j], w.eval((x[0] - 0.5).rem_euclid(1.0)));
            }
        }
    }

    #[test]
    fn advection2_degenerate_profiles() {
        let p = BoxAndBump { c1: 0.3, w: 0.1, h1: 0.0, c2: 0.7, h2: 1.0, a2: 10.0 };
        assert_eq!(p.eval(0.3), 0.0);
        assert!((p.eval(0.7) - 1.0).abs() < 1e-15);
        assert!((p.eval(0.75) - (1.0f64 - 0.25).sqrt()).abs() < 1e-12);
        let q = BoxAndBump { h1: 1.5, h2: 0.0, ..p };
        let sq = SquareWave { center: 0.3, width: 0.2, height: 1.5 };
        for i in 0..100 {
            let x = i as f64 / 100.0 + 0.005;
            assert_eq!(q.eval(x), sq.eval(x));
        }
    }

    #[test]
    fn advection3_is_signed_and_shifted() {
        let d = gen_advection3(20, 200, 3).unwrap();
        assert!(d.inputs.as_slice().iter().all(|&v| v == 1.0 || v == -1.0));
        for l in 0..d.len() {
            for j in 0..200 {
                assert_eq!(d.output(l)[j], d.input(l)[(j + 100) % 200]);
            }
        }
    }

    #[test]
    fn gp_zero_mean_and_requires_regular_grid() {
        let g = CollocationGrid::cell_centers_1d(64).unwrap();
        for seed in 0..20 {
            let s = gp_sample(&g, 3.0, 2.0, seed).unwrap();
            assert!(s.values.iter().sum::<f64>().abs() / 64.0 < 1e-12);
        }
        let irregular = CollocationGrid::new(1, vec![0.1, 0.2, 0.7], vec![0.0], vec![1.0]).unwrap();
        assert!(gp_sample(&irregular, 3.0, 2.0, 0).is_err());
        let g2 = CollocationGrid::cell_centers(&[8, 16]).unwrap();
        let s = gp_sample(&g2, 3.0, 2.0, 1).unwrap();
        assert_eq!(s.values.len(), 128);
        assert!(s.values.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn rkhs_closed_form() {
        let t = rkhs_task(5, LaplaceExpansion { gamma: 2.0, centers: vec![0.5], amplitudes: vec![1.0] }).unwrap();
        assert_eq!(t.target.eval(0.5), 1.0);
        assert_eq!(t.target.eval(0.0), (-1.0f64).exp());
        let z = rkhs_task(5, LaplaceExpansion { gamma: 2.0, centers: vec![0.5], amplitudes: vec![0.0] }).unwrap();
        assert!(z.sample.values.iter().all(|&v| v == 0.0));
    }
}
