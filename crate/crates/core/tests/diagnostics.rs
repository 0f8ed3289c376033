use proptest::prelude::*;
use rfol::datagen::{self, LaplaceExpansion};
use rfol::diagnostics::{
    concentration_check, eta_for, fill_in_distance, gram_deviation, loglog_slope, relative_error_matrix,
    relative_test_error,
};
use rfol::rng::Stream;
use rfol::{recover, CollocationGrid, Distribution, FieldSample, RMatrix, RfConfig};

fn unit_square_points(m: usize, seed: u64) -> CollocationGrid {
    let mut s = Stream::new(seed);
    let pts = (0..2 * m).map(|_| s.uniform_in(0.0, 1.0)).collect();
    CollocationGrid::new(2, pts, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
}

#[test]
fn fill_in_matches_dense_probe_grid() {
    let g = unit_square_points(30, 4);
    let k = 1000;
    let mut dense: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let p = [i as f64 / (k - 1) as f64, j as f64 / (k - 1) as f64];
            let d = g
                .points()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            dense = dense.max(d);
        }
    }
    let h = fill_in_distance(&g, 100_000, 7).unwrap();
    assert!(((h - dense) / dense).abs() <= 0.05, "{h} vs {dense}");
}

#[test]
fn fill_in_requires_points_and_probes() {
    let g = CollocationGrid::equispaced_closed(3, 0.0, 1.0).unwrap();
    assert!(fill_in_distance(&g, 10, 0).is_err());
}

#[test]
fn concentration_at_large_feature_count() {
    let m = 10;
    let delta = 0.05;
    let n = 1_000_000;
    let grid = CollocationGrid::equispaced_closed(m, 0.0, 1.0).unwrap();
    let eta = eta_for(n, m, delta);
    let gamma = (m as f64 / eta).ln() * (m as f64 - 1.0);
    let r = concentration_check(&grid, Distribution::Cauchy, gamma, n, 3, delta, 5).unwrap();
    assert!(r.deviations.iter().all(|&d| d <= 2.0 * eta), "{:?} vs {}", r.deviations, 2.0 * eta);
    assert!(gamma >= r.gamma_required * (1.0 - 1e-12));
}

#[test]
fn concentration_invariant_to_point_order() {
    let g = unit_square_points(12, 9);
    let perm: Vec<usize> = (0..12).rev().collect();
    let p = g.permuted(&perm).unwrap();
    let cfg = RfConfig {
        distribution: Distribution::Gaussian,
        gamma: 30.0,
        n_features: 2000,
        seed: 3,
    };
    let a = gram_deviation(&g, &cfg).unwrap();
    let b = gram_deviation(&p, &cfg).unwrap();
    assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
}

#[test]
fn relative_error_rejects_mismatched_grids() {
    let g1 = CollocationGrid::cell_centers_1d(3).unwrap();
    let g2 = CollocationGrid::cell_centers_1d(4).unwrap();
    let a = FieldSample::new(&g1, vec![1.0; 3]).unwrap();
    let b = FieldSample::new(&g2, vec![1.0; 4]).unwrap();
    assert!(relative_test_error(&[a], &[b]).is_err());
}

fn rkhs_on_grid_error(m: usize, n: usize, trial: u64) -> f64 {
    let grid = CollocationGrid::equispaced_closed(m, 0.0, 1.0).unwrap();
    let mut s = Stream::new(100 + trial);
    let target = LaplaceExpansion {
        gamma: 1.0,
        centers: grid.flat_points().to_vec(),
        amplitudes: (0..m).map(|_| s.uniform_in(-1.0, 1.0)).collect(),
    };
    let task = datagen::rkhs_task(m, target).unwrap();
    let cfg = RfConfig {
        distribution: Distribution::Cauchy,
        gamma: 1.0,
        n_features: n,
        seed: 200 + trial,
    };
    let f = recover(&task.grid, &task.sample, &cfg).unwrap();
    let xs: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
    let pred = f.evaluate_many(&xs, 1).unwrap();
    let truth: Vec<f64> = xs.iter().map(|&x| task.target.eval(x)).collect();
    let num: f64 = pred.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn rkhs_regression_error_decays() {
    // The target lies in the span of the limiting kernel at the samples, so
    // only the Monte Carlo error of the features remains.
    let ns = [1000usize, 2000, 4000, 8000, 16000];
    let meds: Vec<f64> = ns
        .iter()
        .map(|&n| median((0..10).map(|t| rkhs_on_grid_error(5, n, t)).collect()))
        .collect();
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&x, &meds);
    assert!((-0.8..=-0.3).contains(&slope), "{slope} {meds:?}");
}

#[test]
fn sample_error_stays_at_solver_tolerance_for_all_n() {
    // Errors measured at the samples themselves sit at solver tolerance.
    let ns = [50usize, 100, 200, 400];
    let task = datagen::gen_rkhs_regression(8, 2.0, 3, 1).unwrap();
    let meds: Vec<f64> = ns
        .iter()
        .map(|&n| {
            median(
                (0..5)
                    .map(|t| {
                        let cfg = RfConfig {
                            distribution: Distribution::Cauchy,
                            gamma: 20.0,
                            n_features: n,
                            seed: t,
                        };
                        let f = recover(&task.grid, &task.sample, &cfg).unwrap();
                        let p = f.evaluate_many(task.grid.flat_points(), 1).unwrap();
                        let num: f64 = p.iter().zip(&task.sample.values).map(|(a, b)| (a - b) * (a - b)).sum();
                        let den: f64 = task.sample.values.iter().map(|b| b * b).sum();
                        (num / den).sqrt().max(1e-17)
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(meds.iter().all(|&e| e <= 1e-8), "{meds:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relative_error_is_scale_invariant(seed in any::<u64>(), scale in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6]) {
        let mut s = Stream::new(seed);
        let truth = RMatrix::from_vec(3, 5, (0..15).map(|_| s.normal()).collect());
        let pred = RMatrix::from_vec(3, 5, (0..15).map(|_| s.normal()).collect());
        let base = relative_error_matrix(&pred, &truth).unwrap();
        let scaled = |m: &RMatrix| RMatrix::from_vec(3, 5, m.as_slice().iter().map(|v| v * scale).collect());
        let other = relative_error_matrix(&scaled(&pred), &scaled(&truth)).unwrap();
        prop_assert!((base - other).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn fill_in_shrinks_when_points_are_added(seed in any::<u64>(), m in 2usize..12, extra in 1usize..12) {
        let big = unit_square_points(m + extra, seed);
        let idx: Vec<usize> = (0..m).collect();
        let small = big.subset(&idx).unwrap();
        let hs = fill_in_distance(&small, 2000, 1).unwrap();
        let hb = fill_in_distance(&big, 2000, 1).unwrap();
        prop_assert!(hb <= hs);
    }
}
