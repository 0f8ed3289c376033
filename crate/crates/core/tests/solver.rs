use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rfol::rng::Stream;
use rfol::solver::{factorize_gram, solve_min_norm};
use rfol::{gram_factorize, gram_spectrum_bounds, linalg, min_norm_fit, min_norm_fit_multi, CMatrix, Error, RMatrix};

fn random_phases(m: usize, n: usize, seed: u64) -> CMatrix {
    let mut s = Stream::new(seed);
    let data = (0..m * n)
        .map(|_| {
            let t = s.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            Complex64::new(t.cos(), t.sin())
        })
        .collect();
    CMatrix::from_vec(m, n, data)
}

fn to_na(a: &CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
}

fn naive_aat(a: &CMatrix) -> Vec<Complex64> {
    let (m, n) = (a.rows(), a.cols());
    let mut g = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..n {
                g[i * m + j] += a.get(i, k) * a.get(j, k).conj();
            }
        }
    }
    g
}

// Cyclic Jacobi on a real symmetric matrix; returns all eigenvalues.
fn jacobi_eigenvalues(mut s: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| s[i * n + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q * n + q] - s[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (s[k * n + p], s[k * n + q]);
                    s[k * n + p] = c * akp - sn * akq;
                    s[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (s[p * n + k], s[q * n + k]);
                    s[p * n + k] = c * apk - sn * aqk;
                    s[q * n + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i * n + i]).collect()
}

#[test]
fn factor_reproduces_direct_gram() {
    let a = random_phases(4, 16, 3);
    let f = gram_factorize(&a).unwrap();
    let l = f.factor();
    let direct = naive_aat(&a);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut v = Complex64::new(0.0, 0.0);
            for k in 0..4 {
                v += l.get(i, k) * l.get(j, k).conj();
            }
            let target = direct[i * 4 + j] + if i == j { f.jitter_used() } else { 0.0 };
            num += (v - target).norm_sqr();
            den += target.norm_sqr();
        }
    }
    assert!((num / den).sqrt() <= 1e-10);
}

#[test]
fn matches_svd_pseudo_inverse() {
    let a = random_phases(3, 8, 11);
    let y = [0.7, -1.3, 2.2];
    let c = min_norm_fit(&a, &y).unwrap();
    let pinv = to_na(&a).pseudo_inverse(1e-12).unwrap();
    let yv = DVector::from_iterator(3, y.iter().map(|&v| Complex64::new(v, 0.0)));
    let oracle = pinv * yv;
    for (u, v) in c.iter().zip(oracle.iter()) {
        assert!((u - v).norm() <= 1e-8, "{u} vs {v}");
    }
}

#[test]
fn identity_rhs_gives_pseudo_inverse() {
    let a = random_phases(5, 13, 2);
    let pinv = min_norm_fit_multi(&a, &RMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
    let ap = linalg::matmul(&a, &pinv);
    assert!(ap.max_abs_diff(&CMatrix::identity(5)) <= 1e-8);
    let apa = linalg::matmul(&ap, &a);
    assert!(apa.max_abs_diff(&a) <= 1e-8 * a.frobenius_norm());
    let pap = linalg::matmul(&linalg::matmul(&pinv, &a), &pinv);
    assert!(pap.max_abs_diff(&pinv) <= 1e-8 * pinv.frobenius_norm());
}

#[test]
fn multi_rhs_matches_column_solves() {
    let a = random_phases(6, 20, 4);
    let mut s = Stream::new(9);
    let y = RMatrix::from_vec(6, 4, (0..24).map(|_| s.uniform_in(-1.0, 1.0)).collect());
    let c = min_norm_fit_multi(&a, &y).unwrap();
    for j in 0..4 {
        let cj = min_norm_fit(&a, &y.column(j)).unwrap();
        for k in 0..20 {
            assert!((c.get(k, j) - cj[k]).norm() <= 1e-12);
        }
    }
}

#[test]
fn spectrum_bounds_match_jacobi() {
    let a = random_phases(5, 30, 8);
    let g = naive_aat(&a);
    // Real embedding [[Re, -Im], [Im, Re]] carries each eigenvalue twice.
    let n = 10;
    let mut s = vec![0.0; n * n];
    for i in 0..5 {
        for j in 0..5 {
            let z = g[i * 5 + j] / 30.0;
            s[i * n + j] = z.re;
            s[(i + 5) * n + j + 5] = z.re;
            s[i * n + j + 5] = -z.im;
            s[(i + 5) * n + j] = z.im;
        }
    }
    let ev = jacobi_eigenvalues(s, n);
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (blo, bhi) = gram_spectrum_bounds(&a);
    assert!((blo - lo).abs() <= 1e-8 && (bhi - hi).abs() <= 1e-8, "({blo},{bhi}) vs ({lo},{hi})");
}

#[test]
fn scaled_unitary_bounds_are_one() {
    let a = CMatrix::from_fn(3, 12, |j, k| {
        let t = 2.0 * std::f64::consts::PI * (j * k) as f64 / 12.0;
        Complex64::new(t.cos(), t.sin())
    });
    let (lo, hi) = gram_spectrum_bounds(&a);
    assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
}

#[test]
fn singular_gram_reports_conditioning() {
    let g = CMatrix::from_vec(
        2,
        2,
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    );
    match factorize_gram(g, 2) {
        Err(Error::Conditioning { min_eigenvalue, max_jitter }) => {
            assert!((min_eigenvalue + 1.0).abs() < 1e-12);
            assert!((max_jitter - 1e-8).abs() < 1e-20);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn jitter_is_smallest_successful_step() {
    let mut a = random_phases(4, 10, 1);
    let r = a.row(0).to_vec();
    a.row_mut(2).copy_from_slice(&r);
    let f = gram_factorize(&a).unwrap();
    let j = f.jitter_used() / 10.0;
    assert!([1e-14, 1e-12, 1e-10, 1e-8].iter().any(|s| (j - s).abs() <= 1e-6 * s), "{j}");
    let y = RMatrix::from_vec(4, 1, vec![1.0, 0.0, 1.0, 0.0]);
    let sol = solve_min_norm(&a, &f, &y).unwrap();
    assert!(sol.relative_residual <= 1e-6, "{}", sol.relative_residual);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn min_norm_beats_other_interpolants(seed in any::<u64>(), m in 2usize..8, extra in 1usize..20) {
        let n = m + extra;
        let a = random_phases(m, n, seed);
        let mut s = Stream::new(seed ^ 7);
        let y: Vec<f64> = (0..m).map(|_| s.normal()).collect();
        let c = DVector::from_vec(min_norm_fit(&a, &y).unwrap());
        let an = to_na(&a);
        let pinv = an.clone().pseudo_inverse(1e-12).unwrap();
        let proj = &pinv * &an;
        for _ in 0..5 {
            let z = DVector::from_fn(n, |_, _| Complex64::new(s.normal(), s.normal()));
            let null = &z - &proj * &z;
            prop_assert!(c.norm() <= (&c + &null).norm() * (1.0 + 1e-12));
        }
        let perp = &c - &proj * &c;
        prop_assert!(perp.norm() <= 1e-8 * c.norm());
    }

    #[test]
    fn concentration_bounds_control_operator_norms(seed in any::<u64>(), m in 1usize..6, n in 40usize..120) {
        let a = random_phases(m, n, seed);
        let (lo, hi) = gram_spectrum_bounds(&a);
        let eta = (1.0 - lo).abs().max((hi - 1.0).abs()) / 2.0;
        prop_assume!(2.0 * eta < 1.0);
        let sv = to_na(&a).singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let nf = n as f64;
        prop_assert!(smax * smax <= nf * (1.0 + 2.0 * eta) * (1.0 + 1e-10));
        prop_assert!(1.0 / (smin * smin) <= (1.0 + 1e-10) / (nf * (1.0 - 2.0 * eta)));
    }
}
