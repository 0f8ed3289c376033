use rfol::datagen::SquareWave;
use rfol::rng::Stream;
use rfol::{min_separation, sampling_apply, CollocationGrid, Error, KernelSpec, OperatorDataset, RMatrix};

fn three_points() -> CollocationGrid {
    CollocationGrid::new(1, vec![0.0, 0.5, 1.0], vec![0.0], vec![1.0]).unwrap()
}

#[test]
fn sampling_examples() {
    let g = three_points();
    assert_eq!(sampling_apply(&g, |x| x[0]).unwrap().values, vec![0.0, 0.5, 1.0]);
    assert_eq!(sampling_apply(&g, |_| 1.0).unwrap().values, vec![1.0; 3]);
    let sq = SquareWave {
        center: 0.45,
        width: 0.35,
        height: 1.7,
    };
    let g40 = CollocationGrid::cell_centers_1d(40).unwrap();
    let v = sampling_apply(&g40, |x| sq.eval(x[0])).unwrap().values;
    assert!(v.iter().all(|&y| y == 0.0 || y == 1.7));
}

#[test]
fn non_finite_sample_names_point() {
    let g = three_points();
    let err = sampling_apply(&g, |x| 1.0 / (x[0] - 0.5)).unwrap_err();
    match &err {
        Error::NonFinite { index, .. } => assert_eq!(*index, 1),
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("0.5"), "{err}");
}

#[test]
fn separation_examples() {
    let g = CollocationGrid::new(1, vec![0.0, 1.0], vec![0.0], vec![1.0]).unwrap();
    assert_eq!(min_separation(&g).unwrap(), 1.0);
    let e = CollocationGrid::equispaced_closed(11, 0.0, 1.0).unwrap();
    assert!((min_separation(&e).unwrap() - 0.1).abs() < 1e-15);
    let one = CollocationGrid::new(1, vec![0.3], vec![0.0], vec![1.0]).unwrap();
    assert!(min_separation(&one).is_err());
}

#[test]
fn separation_matches_brute_force() {
    let mut s = Stream::new(20);
    let pts: Vec<f64> = (0..40).map(|_| s.uniform_in(0.0, 1.0)).collect();
    let g = CollocationGrid::new(2, pts.clone(), vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..20 {
        for j in 0..20 {
            if i != j {
                let d = ((pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
    }
    assert_eq!(min_separation(&g).unwrap(), best);
}

#[test]
fn grid_invariants_enforced() {
    assert!(CollocationGrid::new(1, vec![0.2, 1.2], vec![0.0], vec![1.0]).is_err());
    assert!(CollocationGrid::new(1, vec![0.2, 0.2], vec![0.0], vec![1.0]).is_err());
    assert!(CollocationGrid::new(1, vec![0.2], vec![1.0], vec![0.0]).is_err());
    assert!(CollocationGrid::new(2, vec![0.2, 0.3, 0.4], vec![0.0; 2], vec![1.0; 2]).is_err());
    let g = CollocationGrid::new(2, vec![0.5, 0.5], vec![0.0, -1.0], vec![2.0, 2.0]).unwrap();
    assert_eq!(g.volume(), 6.0);
}

#[test]
fn dataset_invariants_enforced() {
    let g = three_points();
    assert!(OperatorDataset::new(g.clone(), g.clone(), RMatrix::zeros(0, 3), RMatrix::zeros(0, 3)).is_err());
    assert!(OperatorDataset::new(g.clone(), g.clone(), RMatrix::zeros(2, 3), RMatrix::zeros(1, 3)).is_err());
    assert!(OperatorDataset::new(g.clone(), g.clone(), RMatrix::zeros(1, 2), RMatrix::zeros(1, 3)).is_err());
    let mut bad = RMatrix::zeros(1, 3);
    bad.set(0, 2, f64::INFINITY);
    assert!(OperatorDataset::new(g.clone(), g.clone(), bad, RMatrix::zeros(1, 3)).is_err());
    // Input and output grids may live in different dimensions.
    let g2 = CollocationGrid::cell_centers(&[2, 2]).unwrap();
    assert!(OperatorDataset::new(g, g2, RMatrix::zeros(1, 3), RMatrix::zeros(1, 4)).is_ok());
}

#[test]
fn kernel_spec_json_shape() {
    let s: KernelSpec = serde_json::from_str(r#"{"kind":"matern","sigma":0.5,"nu":2.5}"#).unwrap();
    assert_eq!(s, KernelSpec::Matern { sigma: 0.5, nu: 2.5 });
    assert!(s.validate().is_ok());
    assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
}
