use proptest::prelude::*;
use specsurvey::model::{generate_map, sample_shadowing_field, shadowing_cov_matrix, ShadowingSampler};
use specsurvey::{GaussianModelParams, GridGeometry, Point2, Transmitter};

fn params() -> GaussianModelParams {
    GaussianModelParams::default()
}

#[test]
fn marginal_variance_over_1000_seeds() {
    let g = GridGeometry::new(6, 6, 10.0, Point2::default()).unwrap();
    let sampler = ShadowingSampler::new(&g, &params()).unwrap();
    let draws: Vec<Vec<f64>> = (0..1000).map(|s| sampler.sample(s)).collect();
    for k in [0, 14, 35] {
        let mean = draws.iter().map(|d| d[k]).sum::<f64>() / 1000.0;
        let var = draws.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((9.0..=11.0).contains(&var), "point {k}: variance {var}");
    }
}

#[test]
fn empirical_covariance_matches_gudmundson() {
    // points 0, 50 and 100 m apart along one row
    let g = GridGeometry::new(2, 3, 50.0, Point2::default()).unwrap();
    let p = params();
    let sampler = ShadowingSampler::new(&g, &p).unwrap();
    let n = 4000;
    let draws: Vec<Vec<f64>> = (0..n).map(|s| sampler.sample(s)).collect();
    for (a, b, d) in [(0, 0, 0.0), (0, 1, 50.0), (0, 2, 100.0)] {
        let c = draws.iter().map(|x| x[a] * x[b]).sum::<f64>() / n as f64;
        let want = p.shadow_var * (-d / p.shadow_corr_dist_m).exp2();
        assert!((c - want).abs() <= 0.15 * want, "d={d}: {c} vs {want}");
    }
}

#[test]
fn maps_are_bit_reproducible() {
    let g = GridGeometry::new(8, 8, 3.0, Point2::default()).unwrap();
    let txs = [
        Transmitter { position: Point2::new(3.0, 4.0), height_m: 20.0, power_dbm: 10.0, carrier_hz: 2.4e9 },
        Transmitter { position: Point2::new(15.0, 1.0), height_m: 20.0, power_dbm: 10.0, carrier_hz: 2.4e9 },
    ];
    let p = GaussianModelParams { fading_var: 1.0, ..params() };
    let a = generate_map(&g, &txs, &p, 42).unwrap();
    let b = generate_map(&g, &txs, &p, 42).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate_map(&g, &txs, &p, 43).unwrap());
    assert_ne!(a.shadowing_fields[0], a.shadowing_fields[1]);
    for k in 0..g.len() {
        let m = a.per_tx_power_db[0][k].max(a.per_tx_power_db[1][k]);
        assert!(a.combined_power_db[k] >= m);
    }
}

#[test]
fn full_size_32x32_map() {
    let g = GridGeometry::new(32, 32, 3.0, Point2::default()).unwrap();
    let f = sample_shadowing_field(&g, &params(), 1).unwrap();
    assert_eq!(f.len(), 1024);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_of_random_points_factorizes(
        pts in prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 1..60),
        dup in 0usize..3,
    ) {
        let mut pts: Vec<Point2> = pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        // repeated points make the matrix singular without the jitter
        for i in 0..dup.min(pts.len()) {
            pts.push(pts[i]);
        }
        let p = params();
        let mut c = shadowing_cov_matrix(&pts, &pts, &p);
        prop_assert_eq!(&c, &c.transpose());
        for i in 0..c.nrows() {
            c[(i, i)] += 1e-9 * p.shadow_var;
        }
        prop_assert!(nalgebra::Cholesky::new(c).is_some());
    }
}
