use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specsurvey::kriging::{batch_mean, prior_posterior};
use specsurvey::model::{generate_map, Sensor};
use specsurvey::online::OnlineSession;
use specsurvey::{
    batch_posterior, GaussianModelParams, GridGeometry, Interpolation, Observation, OnlinePrior, Point2, Posterior,
    PriorMean, Transmitter,
};

fn tx() -> Transmitter {
    Transmitter {
        position: Point2::new(20.0, 12.0),
        height_m: 20.0,
        power_dbm: 10.0,
        carrier_hz: 2.4e9,
    }
}

fn random_points(grid: &GridGeometry, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = grid.extent();
    (0..n).map(|_| Point2::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h)).collect()
}

fn observe(map: &specsurvey::RadioMap, pts: &[Point2], params: &GaussianModelParams, seed: u64) -> Vec<Observation> {
    let mut sensor = Sensor::new(params, Interpolation::Bicubic, seed);
    pts.iter()
        .map(|x| Observation {
            location: *x,
            power_db: sensor.measure(map, x).unwrap().per_tx_power_db[0],
        })
        .collect()
}

fn assert_valid(p: &Posterior, prior_var: f64) {
    assert!(p.asymmetry() <= 1e-8);
    let n = p.cov.nrows() as f64;
    assert!(p.min_eigenvalue() >= -1e-6 * p.cov.trace().abs().max(1e-300) / n, "{}", p.min_eigenvalue());
    assert!(p.variances().iter().all(|v| *v <= prior_var + 1e-9));
}

#[test]
fn variance_shrinks_with_nested_sets_and_ignores_order() {
    let g = GridGeometry::new(8, 8, 5.0, Point2::default()).unwrap();
    let p = GaussianModelParams { noise_var: 0.5, ..Default::default() };
    let map = generate_map(&g, &[tx()], &p, 3).unwrap();
    let pts = random_points(&g, 12, 9);
    let obs = observe(&map, &pts, &p, 1);
    let mean = PriorMean::Known(tx());
    let mut prev = batch_posterior(&[], &g, &mean, &p).unwrap();
    for t in 1..=obs.len() {
        let post = batch_posterior(&obs[..t], &g, &mean, &p).unwrap();
        assert_valid(&post, p.shadow_var);
        for (a, b) in post.variances().iter().zip(prev.variances().iter()) {
            assert!(*a <= b + 1e-8);
        }
        prev = post;
    }
    let mut shuffled = obs.clone();
    shuffled.reverse();
    shuffled.swap(0, 5);
    let other = batch_posterior(&shuffled, &g, &mean, &p).unwrap();
    assert!((&other.mean - &prev.mean).amax() <= 1e-9);
    assert!((&other.cov - &prev.cov).amax() <= 1e-9);
}

#[test]
fn posterior_variance_is_calibrated() {
    // squared error at each grid point, averaged over maps, against the
    // posterior variance (which does not depend on the measured values)
    let g = GridGeometry::new(6, 6, 6.0, Point2::default()).unwrap();
    let p = GaussianModelParams { noise_var: 1.0, ..Default::default() };
    let pts = random_points(&g, 6, 4);
    let mean = PriorMean::Known(tx());
    let maps = 400;
    let mut sq = vec![0.0; g.len()];
    let mut var = None;
    for s in 0..maps {
        let map = generate_map(&g, &[tx()], &p, 1000 + s).unwrap();
        // grid locations keep interpolation error out of the comparison
        let grid_pts: Vec<Point2> = pts.iter().map(|x| g.point(g.nearest_index(x))).collect();
        let obs = observe(&map, &grid_pts, &p, s);
        let post = batch_posterior(&obs, &g, &mean, &p).unwrap();
        for k in 0..g.len() {
            sq[k] += (post.mean[k] - map.per_tx_power_db[0][k]).powi(2);
        }
        var.get_or_insert(post.variances());
    }
    let var = var.unwrap();
    let mut checked = 0;
    for k in 0..g.len() {
        if var[k] < 1.0 {
            continue;
        }
        let mse = sq[k] / maps as f64;
        assert!((mse - var[k]).abs() <= 0.2 * var[k], "point {k}: mse {mse} vs var {}", var[k]);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn online_matches_batch_on_grid() {
    let g = GridGeometry::new(16, 16, 3.0, Point2::default()).unwrap();
    let p = GaussianModelParams::default();
    let map = generate_map(&g, &[tx()], &p, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ks: Vec<usize> = (0..g.len()).collect();
    for i in 0..50 {
        let j = rng.gen_range(i..ks.len());
        ks.swap(i, j);
    }
    let pts: Vec<Point2> = ks[..50].iter().map(|&k| g.point(k)).collect();
    let mut sensor = Sensor::new(&p, Interpolation::Bicubic, 2);
    let meas: Vec<_> = pts.iter().map(|x| sensor.measure(&map, x).unwrap()).collect();

    let prior = OnlinePrior::new(g.clone(), p).unwrap();
    let mut s = OnlineSession::new(prior, vec![PriorMean::Known(tx())], false).unwrap();
    for m in &meas {
        s.update(m).unwrap();
    }
    let obs: Vec<Observation> = meas
        .iter()
        .map(|m| Observation { location: m.location, power_db: m.per_tx_power_db[0] })
        .collect();
    let batch = batch_posterior(&obs, &g, &PriorMean::Known(tx()), &p).unwrap();
    assert!((s.mean(0) - &batch.mean).amax() <= 1e-6);
    assert!((s.cov() - &batch.cov).amax() <= 1e-6);
}

#[test]
fn online_approximates_batch_off_grid() {
    let g = GridGeometry::new(16, 16, 3.0, Point2::default()).unwrap();
    let p = GaussianModelParams::default();
    let prior = OnlinePrior::new(g.clone(), p).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let map = generate_map(&g, &[tx()], &p, 100 + seed).unwrap();
        let pts = random_points(&g, 50, 200 + seed);
        let mut sensor = Sensor::new(&p, Interpolation::Bicubic, seed);
        let meas: Vec<_> = pts.iter().map(|x| sensor.measure(&map, x).unwrap()).collect();
        let mut s = OnlineSession::new(Arc::clone(&prior), vec![PriorMean::Known(tx())], true).unwrap();
        for m in &meas {
            s.update(m).unwrap();
        }
        let obs: Vec<Observation> = meas
            .iter()
            .map(|m| Observation { location: m.location, power_db: m.per_tx_power_db[0] })
            .collect();
        let batch = batch_mean(&obs, &g, &PriorMean::Known(tx()), &p).unwrap();
        let rmse = ((s.mean(0) - &batch).norm_squared() / g.len() as f64).sqrt();
        worst = worst.max(rmse);
    }
    assert!(worst <= 0.5, "online vs batch rmse {worst}");
}

#[test]
fn covariance_stays_psd_after_1000_updates() {
    let g = GridGeometry::new(10, 10, 3.0, Point2::default()).unwrap();
    let p = GaussianModelParams { noise_var: 0.1, fading_var: 0.2, ..Default::default() };
    let map = generate_map(&g, &[tx()], &p, 8).unwrap();
    let prior = OnlinePrior::new(g.clone(), p).unwrap();
    let mut s = OnlineSession::new(prior, vec![PriorMean::Known(tx())], false).unwrap();
    let mut sensor = Sensor::new(&p, Interpolation::Bicubic, 3);
    let pts = random_points(&g, 1000, 77);
    let mut prev_trace = s.cov().trace();
    for (i, x) in pts.iter().enumerate() {
        // alternate grid and off-grid locations
        let x = if i % 2 == 0 { g.point(g.nearest_index(x)) } else { *x };
        s.update(&sensor.measure(&map, &x).unwrap()).unwrap();
        let tr = s.cov().trace();
        assert!(tr <= prev_trace + 1e-9);
        prev_trace = tr;
    }
    assert_valid(&s.posterior(0), p.shadow_var + p.fading_var);
}

#[test]
fn update_cost_does_not_grow_with_t() {
    let g = GridGeometry::new(20, 20, 3.0, Point2::default()).unwrap();
    let p = GaussianModelParams { noise_var: 1.0, ..Default::default() };
    let map = generate_map(&g, &[tx()], &p, 1).unwrap();
    let prior = OnlinePrior::new(g.clone(), p).unwrap();
    let pts = random_points(&g, 500, 5);
    let mut sensor = Sensor::new(&p, Interpolation::Bicubic, 0);
    let meas: Vec<_> = pts.iter().map(|x| sensor.measure(&map, x).unwrap()).collect();
    let mut s = OnlineSession::new(prior, vec![PriorMean::Known(tx())], true).unwrap();
    for m in &meas[..4] {
        s.update(m).unwrap();
    }
    let time_step = |s: &OnlineSession, m| {
        let start = Instant::now();
        for _ in 0..100 {
            let mut c = s.clone();
            c.update(m).unwrap();
            std::hint::black_box(&c);
        }
        start.elapsed()
    };
    let early = time_step(&s, &meas[4]);
    for m in &meas[4..499] {
        s.update(m).unwrap();
    }
    let late = time_step(&s, &meas[499]);
    assert!(late.as_secs_f64() <= 2.0 * early.as_secs_f64() + 1e-3, "{late:?} vs {early:?}");
}

#[test]
fn prior_session_equals_prior_posterior() {
    let g = GridGeometry::new(4, 5, 3.0, Point2::default()).unwrap();
    let p = GaussianModelParams::default();
    let prior = OnlinePrior::new(g.clone(), p).unwrap();
    let s = OnlineSession::new(prior, vec![PriorMean::Known(tx())], false).unwrap();
    assert_eq!(s.posterior(0), prior_posterior(&g, &PriorMean::Known(tx()), &p).unwrap());
}
