//! Batch Bayesian (kriging) estimation of the grid power vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::model::{base_power, cholesky_jittered, shadowing_cov_matrix, GaussianModelParams, Transmitter};

/// How the estimator models the deterministic part of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Mean power is the free-space level of the known transmitter.
    #[default]
    Known,
    /// Mean power is zero everywhere.
    Zero,
}

/// Prior mean of one map layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorMean {
    Known(Transmitter),
    Zero,
}

impl PriorMean {
    pub fn new(mode: MeanMode, tx: Option<&Transmitter>) -> Result<Self> {
        match (mode, tx) {
            (MeanMode::Known, Some(tx)) => Ok(PriorMean::Known(*tx)),
            (MeanMode::Known, None) => Err(Error::InvalidParameter(
                "known-mean estimation needs the transmitter location".into(),
            )),
            (MeanMode::Zero, _) => Ok(PriorMean::Zero),
        }
    }

    pub fn at(&self, x: &Point2, params: &GaussianModelParams) -> Result<f64> {
        match self {
            PriorMean::Known(tx) => base_power(tx, x, params),
            PriorMean::Zero => Ok(0.0),
        }
    }

    pub fn over_grid(&self, grid: &GridGeometry, params: &GaussianModelParams) -> Result<DVector<f64>> {
        let v: Result<Vec<f64>> = (0..grid.len()).map(|k| self.at(&grid.point(k), params)).collect();
        Ok(DVector::from_vec(v?))
    }
}

/// A measured value of one map layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub location: Point2,
    pub power_db: f64,
}

/// Gaussian posterior over the grid power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// Posterior mean, dB.
    pub mean: DVector<f64>,
    /// Posterior covariance, dB².
    pub cov: DMatrix<f64>,
    pub num_measurements: usize,
}

impl Posterior {
    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }

    /// Largest asymmetry `max |C - C^T|` relative to `max |C|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.cov.amax().max(f64::MIN_POSITIVE);
        (&self.cov - self.cov.transpose()).amax() / scale
    }

    /// Smallest eigenvalue of the symmetrized covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Prior over the grid: mean `rho_bar` and covariance `C_s + fading_var * I`.
pub fn prior_posterior(
    grid: &GridGeometry,
    mean: &PriorMean,
    params: &GaussianModelParams,
) -> Result<Posterior> {
    params.validate()?;
    let pts = grid.points();
    let mut cov = shadowing_cov_matrix(&pts, &pts, params);
    for i in 0..cov.nrows() {
        cov[(i, i)] += params.fading_var;
    }
    Ok(Posterior {
        mean: mean.over_grid(grid, params)?,
        cov,
        num_measurements: 0,
    })
}

fn check_duplicates(obs: &[Observation], params: &GaussianModelParams) -> Result<()> {
    if params.fading_noise_var() > 0.0 {
        return Ok(());
    }
    let tol = 1e-9 * params.shadow_corr_dist_m;
    for (i, a) in obs.iter().enumerate() {
        if obs[i + 1..].iter().any(|b| a.location.distance(&b.location) <= tol) {
            return Err(Error::DuplicateNoiselessMeasurements);
        }
    }
    Ok(())
}

struct Conditioning {
    /// Cholesky factor of the measurement covariance.
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// Shadowing cross-covariance, measurements x grid.
    cross: DMatrix<f64>,
    /// `K^-1 (y - rho_bar_t)`.
    weights: DVector<f64>,
}

fn condition(
    obs: &[Observation],
    grid: &GridGeometry,
    mean: &PriorMean,
    params: &GaussianModelParams,
) -> Result<Conditioning> {
    check_duplicates(obs, params)?;
    let locs: Vec<Point2> = obs.iter().map(|o| o.location).collect();
    let mut k = shadowing_cov_matrix(&locs, &locs, params);
    for i in 0..k.nrows() {
        k[(i, i)] += params.fading_noise_var();
    }
    let chol = cholesky_jittered(k, params.jitter())?;
    let residual: Result<Vec<f64>> = obs
        .iter()
        .map(|o| Ok(o.power_db - mean.at(&o.location, params)?))
        .collect();
    let weights = chol.solve(&DVector::from_vec(residual?));
    let cross = shadowing_cov_matrix(&locs, &grid.points(), params);
    Ok(Conditioning { chol, cross, weights })
}

/// Posterior of one layer given all its observations at once.
pub fn batch_posterior(
    obs: &[Observation],
    grid: &GridGeometry,
    mean: &PriorMean,
    params: &GaussianModelParams,
) -> Result<Posterior> {
    let mut post = prior_posterior(grid, mean, params)?;
    if obs.is_empty() {
        return Ok(post);
    }
    let c = condition(obs, grid, mean, params)?;
    // E[s_G | y] = -C_Gt K^-1 (y - rho_bar_t), so the power mean moves by +C_Gt w
    post.mean += c.cross.tr_mul(&c.weights);
    let v = c
        .chol
        .l_dirty()
        .solve_lower_triangular(&c.cross)
        .ok_or(Error::CovarianceNotPsd)?;
    post.cov -= v.tr_mul(&v);
    post.num_measurements = obs.len();
    Ok(post)
}

/// Posterior mean only; skips the `O(N^2 t)` covariance downdate.
pub fn batch_mean(
    obs: &[Observation],
    grid: &GridGeometry,
    mean: &PriorMean,
    params: &GaussianModelParams,
) -> Result<DVector<f64>> {
    params.validate()?;
    let mut mu = mean.over_grid(grid, params)?;
    if !obs.is_empty() {
        let c = condition(obs, grid, mean, params)?;
        mu += c.cross.tr_mul(&c.weights);
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GaussianModelParams {
        GaussianModelParams::default()
    }

    fn tx() -> Transmitter {
        Transmitter {
            position: Point2::new(10.0, 20.0),
            height_m: 20.0,
            power_dbm: 10.0,
            carrier_hz: 2.4e9,
        }
    }

    #[test]
    fn empty_list_gives_prior() {
        let g = GridGeometry::new(3, 4, 3.0, Point2::default()).unwrap();
        let m = PriorMean::Known(tx());
        let post = batch_posterior(&[], &g, &m, &params()).unwrap();
        assert_eq!(post.mean, m.over_grid(&g, &params()).unwrap());
        assert!(post.variances().iter().all(|v| (*v - 10.0).abs() < 1e-12));
        assert_eq!(post.num_measurements, 0);
    }

    #[test]
    fn noiseless_grid_measurement_is_reproduced() {
        let g = GridGeometry::new(4, 4, 3.0, Point2::default()).unwrap();
        let m = PriorMean::Known(tx());
        let obs = [Observation {
            location: g.point(6),
            power_db: -55.0,
        }];
        let post = batch_posterior(&obs, &g, &m, &params()).unwrap();
        assert!((post.mean[6] + 55.0).abs() < 1e-6);
        assert!(post.cov[(6, 6)].abs() < 1e-6);
    }

    #[test]
    fn two_point_closed_form() {
        // bivariate Gaussian with correlation 1/2: shift 2 -> 1, var 10 -> 7.5
        let g = GridGeometry::new(2, 2, 50.0, Point2::default()).unwrap();
        let m = PriorMean::Known(tx());
        let rb = m.over_grid(&g, &params()).unwrap();
        let obs = [Observation {
            location: g.point(0),
            power_db: rb[0] - 2.0,
        }];
        let post = batch_posterior(&obs, &g, &m, &params()).unwrap();
        assert!((post.mean[1] - (rb[1] - 1.0)).abs() < 1e-7);
        assert!((post.cov[(1, 1)] - 7.5).abs() < 1e-7);
    }

    #[test]
    fn duplicate_noiseless_locations_are_rejected() {
        let g = GridGeometry::new(2, 2, 3.0, Point2::default()).unwrap();
        let o = Observation {
            location: Point2::new(1.0, 1.0),
            power_db: -50.0,
        };
        let err = batch_posterior(&[o, o], &g, &PriorMean::Zero, &params()).unwrap_err();
        assert!(matches!(err, Error::DuplicateNoiselessMeasurements));
        let noisy = GaussianModelParams {
            noise_var: 1.0,
            ..params()
        };
        assert!(batch_posterior(&[o, o], &g, &PriorMean::Zero, &noisy).is_ok());
    }

    #[test]
    fn mean_only_path_agrees() {
        let g = GridGeometry::new(4, 5, 3.0, Point2::default()).unwrap();
        let m = PriorMean::Known(tx());
        let obs: Vec<_> = [(1.0, 2.0, -50.0), (7.5, 4.0, -48.0), (11.0, 8.2, -52.0)]
            .iter()
            .map(|&(x, y, p)| Observation {
                location: Point2::new(x, y),
                power_db: p,
            })
            .collect();
        let full = batch_posterior(&obs, &g, &m, &params()).unwrap();
        let mu = batch_mean(&obs, &g, &m, &params()).unwrap();
        assert!((&full.mean - &mu).amax() < 1e-12);
        assert!(full.asymmetry() < 1e-8);
        assert!(full.min_eigenvalue() > -1e-6 * full.cov.trace() / 20.0);
    }
}
