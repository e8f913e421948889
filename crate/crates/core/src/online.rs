//! Online posterior updates with constant cost per measurement.
//!
//! The grid values summarize all past measurements: a new measurement is
//! treated as conditionally independent of the previous ones given the grid
//! power vector. Its likelihood is then `y ~ N(a^T rho_G + b, lik_var)` and
//! the posterior update is a rank-one covariance downdate. For measurements
//! taken exactly at grid points this is exact; off the grid it approximates
//! batch kriging.

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::kriging::{prior_posterior, Posterior, PriorMean};
use crate::model::{cholesky_jittered, shadowing_covariance, GaussianModelParams, Measurement, Transmitter};

/// Floor applied to the likelihood variance in robust mode, dB².
pub const ROBUST_LIK_VAR: f64 = 1e-12;

/// Linear read-out `a` of the grid vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    /// Exactly the `k`-th grid value.
    Basis(usize),
    Dense(DVector<f64>),
}

impl Readout {
    pub fn to_dense(&self, n: usize) -> DVector<f64> {
        match self {
            Readout::Basis(k) => {
                let mut e = DVector::zeros(n);
                e[*k] = 1.0;
                e
            }
            Readout::Dense(a) => a.clone(),
        }
    }

    fn dot(&self, v: &DVector<f64>) -> f64 {
        match self {
            Readout::Basis(k) => v[*k],
            Readout::Dense(a) => a.dot(v),
        }
    }

    /// `C a`.
    fn apply(&self, cov: &DMatrix<f64>) -> DVector<f64> {
        match self {
            Readout::Basis(k) => cov.column(*k).into_owned(),
            Readout::Dense(a) => cov * a,
        }
    }
}

/// Likelihood of one measurement given the grid vector:
/// `E[y | rho_G] = a^T rho_G + offset`, `Var[y | rho_G] = lik_var`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTerms {
    pub readout: Readout,
    /// dB.
    pub offset: f64,
    /// dB².
    pub lik_var: f64,
}

impl UpdateTerms {
    pub fn a(&self, n: usize) -> DVector<f64> {
        self.readout.to_dense(n)
    }
}

/// Prior model shared by every online session over one grid.
///
/// The factorization of `C_s + fading_var * I` is built lazily, on the first
/// off-grid measurement, and then reused.
#[derive(Debug)]
pub struct OnlinePrior {
    grid: GridGeometry,
    params: GaussianModelParams,
    points: Vec<Point2>,
    factor: OnceLock<Result<Cholesky<f64, Dyn>, ()>>,
}

impl OnlinePrior {
    pub fn new(grid: GridGeometry, params: GaussianModelParams) -> Result<Arc<Self>> {
        params.validate()?;
        let points = grid.points();
        Ok(Arc::new(Self {
            grid,
            params,
            points,
            factor: OnceLock::new(),
        }))
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn params(&self) -> &GaussianModelParams {
        &self.params
    }

    fn factor(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.factor
            .get_or_init(|| {
                let mut c = crate::model::shadowing_cov_matrix(&self.points, &self.points, &self.params);
                for i in 0..c.nrows() {
                    c[(i, i)] += self.params.fading_var;
                }
                cholesky_jittered(c, self.params.jitter()).map_err(|_| ())
            })
            .as_ref()
            .map_err(|_| Error::CovarianceNotPsd)
    }

    pub fn init(&self, mean: &PriorMean) -> Result<Posterior> {
        prior_posterior(&self.grid, mean, &self.params)
    }

    /// Read-out and likelihood variance at `x`; independent of the layer.
    pub fn readout(&self, x: &Point2) -> Result<(Readout, f64)> {
        let p = &self.params;
        if let Some(k) = self.grid.grid_point_at(x) {
            // cross-covariance is the k-th column of the prior covariance
            return Ok((Readout::Basis(k), p.noise_var));
        }
        if p.shadow_var == 0.0 {
            // nothing off the grid correlates with the grid values
            return Ok((Readout::Dense(DVector::zeros(self.points.len())), p.fading_noise_var()));
        }
        let c = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|g| shadowing_covariance(x, g, p)),
        );
        let a = self.factor()?.solve(&c);
        let lik_var = (p.shadow_var + p.fading_noise_var() - c.dot(&a)).max(0.0);
        Ok((Readout::Dense(a), lik_var))
    }

    pub fn offset(&self, x: &Point2, readout: &Readout, mean: &PriorMean, grid_mean: &DVector<f64>) -> Result<f64> {
        Ok(mean.at(x, &self.params)? - readout.dot(grid_mean))
    }

    pub fn update_terms(&self, x: &Point2, mean: &PriorMean) -> Result<UpdateTerms> {
        let (readout, lik_var) = self.readout(x)?;
        let grid_mean = mean.over_grid(&self.grid, &self.params)?;
        let offset = self.offset(x, &readout, mean, &grid_mean)?;
        Ok(UpdateTerms {
            readout,
            offset,
            lik_var,
        })
    }
}

/// Prior for one transmitter layer.
pub fn init_posterior(grid: &GridGeometry, tx: &Transmitter, params: &GaussianModelParams) -> Result<Posterior> {
    prior_posterior(grid, &PriorMean::Known(*tx), params)
}

pub fn compute_update_terms(
    x: &Point2,
    grid: &GridGeometry,
    tx: &Transmitter,
    params: &GaussianModelParams,
) -> Result<UpdateTerms> {
    OnlinePrior::new(grid.clone(), *params)?.update_terms(x, &PriorMean::Known(*tx))
}

/// Rank-one Kalman-form update shared by single- and multi-layer sessions.
/// Returns `(C a, denominator)`.
fn downdate(
    cov: &mut DMatrix<f64>,
    readout: &Readout,
    lik_var: f64,
    robust: bool,
) -> Result<(DVector<f64>, f64)> {
    let u = readout.apply(cov);
    let spread = readout.dot(&u);
    let den = if robust {
        lik_var.max(ROBUST_LIK_VAR) + spread.max(0.0)
    } else {
        lik_var + spread
    };
    let scale = cov.diagonal().amax().max(1.0);
    if !(den > 1e-14 * scale) {
        return Err(Error::DegenerateMeasurement);
    }
    // C -= w w^T with w = u / sqrt(den); products w_i w_j commute, so the
    // covariance stays exactly symmetric.
    let w = &u / den.sqrt();
    cov.ger(-1.0, &w, &w, 1.0);
    Ok((u, den))
}

/// Posterior after one measurement `y` with likelihood `terms`.
pub fn update_posterior(prev: &Posterior, terms: &UpdateTerms, y: f64) -> Result<Posterior> {
    update_posterior_with(prev, terms, y, false)
}

pub fn update_posterior_with(prev: &Posterior, terms: &UpdateTerms, y: f64, robust: bool) -> Result<Posterior> {
    let mut cov = prev.cov.clone();
    let (u, den) = downdate(&mut cov, &terms.readout, terms.lik_var, robust)?;
    let innovation = y - terms.offset - terms.readout.dot(&prev.mean);
    let mean = &prev.mean + u * (innovation / den);
    Ok(Posterior {
        mean,
        cov,
        num_measurements: prev.num_measurements + 1,
    })
}

/// Online estimation of several transmitter layers over one grid.
///
/// The covariance update depends only on the measurement locations, so all
/// layers share one covariance matrix and keep separate means.
#[derive(Debug, Clone)]
pub struct OnlineSession {
    prior: Arc<OnlinePrior>,
    layer_means: Vec<PriorMean>,
    grid_means: Vec<DVector<f64>>,
    cov: DMatrix<f64>,
    means: Vec<DVector<f64>>,
    count: usize,
    robust: bool,
}

impl OnlineSession {
    pub fn new(prior: Arc<OnlinePrior>, layer_means: Vec<PriorMean>, robust: bool) -> Result<Self> {
        if layer_means.is_empty() {
            return Err(Error::InvalidParameter("session needs at least one layer".into()));
        }
        let first = prior.init(&layer_means[0])?;
        let mut grid_means = vec![first.mean];
        for m in &layer_means[1..] {
            grid_means.push(m.over_grid(prior.grid(), prior.params())?);
        }
        Ok(Self {
            means: grid_means.clone(),
            grid_means,
            cov: first.cov,
            layer_means,
            prior,
            count: 0,
            robust,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.means.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.count
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean(&self, layer: usize) -> &DVector<f64> {
        &self.means[layer]
    }

    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }

    pub fn posterior(&self, layer: usize) -> Posterior {
        Posterior {
            mean: self.means[layer].clone(),
            cov: self.cov.clone(),
            num_measurements: self.count,
        }
    }

    /// Folds in one measurement carrying a value for every layer.
    pub fn update(&mut self, m: &Measurement) -> Result<()> {
        if m.per_tx_power_db.len() != self.means.len() {
            return Err(Error::ShapeMismatch {
                expected: self.means.len(),
                actual: m.per_tx_power_db.len(),
            });
        }
        let (readout, lik_var) = self.prior.readout(&m.location)?;
        let mut offsets = Vec::with_capacity(self.means.len());
        for (mean, grid_mean) in self.layer_means.iter().zip(&self.grid_means) {
            offsets.push(self.prior.offset(&m.location, &readout, mean, grid_mean)?);
        }
        let innovations: Vec<f64> = self
            .means
            .iter()
            .zip(&offsets)
            .zip(&m.per_tx_power_db)
            .map(|((mu, b), y)| y - b - readout.dot(mu))
            .collect();
        let (u, den) = downdate(&mut self.cov, &readout, lik_var, self.robust)?;
        for (mu, innov) in self.means.iter_mut().zip(innovations) {
            mu.axpy(innov / den, &u, 1.0);
        }
        self.count += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::{batch_posterior, Observation};

    fn tx() -> Transmitter {
        Transmitter {
            position: Point2::new(4.0, -3.0),
            height_m: 20.0,
            power_dbm: 10.0,
            carrier_hz: 2.4e9,
        }
    }

    #[test]
    fn prior_matches_batch_with_no_measurements() {
        let g = GridGeometry::new(3, 3, 5.0, Point2::default()).unwrap();
        let p = GaussianModelParams::default();
        let a = init_posterior(&g, &tx(), &p).unwrap();
        let b = batch_posterior(&[], &g, &PriorMean::Known(tx()), &p).unwrap();
        assert_eq!(a, b);
        assert!(a.variances().iter().all(|v| *v == 10.0));
    }

    #[test]
    fn grid_point_terms_are_exact() {
        let g = GridGeometry::new(3, 4, 5.0, Point2::default()).unwrap();
        let p = GaussianModelParams::default();
        let t = compute_update_terms(&g.point(5), &g, &tx(), &p).unwrap();
        assert_eq!(t.readout, Readout::Basis(5));
        assert!(t.offset.abs() < 1e-12);
        assert_eq!(t.lik_var, 0.0);
    }

    #[test]
    fn far_measurements_decorrelate() {
        let g = GridGeometry::new(3, 3, 5.0, Point2::default()).unwrap();
        let p = GaussianModelParams {
            noise_var: 0.5,
            fading_var: 0.25,
            ..Default::default()
        };
        let t = compute_update_terms(&Point2::new(5e4, 5e4), &g, &tx(), &p).unwrap();
        assert!(t.a(9).amax() < 1e-12);
        assert!((t.lik_var - (10.0 + 0.75)).abs() < 1e-9);
    }

    #[test]
    fn readout_solves_normal_equations() {
        let g = GridGeometry::new(2, 2, 50.0, Point2::default()).unwrap();
        let p = GaussianModelParams {
            fading_var: 1.0,
            ..Default::default()
        };
        let x = Point2::new(20.0, 7.0);
        let a = compute_update_terms(&x, &g, &tx(), &p).unwrap().a(4);
        let pts = g.points();
        for i in 0..4 {
            let row: f64 = (0..4)
                .map(|j| (shadowing_covariance(&pts[i], &pts[j], &p) + if i == j { 1.0 } else { 0.0 }) * a[j])
                .sum();
            assert!((row - shadowing_covariance(&x, &pts[i], &p)).abs() < 1e-7);
        }
    }

    #[test]
    fn edge_midpoint_readout_by_hand() {
        // Grid points 0=(0,0) 1=(50,0) 2=(0,50) 3=(50,50), x midway between 0
        // and 1. Symmetry gives a0 = a1 = u, a2 = a3 = v and the normal
        // equations collapse to [[16, 5 + q], [5 + q, 16]] (u, v) = (c0, c2)
        // with q = 10 * 2^-sqrt(2).
        let g = GridGeometry::new(2, 2, 50.0, Point2::default()).unwrap();
        let p = GaussianModelParams {
            fading_var: 1.0,
            ..Default::default()
        };
        let x = Point2::new(25.0, 0.0);
        let t = compute_update_terms(&x, &g, &tx(), &p).unwrap();
        let a = t.a(4);

        let q = 10.0 * (-std::f64::consts::SQRT_2).exp2();
        let c0 = 10.0 * (-0.5f64).exp2();
        let c2 = 10.0 * (-(25.0f64.hypot(50.0)) / 50.0).exp2();
        let (d, o) = (16.0, 5.0 + q);
        let det = d * d - o * o;
        let u = (d * c0 - o * c2) / det;
        let v = (d * c2 - o * c0) / det;
        for (k, want) in [(0, u), (1, u), (2, v), (3, v)] {
            assert!((a[k] - want).abs() < 1e-8, "a[{k}] = {} want {want}", a[k]);
        }
        let lik_var = 10.0 + 1.0 - 2.0 * (u * c0 + v * c2);
        assert!((t.lik_var - lik_var).abs() < 1e-8);
    }

    #[test]
    fn basis_update_conditions_exactly() {
        let g = GridGeometry::new(3, 3, 5.0, Point2::default()).unwrap();
        let p = GaussianModelParams::default();
        let prior = init_posterior(&g, &tx(), &p).unwrap();
        let terms = UpdateTerms {
            readout: Readout::Basis(4),
            offset: 0.0,
            lik_var: 0.0,
        };
        let post = update_posterior(&prior, &terms, -42.0).unwrap();
        assert!(post.cov[(4, 4)].abs() < 1e-12);
        assert!((post.mean[4] + 42.0).abs() < 1e-12);
        assert!(post.cov.trace() <= prior.cov.trace());
        assert!(matches!(
            update_posterior(&post, &terms, -42.0),
            Err(Error::DegenerateMeasurement)
        ));
        let again = update_posterior_with(&post, &terms, -42.0, true).unwrap();
        assert!((again.mean[4] + 42.0).abs() < 1e-9);
    }

    #[test]
    fn zero_readout_leaves_posterior_unchanged() {
        let g = GridGeometry::new(3, 3, 5.0, Point2::default()).unwrap();
        let p = GaussianModelParams::default();
        let prior = init_posterior(&g, &tx(), &p).unwrap();
        let terms = UpdateTerms {
            readout: Readout::Dense(DVector::zeros(9)),
            offset: 3.0,
            lik_var: 2.0,
        };
        let post = update_posterior(&prior, &terms, 17.0).unwrap();
        assert_eq!(post.mean, prior.mean);
        assert_eq!(post.cov, prior.cov);
    }

    #[test]
    fn single_update_matches_batch() {
        let g = GridGeometry::new(4, 4, 6.0, Point2::default()).unwrap();
        let p = GaussianModelParams {
            noise_var: 0.3,
            ..Default::default()
        };
        let m = PriorMean::Known(tx());
        let x = g.point(9);
        let prior = init_posterior(&g, &tx(), &p).unwrap();
        let terms = compute_update_terms(&x, &g, &tx(), &p).unwrap();
        let online = update_posterior(&prior, &terms, -61.5).unwrap();
        let batch = batch_posterior(
            &[Observation {
                location: x,
                power_db: -61.5,
            }],
            &g,
            &m,
            &p,
        )
        .unwrap();
        assert!((online.mean - batch.mean).amax() < 1e-8);
        assert!((online.cov - batch.cov).amax() < 1e-8);
    }
}
