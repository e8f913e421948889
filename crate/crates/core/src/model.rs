//! Gudmundson shadowing model: ground-truth map synthesis and noisy
//! measurement sampling.
//!
//! Received power at `x` from one transmitter decomposes as
//! `rho(x) = base(x) - s(x) + fading(x)`, where `base` is the Friis
//! free-space level minus the shadowing mean, `s` a zero-mean Gaussian field
//! with covariance `shadow_var * 2^(-d / corr_dist)` and `fading` white.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::rng::{self, Purpose};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative diagonal loading applied before every covariance factorization.
pub const COV_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub position: Point2,
    pub height_m: f64,
    pub power_dbm: f64,
    pub carrier_hz: f64,
}

impl Transmitter {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::InvalidParameter("carrier frequency must be positive".into()));
        }
        if !(self.height_m >= 0.0) {
            return Err(Error::InvalidParameter("transmitter height must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianModelParams {
    /// Shadowing variance, dB².
    pub shadow_var: f64,
    /// Distance at which the shadowing correlation halves, m.
    pub shadow_corr_dist_m: f64,
    /// Shadowing mean, dB.
    pub shadow_mean: f64,
    /// Fading variance, dB².
    pub fading_var: f64,
    /// Measurement noise variance, dB².
    pub noise_var: f64,
    pub pathloss_exponent: f64,
    /// UAV altitude above the map plane, m.
    pub survey_height_m: f64,
}

impl Default for GaussianModelParams {
    fn default() -> Self {
        Self {
            shadow_var: 10.0,
            shadow_corr_dist_m: 50.0,
            shadow_mean: 0.0,
            fading_var: 0.0,
            noise_var: 0.0,
            pathloss_exponent: 2.0,
            survey_height_m: 0.0,
        }
    }
}

impl GaussianModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.shadow_var >= 0.0) {
            return bad("shadow_var must be >= 0");
        }
        if !(self.shadow_corr_dist_m > 0.0) {
            return bad("shadow_corr_dist_m must be > 0");
        }
        if !(self.fading_var >= 0.0) {
            return bad("fading_var must be >= 0");
        }
        if !(self.noise_var >= 0.0) {
            return bad("noise_var must be >= 0");
        }
        if !self.shadow_mean.is_finite() || !self.pathloss_exponent.is_finite() {
            return bad("shadow_mean and pathloss_exponent must be finite");
        }
        Ok(())
    }

    /// Fading plus measurement noise variance.
    pub fn fading_noise_var(&self) -> f64 {
        self.fading_var + self.noise_var
    }

    pub(crate) fn jitter(&self) -> f64 {
        COV_JITTER * self.shadow_var
    }
}

/// Gudmundson shadowing covariance between two locations, dB².
pub fn shadowing_covariance(x1: &Point2, x2: &Point2, params: &GaussianModelParams) -> f64 {
    params.shadow_var * (-x1.distance(x2) / params.shadow_corr_dist_m).exp2()
}

/// Deterministic received power component: transmit power plus free-space
/// gain minus the shadowing mean, dBm.
pub fn base_power(tx: &Transmitter, x: &Point2, params: &GaussianModelParams) -> Result<f64> {
    let dz = tx.height_m - params.survey_height_m;
    let d = (tx.position.distance(x).powi(2) + dz * dz).sqrt();
    if d == 0.0 {
        return Err(Error::TransmitterColocation);
    }
    let loss = 10.0 * params.pathloss_exponent * d.log10()
        + 20.0 * (4.0 * std::f64::consts::PI * tx.carrier_hz / SPEED_OF_LIGHT).log10();
    Ok(tx.power_dbm - loss - params.shadow_mean)
}

pub fn base_power_grid(
    tx: &Transmitter,
    grid: &GridGeometry,
    params: &GaussianModelParams,
) -> Result<Vec<f64>> {
    (0..grid.len())
        .map(|k| base_power(tx, &grid.point(k), params))
        .collect()
}

/// Cross-covariance matrix of the shadowing field, `rows.len() x cols.len()`.
pub fn shadowing_cov_matrix(
    rows: &[Point2],
    cols: &[Point2],
    params: &GaussianModelParams,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        shadowing_covariance(&rows[i], &cols[j], params)
    })
}

/// Cholesky factor of `m + jitter * I`.
pub(crate) fn cholesky_jittered(mut m: DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    Cholesky::new(m).ok_or(Error::CovarianceNotPsd)
}

/// Draws shadowing fields over a fixed grid. The factorization is computed
/// once and shared, so Monte Carlo campaigns reuse it across maps.
#[derive(Debug, Clone)]
pub struct ShadowingSampler {
    n: usize,
    /// Lower Cholesky factor; `None` when the shadowing variance is zero.
    factor: Option<Arc<DMatrix<f64>>>,
}

impl ShadowingSampler {
    pub fn new(grid: &GridGeometry, params: &GaussianModelParams) -> Result<Self> {
        params.validate()?;
        let factor = if params.shadow_var == 0.0 {
            None
        } else {
            let pts = grid.points();
            let chol = cholesky_jittered(shadowing_cov_matrix(&pts, &pts, params), params.jitter())?;
            Some(Arc::new(chol.unpack()))
        };
        Ok(Self { n: grid.len(), factor })
    }

    pub fn sample_with(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.factor {
            None => vec![0.0; self.n],
            Some(l) => {
                let z = DVector::from_iterator(self.n, (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let s = l.as_ref() * z;
                s.as_slice().to_vec()
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        self.sample_with(&mut rng::stream(seed, Purpose::Shadowing, 0))
    }
}

/// One zero-mean shadowing field over `grid`, row-major, dB.
pub fn sample_shadowing_field(
    grid: &GridGeometry,
    params: &GaussianModelParams,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(ShadowingSampler::new(grid, params)?.sample(seed))
}

/// Power sum of dB values in the linear domain, returned in dB.
pub fn db_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + 10.0 * v.iter().map(|x| 10f64.powf((x - m) / 10.0)).sum::<f64>().log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub grid: GridGeometry,
    /// Empty for imported maps whose sources are unknown.
    pub transmitters: Vec<Transmitter>,
    /// True received power per transmitter, row-major, dB.
    pub per_tx_power_db: Vec<Vec<f64>>,
    pub combined_power_db: Vec<f64>,
    /// Sampled `s(x)` per transmitter; empty for imported maps.
    pub shadowing_fields: Vec<Vec<f64>>,
}

impl RadioMap {
    /// Builds a map from per-transmitter layers, deriving the combined layer.
    pub fn from_layers(
        grid: GridGeometry,
        transmitters: Vec<Transmitter>,
        per_tx_power_db: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if per_tx_power_db.is_empty() {
            return Err(Error::InvalidParameter("a map needs at least one layer".into()));
        }
        for layer in &per_tx_power_db {
            if layer.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.len(),
                    actual: layer.len(),
                });
            }
        }
        let combined_power_db = combine_layers(&per_tx_power_db);
        Ok(Self {
            grid,
            transmitters,
            per_tx_power_db,
            combined_power_db,
            shadowing_fields: Vec::new(),
        })
    }

    pub fn num_layers(&self) -> usize {
        self.per_tx_power_db.len()
    }
}

pub(crate) fn combine_layers(layers: &[Vec<f64>]) -> Vec<f64> {
    let n = layers[0].len();
    (0..n).map(|k| db_sum(layers.iter().map(|l| l[k]))).collect()
}

/// Map synthesis with a cached shadowing factorization.
#[derive(Debug, Clone)]
pub struct MapGenerator {
    grid: GridGeometry,
    params: GaussianModelParams,
    sampler: ShadowingSampler,
}

impl MapGenerator {
    pub fn new(grid: GridGeometry, params: GaussianModelParams) -> Result<Self> {
        let sampler = ShadowingSampler::new(&grid, &params)?;
        Ok(Self { grid, params, sampler })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn params(&self) -> &GaussianModelParams {
        &self.params
    }

    pub fn generate(&self, txs: &[Transmitter], seed: u64) -> Result<RadioMap> {
        if txs.is_empty() {
            return Err(Error::InvalidParameter("at least one transmitter required".into()));
        }
        let n = self.grid.len();
        let fading_sd = self.params.fading_var.sqrt();
        let mut layers = Vec::with_capacity(txs.len());
        let mut fields = Vec::with_capacity(txs.len());
        for (i, tx) in txs.iter().enumerate() {
            tx.validate()?;
            let base = base_power_grid(tx, &self.grid, &self.params)?;
            let shadow = self
                .sampler
                .sample_with(&mut rng::stream(seed, Purpose::Shadowing, i as u64));
            let mut fading_rng = rng::stream(seed, Purpose::Fading, i as u64);
            let layer: Vec<f64> = (0..n)
                .map(|k| {
                    let f: f64 = fading_rng.sample(StandardNormal);
                    base[k] - shadow[k] + fading_sd * f
                })
                .collect();
            layers.push(layer);
            fields.push(shadow);
        }
        let mut map = RadioMap::from_layers(self.grid.clone(), txs.to_vec(), layers)?;
        map.shadowing_fields = fields;
        Ok(map)
    }

    /// Transmitters placed uniformly at random over the bounding box.
    pub fn place_transmitters(&self, template: &Transmitter, count: usize, seed: u64) -> Vec<Transmitter> {
        place_transmitters(&self.grid, template, count, seed)
    }
}

pub fn place_transmitters(
    grid: &GridGeometry,
    template: &Transmitter,
    count: usize,
    seed: u64,
) -> Vec<Transmitter> {
    let mut rng = rng::stream(seed, Purpose::Placement, 0);
    let (w, h) = grid.extent();
    let o = grid.origin();
    (0..count)
        .map(|_| Transmitter {
            position: Point2::new(o.x + rng.gen::<f64>() * w, o.y + rng.gen::<f64>() * h),
            ..*template
        })
        .collect()
}

pub fn generate_map(
    grid: &GridGeometry,
    txs: &[Transmitter],
    params: &GaussianModelParams,
    seed: u64,
) -> Result<RadioMap> {
    MapGenerator::new(grid.clone(), *params)?.generate(txs, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Catmull-Rom bicubic.
    #[default]
    Bicubic,
    Bilinear,
}

/// Interpolates a row-major grid field at an arbitrary in-area position.
/// Exact at grid points; reproduces affine fields everywhere.
pub fn interpolate(field: &[f64], grid: &GridGeometry, p: &Point2, kind: Interpolation) -> f64 {
    if let Some(k) = grid.grid_point_at(p) {
        return field[k];
    }
    let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
    let (v, u) = grid.fractional(p);
    let i0 = (v.floor() as isize).clamp(0, rows - 2);
    let j0 = (u.floor() as isize).clamp(0, cols - 2);
    let (tv, tu) = (v - i0 as f64, u - j0 as f64);

    // Out-of-range samples are extended linearly so ramps stay exact.
    let at = |i: isize, j: isize| -> f64 {
        let edge = |i: isize, n: isize| -> (isize, isize, f64) {
            if i < 0 {
                (0, 1, -i as f64)
            } else if i >= n {
                (n - 1, n - 2, (i - n + 1) as f64)
            } else {
                (i, i, 0.0)
            }
        };
        let (ia, ib, wi) = edge(i, rows);
        let (ja, jb, wj) = edge(j, cols);
        let f = |i: isize, j: isize| field[(i * cols + j) as usize];
        let row_a = f(ia, ja) + wj * (f(ia, ja) - f(ia, jb));
        let row_b = f(ib, ja) + wj * (f(ib, ja) - f(ib, jb));
        row_a + wi * (row_a - row_b)
    };

    match kind {
        Interpolation::Bilinear => {
            let top = at(i0, j0) * (1.0 - tu) + at(i0, j0 + 1) * tu;
            let bottom = at(i0 + 1, j0) * (1.0 - tu) + at(i0 + 1, j0 + 1) * tu;
            top * (1.0 - tv) + bottom * tv
        }
        Interpolation::Bicubic => {
            let row = |i: isize| {
                catmull_rom(
                    [at(i, j0 - 1), at(i, j0), at(i, j0 + 1), at(i, j0 + 2)],
                    tu,
                )
            };
            catmull_rom([row(i0 - 1), row(i0), row(i0 + 1), row(i0 + 2)], tv)
        }
    }
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let [p0, p1, p2, p3] = p;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub location: Point2,
    /// Measured power per transmitter, dB.
    pub per_tx_power_db: Vec<f64>,
    /// Acquisition order.
    pub index: usize,
}

impl Measurement {
    /// Total received power, dB.
    pub fn combined_db(&self) -> f64 {
        db_sum(self.per_tx_power_db.iter().copied())
    }
}

/// Sequential measurement source with its own noise stream.
#[derive(Debug, Clone)]
pub struct Sensor {
    rng: ChaCha8Rng,
    noise_sd: f64,
    interpolation: Interpolation,
    next_index: usize,
}

impl Sensor {
    pub fn new(params: &GaussianModelParams, interpolation: Interpolation, seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, Purpose::Noise, 0),
            noise_sd: params.noise_var.sqrt(),
            interpolation,
            next_index: 0,
        }
    }

    pub fn measure(&mut self, map: &RadioMap, x: &Point2) -> Result<Measurement> {
        let grid = &map.grid;
        if !grid.contains(x) {
            return Err(Error::OutOfArea { x: x.x, y: x.y });
        }
        if grid.is_indoor(x) {
            return Err(Error::IndoorMeasurement { x: x.x, y: x.y });
        }
        let per_tx_power_db = map
            .per_tx_power_db
            .iter()
            .map(|layer| {
                let z: f64 = self.rng.sample(StandardNormal);
                interpolate(layer, grid, x, self.interpolation) + self.noise_sd * z
            })
            .collect();
        let index = self.next_index;
        self.next_index += 1;
        Ok(Measurement {
            location: *x,
            per_tx_power_db,
            index,
        })
    }
}

/// Single noisy measurement of every transmitter layer at `x`.
pub fn measure(
    map: &RadioMap,
    x: &Point2,
    params: &GaussianModelParams,
    seed: u64,
) -> Result<Measurement> {
    Sensor::new(params, Interpolation::Bicubic, seed).measure(map, x)
}
