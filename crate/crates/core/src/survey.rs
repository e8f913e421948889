//! Surveying episodes and Monte Carlo campaigns.
//!
//! A survey starts at a grid point, moves along planned routes and takes a
//! measurement every `measurement_spacing_m` meters of travel, including one
//! at the start. Metrics are recorded after every measurement; entry `t` of
//! a [`SurveyRecord`] describes the state after `t` measurements, so entry 0
//! is the prior.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{build_observation_planes, BridgeClient, EstimateRequest, EstimateResponse};
use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::kriging::{batch_mean, MeanMode, Observation, PriorMean};
use crate::model::{
    combine_layers, place_transmitters, GaussianModelParams, Interpolation, MapGenerator, Measurement, RadioMap,
    Sensor, Transmitter,
};
use crate::online::{OnlinePrior, OnlineSession};
use crate::planner::{
    grid_order, plan_receding, shortest_path, spiral_order, straight_line, uniform_targets, CostField,
    PlannerConfig, UniformTargets,
};
use crate::rng::{self, Purpose};
use crate::uncertainty::{knn_estimate, rmse_values, smooth, UncertaintyMap, UncertaintySource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    OnlineBayes,
    Bridge,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    MinCost,
    Grid,
    Spiral,
    Uniform,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::MinCost, PlannerKind::Grid, PlannerKind::Spiral, PlannerKind::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::MinCost => "min_cost",
            PlannerKind::Grid => "grid",
            PlannerKind::Spiral => "spiral",
            PlannerKind::Uniform => "uniform",
        }
    }
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::OnlineBayes => "online_bayes",
            EstimatorKind::Bridge => "bridge",
            EstimatorKind::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyConfig {
    pub estimator: EstimatorKind,
    pub planner: PlannerKind,
    pub planner_config: PlannerConfig,
    pub model_params: GaussianModelParams,
    pub max_measurements: usize,
    pub seed: u64,
    /// Snap every measurement to the nearest grid point.
    pub on_grid: bool,
    /// Starting grid point; the first point outside buildings by default.
    pub start: Option<usize>,
    pub interpolation: Interpolation,
    pub mean_mode: MeanMode,
    pub knn_k: usize,
    pub bridge_endpoint: Option<String>,
    pub bridge_timeout_s: f64,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::OnlineBayes,
            planner: PlannerKind::MinCost,
            planner_config: PlannerConfig::default(),
            model_params: GaussianModelParams::default(),
            max_measurements: 100,
            seed: 0,
            on_grid: false,
            start: None,
            interpolation: Interpolation::default(),
            mean_mode: MeanMode::default(),
            knn_k: 5,
            bridge_endpoint: None,
            bridge_timeout_s: 30.0,
        }
    }
}

impl SurveyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        self.planner_config.validate()?;
        self.model_params.validate()?;
        if self.max_measurements == 0 {
            return bad("max_measurements must be at least 1");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be at least 1");
        }
        if self.estimator == EstimatorKind::Knn && self.planner == PlannerKind::MinCost {
            return bad("the min_cost planner needs an estimator with uncertainty (online_bayes or bridge)");
        }
        if self.estimator == EstimatorKind::Bridge && self.bridge_endpoint.is_none() {
            return bad("the bridge estimator needs an endpoint");
        }
        if !(self.bridge_timeout_s > 0.0) {
            return bad("bridge_timeout_s must be positive");
        }
        Ok(())
    }
}

/// Metrics after each measurement; all series have `max_measurements + 1`
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub seed: u64,
    /// dB; NaN while the estimator has no estimate (KNN before the first
    /// measurement).
    pub rmse_db: Vec<f64>,
    /// NaN for estimators without an uncertainty output.
    pub total_uncertainty: Vec<f64>,
    pub position: Vec<Point2>,
    pub cum_distance_m: Vec<f64>,
    /// Excluded from equality checks in determinism tests.
    pub wall_time_s: Vec<f64>,
}

impl SurveyRecord {
    pub fn len(&self) -> usize {
        self.rmse_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rmse_db.is_empty()
    }

    fn push(&mut self, rmse: f64, u: f64, p: Point2, dist: f64, wall: Duration) {
        self.rmse_db.push(rmse);
        self.total_uncertainty.push(u);
        self.position.push(p);
        self.cum_distance_m.push(dist);
        self.wall_time_s.push(wall.as_secs_f64());
    }
}

/// Emits sample positions every `spacing` meters along consecutive paths.
/// Distance left over at the end of one path carries over to the next.
#[derive(Debug, Clone)]
pub struct PathSampler {
    spacing: f64,
    next_in: f64,
}

impl PathSampler {
    pub fn new(spacing_m: f64) -> Self {
        Self {
            spacing: spacing_m,
            next_in: 0.0,
        }
    }

    /// Travel left until the next sample.
    pub fn next_sample_in_m(&self) -> f64 {
        self.next_in
    }

    /// Samples along the piecewise-linear `path`, as (position, arc length
    /// from the path start).
    pub fn walk(&mut self, path: &[Point2]) -> Vec<(Point2, f64)> {
        let tol = 1e-9 * self.spacing;
        let mut out = Vec::new();
        let mut next = self.next_in;
        let mut start_arc = 0.0;
        if path.len() == 1 && next <= tol {
            out.push((path[0], 0.0));
            next += self.spacing;
        }
        for w in path.windows(2) {
            let len = w[0].distance(&w[1]);
            let end = start_arc + len;
            while next <= end + tol {
                let t = if len > 0.0 { ((next - start_arc) / len).clamp(0.0, 1.0) } else { 0.0 };
                out.push((w[0].lerp(&w[1], t), next.min(end)));
                next += self.spacing;
            }
            start_arc = end;
        }
        self.next_in = (next - start_arc).max(0.0);
        out
    }
}

/// Positions at arc lengths `0, s, 2s, ...` along the waypoint path.
pub fn sample_along_path(waypoints: &[Point2], spacing_m: f64) -> Result<Vec<Point2>> {
    if !(spacing_m > 0.0) {
        return Err(Error::InvalidParameter("sample spacing must be positive".into()));
    }
    if waypoints.is_empty() {
        return Err(Error::InvalidParameter("path needs at least one waypoint".into()));
    }
    Ok(PathSampler::new(spacing_m).walk(waypoints).into_iter().map(|(p, _)| p).collect())
}

enum Estimator {
    Online(OnlineSession),
    Knn {
        k: usize,
        samples: Vec<(Point2, f64)>,
    },
    Bridge {
        client: BridgeClient,
        samples: Vec<(Point2, f64)>,
        latest: EstimateResponse,
    },
}

impl Estimator {
    fn new(config: &SurveyConfig, map: &RadioMap, prior: &Arc<OnlinePrior>) -> Result<Self> {
        match config.estimator {
            EstimatorKind::OnlineBayes => {
                let means = layer_means(config.mean_mode, map)?;
                Ok(Estimator::Online(OnlineSession::new(prior.clone(), means, true)?))
            }
            EstimatorKind::Knn => Ok(Estimator::Knn {
                k: config.knn_k,
                samples: Vec::new(),
            }),
            EstimatorKind::Bridge => {
                let endpoint = config.bridge_endpoint.as_deref().unwrap_or_default();
                let timeout = Duration::from_secs_f64(config.bridge_timeout_s);
                let mut client = BridgeClient::connect(endpoint, timeout)?;
                let latest = bridge_query(&mut client, &map.grid, &[])?;
                Ok(Estimator::Bridge {
                    client,
                    samples: Vec::new(),
                    latest,
                })
            }
        }
    }

    fn observe(&mut self, m: &Measurement, grid: &GridGeometry) -> Result<()> {
        match self {
            Estimator::Online(session) => session.update(m),
            Estimator::Knn { samples, .. } => {
                samples.push((m.location, m.combined_db()));
                Ok(())
            }
            Estimator::Bridge {
                client,
                samples,
                latest,
            } => {
                samples.push((m.location, m.combined_db()));
                *latest = bridge_query(client, grid, samples)?;
                Ok(())
            }
        }
    }

    /// Combined-power estimate over the grid.
    fn estimate(&self, grid: &GridGeometry) -> Option<Vec<f64>> {
        match self {
            Estimator::Online(session) => {
                let layers: Vec<Vec<f64>> = (0..session.num_layers())
                    .map(|l| session.mean(l).as_slice().to_vec())
                    .collect();
                Some(combine_layers(&layers))
            }
            Estimator::Knn { k, samples } => knn_estimate(grid, samples, *k),
            Estimator::Bridge { latest, .. } => Some(latest.mean_map.clone()),
        }
    }

    fn uncertainty(&self) -> Option<(Vec<f64>, UncertaintySource)> {
        match self {
            Estimator::Online(session) => {
                Some((session.variances().as_slice().to_vec(), UncertaintySource::Bayesian))
            }
            Estimator::Knn { .. } => None,
            Estimator::Bridge { latest, .. } => Some((latest.uncertainty_map.clone(), UncertaintySource::Network)),
        }
    }
}

fn bridge_query(
    client: &mut BridgeClient,
    grid: &GridGeometry,
    samples: &[(Point2, f64)],
) -> Result<EstimateResponse> {
    let (y_matrix, mask) = build_observation_planes(samples, grid);
    let req = EstimateRequest {
        rows: grid.rows(),
        cols: grid.cols(),
        y_matrix,
        mask,
    };
    Ok(client.request_estimate(&req)?)
}

fn layer_means(mode: MeanMode, map: &RadioMap) -> Result<Vec<PriorMean>> {
    (0..map.num_layers())
        .map(|l| PriorMean::new(mode, map.transmitters.get(l)))
        .collect()
}

fn free_mean(values: &[f64], buildings: &[bool]) -> f64 {
    let (s, c) = values
        .iter()
        .zip(buildings)
        .filter(|(_, b)| !**b)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    s / c as f64
}

enum Targets {
    Ordered { order: Vec<usize>, pos: usize },
    Uniform(Box<UniformTargets>),
}

impl Targets {
    fn next(&mut self) -> Option<usize> {
        match self {
            Targets::Ordered { order, pos } => {
                if order.len() < 2 {
                    return None;
                }
                *pos = (*pos + 1) % order.len();
                Some(order[*pos])
            }
            Targets::Uniform(u) => u.next(),
        }
    }
}

/// Everything that can be shared between runs on the same grid and model.
#[derive(Debug, Clone)]
pub struct Surveyor {
    prior: Arc<OnlinePrior>,
}

impl Surveyor {
    pub fn new(grid: GridGeometry, params: GaussianModelParams) -> Result<Self> {
        Ok(Self {
            prior: OnlinePrior::new(grid, params)?,
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        self.prior.grid()
    }

    pub fn prior(&self) -> &Arc<OnlinePrior> {
        &self.prior
    }

    /// One surveying episode over `map`.
    pub fn run(&self, map: &RadioMap, config: &SurveyConfig) -> Result<SurveyRecord> {
        config.validate()?;
        let grid = &map.grid;
        if grid != self.prior.grid() {
            return Err(Error::InvalidParameter("map grid differs from the surveyor's grid".into()));
        }
        if config.model_params != *self.prior.params() {
            return Err(Error::InvalidParameter("model parameters differ from the surveyor's".into()));
        }
        let clock = Instant::now();
        let pc = &config.planner_config;
        let buildings = grid.building_mask();

        let mut current = match config.start {
            Some(k) if k >= grid.len() => {
                return Err(Error::InvalidParameter(format!("start index {k} out of range")))
            }
            Some(k) if grid.is_building(k) => return Err(Error::BlockedNode(k)),
            Some(k) => k,
            None => grid.free_indices().next().ok_or(Error::NoFreeSpace)?,
        };

        let mut estimator = Estimator::new(config, map, &self.prior)?;
        let mut sensor = Sensor::new(&config.model_params, config.interpolation, config.seed);
        let mut sampler = PathSampler::new(pc.measurement_spacing_m);

        let mut record = SurveyRecord {
            seed: config.seed,
            rmse_db: Vec::new(),
            total_uncertainty: Vec::new(),
            position: Vec::new(),
            cum_distance_m: Vec::new(),
            wall_time_s: Vec::new(),
        };
        let metrics = |est: &Estimator| -> Result<(f64, f64)> {
            let rmse = match est.estimate(grid) {
                Some(e) => rmse_values(&map.combined_power_db, &e, buildings)?,
                None => f64::NAN,
            };
            let u = est.uncertainty().map_or(f64::NAN, |(v, _)| free_mean(&v, buildings));
            Ok((rmse, u))
        };
        let (r0, u0) = metrics(&estimator)?;
        record.push(r0, u0, grid.point(current), 0.0, clock.elapsed());

        let mut targets = match config.planner {
            PlannerKind::MinCost => None,
            PlannerKind::Grid => Some(Targets::Ordered {
                order: grid_order(grid, current),
                pos: 0,
            }),
            PlannerKind::Spiral => Some(Targets::Ordered {
                order: spiral_order(grid, current),
                pos: 0,
            }),
            PlannerKind::Uniform => Some(Targets::Uniform(Box::new(uniform_targets(grid, current, config.seed)))),
        };
        let flat = CostField::constant(grid.len());
        let mut planning_map: Option<UncertaintyMap> = None;
        let mut travelled = 0.0;
        let mut taken = 0usize;

        while taken < config.max_measurements {
            let route = match targets.as_mut() {
                None => {
                    let (fresh, source) = estimator
                        .uncertainty()
                        .ok_or_else(|| Error::InvalidParameter("estimator has no uncertainty".into()))?;
                    let umap = match planning_map.take() {
                        None => UncertaintyMap::new(fresh, source)?,
                        Some(prev) => smooth(&prev, fresh, pc.alpha)?,
                    };
                    let plan = plan_receding(current, &umap, grid, pc, sampler.next_sample_in_m())
                        .map_err(|e| e.at_measurement(taken))?;
                    planning_map = Some(umap);
                    plan.waypoints
                }
                Some(t) => {
                    let target = t.next().ok_or(Error::NoFreeSpace)?;
                    match straight_line(grid, current, target) {
                        Some(line) => line,
                        None => shortest_path(grid, &flat, pc, current, target)?.waypoints,
                    }
                }
            };
            if route.len() < 2 {
                return Err(Error::NoFreeSpace);
            }
            let points: Vec<Point2> = route.iter().map(|&k| grid.point(k)).collect();
            for (p, arc) in sampler.walk(&points) {
                if taken == config.max_measurements {
                    break;
                }
                let x = if config.on_grid { grid.point(grid.nearest_index(&p)) } else { p };
                let m = sensor.measure(map, &x).map_err(|e| e.at_measurement(taken))?;
                estimator.observe(&m, grid).map_err(|e| e.at_measurement(taken))?;
                taken += 1;
                let (r, u) = metrics(&estimator)?;
                record.push(r, u, x, travelled + arc, clock.elapsed());
            }
            travelled += route.windows(2).map(|w| grid.step_length(w[0], w[1])).sum::<f64>();
            current = *route.last().unwrap();
        }
        Ok(record)
    }
}

/// Single surveying episode with a fresh estimator prior.
pub fn run_survey(map: &RadioMap, config: &SurveyConfig) -> Result<SurveyRecord> {
    Surveyor::new(map.grid.clone(), config.model_params)?.run(map, config)
}

/// Where each Monte Carlo run gets its map.
#[derive(Debug, Clone)]
pub enum MapSource {
    /// Fresh shadowing and transmitter placement per run.
    Synthetic {
        generator: MapGenerator,
        template: Transmitter,
        num_transmitters: usize,
    },
    /// The same map in every run; only measurement noise and planner
    /// randomness change.
    Fixed(Arc<RadioMap>),
}

impl MapSource {
    pub fn synthetic(
        grid: GridGeometry,
        params: GaussianModelParams,
        template: Transmitter,
        num_transmitters: usize,
    ) -> Result<Self> {
        if num_transmitters == 0 {
            return Err(Error::InvalidParameter("at least one transmitter required".into()));
        }
        template.validate()?;
        Ok(MapSource::Synthetic {
            generator: MapGenerator::new(grid, params)?,
            template,
            num_transmitters,
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        match self {
            MapSource::Synthetic { generator, .. } => generator.grid(),
            MapSource::Fixed(map) => &map.grid,
        }
    }

    /// Map for the run with sub-seed `run_seed`.
    pub fn map(&self, run_seed: u64) -> Result<Arc<RadioMap>> {
        match self {
            MapSource::Synthetic {
                generator,
                template,
                num_transmitters,
            } => {
                let txs = place_transmitters(generator.grid(), template, *num_transmitters, run_seed);
                Ok(Arc::new(generator.generate(&txs, run_seed)?))
            }
            MapSource::Fixed(map) => Ok(map.clone()),
        }
    }
}

/// Sub-seed of run `r`.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    rng::derive(seed, Purpose::Run, r as u64)
}

/// Runs `f(r, run_seed)` for `r in 0..n_runs` on `workers` threads (all
/// cores when `None`), returning results in run order.
pub fn parallel_runs<T, F>(seed: u64, n_runs: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n_runs).into_par_iter().map(|r| f(r, run_seed(seed, r))).collect())
}

/// Independent surveying episodes, one fresh map per run.
pub fn monte_carlo(
    source: &MapSource,
    config: &SurveyConfig,
    n_runs: usize,
    workers: Option<usize>,
) -> Result<Vec<SurveyRecord>> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    config.validate()?;
    let surveyor = Surveyor::new(source.grid().clone(), config.model_params)?;
    parallel_runs(config.seed, n_runs, workers, |_, seed| {
        let map = source.map(seed)?;
        let cfg = SurveyConfig {
            seed,
            ..config.clone()
        };
        surveyor.run(&map, &cfg)
    })
}

/// Point-wise statistics across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Root of the mean squared per-run RMSE.
    pub mean_rmse: Vec<f64>,
    /// Population standard deviation of the per-run RMSE.
    pub std_rmse: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub std_u: Vec<f64>,
    pub n_runs: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Curves are truncated to the shortest record.
pub fn aggregate(records: &[SurveyRecord]) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("nothing to aggregate".into()));
    }
    let len = records.iter().map(SurveyRecord::len).min().unwrap_or(0);
    let mut agg = Aggregate {
        mean_rmse: Vec::with_capacity(len),
        std_rmse: Vec::with_capacity(len),
        mean_u: Vec::with_capacity(len),
        std_u: Vec::with_capacity(len),
        n_runs: records.len(),
    };
    for t in 0..len {
        let rmse = records.iter().map(|r| r.rmse_db[t]);
        let (_, std_rmse) = mean_std(rmse.clone());
        let (ms, _) = mean_std(rmse.map(|v| v * v));
        let (mean_u, std_u) = mean_std(records.iter().map(|r| r.total_uncertainty[t]));
        agg.mean_rmse.push(ms.sqrt());
        agg.std_rmse.push(std_rmse);
        agg.mean_u.push(mean_u);
        agg.std_u.push(std_u);
    }
    Ok(agg)
}

pub fn write_runs_csv<W: Write>(records: &[SurveyRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "t", "rmse_db", "total_uncertainty", "x_m", "y_m", "cum_dist_m"])?;
    for (r, rec) in records.iter().enumerate() {
        for t in 0..rec.len() {
            let p = rec.position[t];
            w.write_record(&[
                r.to_string(),
                t.to_string(),
                rec.rmse_db[t].to_string(),
                rec.total_uncertainty[t].to_string(),
                p.x.to_string(),
                p.y.to_string(),
                rec.cum_distance_m[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(agg: &Aggregate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "mean_rmse", "std_rmse", "mean_U", "std_U"])?;
    for t in 0..agg.mean_rmse.len() {
        w.write_record(&[
            t.to_string(),
            agg.mean_rmse[t].to_string(),
            agg.std_rmse[t].to_string(),
            agg.mean_u[t].to_string(),
            agg.std_u[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_runs_csv(records: &[SurveyRecord], path: &Path) -> Result<()> {
    write_runs_csv(records, std::fs::File::create(path)?)
}

pub fn save_aggregate_csv(agg: &Aggregate, path: &Path) -> Result<()> {
    write_aggregate_csv(agg, std::fs::File::create(path)?)
}

/// Estimators compared on measurements at independent random locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconEstimator {
    /// Batch kriging over all measurements so far.
    Kriging,
    Online,
    Knn,
}

impl ReconEstimator {
    pub fn name(self) -> &'static str {
        match self {
            ReconEstimator::Kriging => "kriging",
            ReconEstimator::Online => "online",
            ReconEstimator::Knn => "knn",
        }
    }
}

/// `count` uniformly random in-area locations outside buildings.
pub fn random_locations(grid: &GridGeometry, count: usize, seed: u64) -> Result<Vec<Point2>> {
    if grid.free_count() == 0 {
        return Err(Error::NoFreeSpace);
    }
    let mut rng = rng::stream(seed, Purpose::Locations, 0);
    let (w, h) = grid.extent();
    let o = grid.origin();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point2::new(o.x + rng.gen::<f64>() * w, o.y + rng.gen::<f64>() * h);
        if !grid.is_indoor(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// RMSE of each estimator after each count in `checkpoints` of random-location
/// measurements; `result[e][c]`.
pub fn reconstruction_run(
    map: &RadioMap,
    prior: &Arc<OnlinePrior>,
    estimators: &[ReconEstimator],
    checkpoints: &[usize],
    config: &SurveyConfig,
) -> Result<Vec<Vec<f64>>> {
    let grid = &map.grid;
    let params = prior.params();
    let buildings = grid.building_mask();
    let max_t = checkpoints.iter().copied().max().unwrap_or(0);
    let locs = random_locations(grid, max_t, config.seed)?;
    let mut sensor = Sensor::new(params, config.interpolation, config.seed);
    let meas: Vec<Measurement> = locs
        .iter()
        .enumerate()
        .map(|(i, x)| sensor.measure(map, x).map_err(|e| e.at_measurement(i)))
        .collect::<Result<_>>()?;
    let means = layer_means(config.mean_mode, map)?;

    let mut out = vec![Vec::with_capacity(checkpoints.len()); estimators.len()];
    for (e, kind) in estimators.iter().enumerate() {
        let mut session = match kind {
            ReconEstimator::Online => Some(OnlineSession::new(prior.clone(), means.clone(), true)?),
            _ => None,
        };
        let mut fed = 0;
        for &t in checkpoints {
            let estimate = match kind {
                ReconEstimator::Online => {
                    let s = session.as_mut().unwrap();
                    while fed < t {
                        s.update(&meas[fed]).map_err(|e| e.at_measurement(fed))?;
                        fed += 1;
                    }
                    let layers: Vec<Vec<f64>> = (0..s.num_layers()).map(|l| s.mean(l).as_slice().to_vec()).collect();
                    Some(combine_layers(&layers))
                }
                ReconEstimator::Kriging => {
                    let mut layers = Vec::with_capacity(means.len());
                    for (l, mean) in means.iter().enumerate() {
                        let obs: Vec<Observation> = meas[..t]
                            .iter()
                            .map(|m| Observation {
                                location: m.location,
                                power_db: m.per_tx_power_db[l],
                            })
                            .collect();
                        layers.push(batch_mean(&obs, grid, mean, params)?.as_slice().to_vec());
                    }
                    Some(combine_layers(&layers))
                }
                ReconEstimator::Knn => {
                    let samples: Vec<(Point2, f64)> = meas[..t].iter().map(|m| (m.location, m.combined_db())).collect();
                    knn_estimate(grid, &samples, config.knn_k)
                }
            };
            out[e].push(match estimate {
                Some(est) => rmse_values(&map.combined_power_db, &est, buildings)?,
                None => f64::NAN,
            });
        }
    }
    Ok(out)
}

/// Random-location reconstruction over `n_runs` maps; `result[run][e][c]`.
pub fn reconstruction_monte_carlo(
    source: &MapSource,
    estimators: &[ReconEstimator],
    checkpoints: &[usize],
    config: &SurveyConfig,
    n_runs: usize,
    workers: Option<usize>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let prior = OnlinePrior::new(source.grid().clone(), config.model_params)?;
    parallel_runs(config.seed, n_runs, workers, |_, seed| {
        let map = source.map(seed)?;
        let cfg = SurveyConfig {
            seed,
            ..config.clone()
        };
        reconstruction_run(&map, &prior, estimators, checkpoints, &cfg)
    })
}
