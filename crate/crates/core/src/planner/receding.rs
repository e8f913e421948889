use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::uncertainty::UncertaintyMap;

use super::cost::{cost_field, step_cost, CostField, HKind};
use super::path::{shortest_path, Solver};
use super::TrajectoryPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Weight of the uncertainty cost against travel time, in `[0, 1]`.
    pub beta: f64,
    /// UAV speed, m/s. Only `(1 - beta) / speed` matters, so this rescales beta.
    pub speed_mps: f64,
    /// Measurements collected between replans.
    pub n_update: usize,
    /// Smoothing factor for the planning uncertainty, in `(0, 1]`.
    pub alpha: f64,
    /// Arc length between consecutive measurements, m.
    pub measurement_spacing_m: f64,
    pub h_kind: HKind,
    pub epsilon: f64,
    pub solver: Solver,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            beta: 0.75,
            speed_mps: 1.0,
            n_update: 7,
            alpha: 0.25,
            measurement_spacing_m: 7.0,
            h_kind: HKind::Reciprocal,
            epsilon: 1e-2,
            solver: Solver::Dijkstra,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if !(self.speed_mps > 0.0) {
            return bad("speed_mps must be positive");
        }
        if self.n_update == 0 {
            return bad("n_update must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.measurement_spacing_m > 0.0) {
            return bad("measurement_spacing_m must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be non-negative");
        }
        Ok(())
    }
}

fn argmax_free(values: &[f64], grid: &GridGeometry, skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in grid.free_indices() {
        if Some(k) == skip {
            continue;
        }
        if best.is_none_or(|b| values[k] > values[b]) {
            best = Some(k);
        }
    }
    best
}

/// Most uncertain grid point outside buildings (smoothed values); ties go to
/// the lowest index.
pub fn select_destination(umap: &UncertaintyMap, grid: &GridGeometry) -> Result<usize> {
    argmax_free(&umap.smoothed, grid, None).ok_or(Error::NoFreeSpace)
}

/// Shortens `plan` so that following it collects at most `n_update`
/// measurements, the next one due after `next_sample_in_m` meters of travel.
/// The cut is placed at the first waypoint reached at or after the
/// `n_update`-th measurement point.
pub fn truncate_plan(
    plan: &TrajectoryPlan,
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    next_sample_in_m: f64,
) -> TrajectoryPlan {
    let last_sample = next_sample_in_m + (config.n_update - 1) as f64 * config.measurement_spacing_m;
    let mut arc = 0.0;
    let mut cost = 0.0;
    for (i, w) in plan.waypoints.windows(2).enumerate() {
        arc += grid.step_length(w[0], w[1]);
        cost += step_cost(grid, w[0], w[1], field, config);
        if arc >= last_sample - 1e-9 && i + 2 < plan.waypoints.len() {
            return TrajectoryPlan {
                waypoints: plan.waypoints[..i + 2].to_vec(),
                total_cost: cost,
                total_time_s: arc / config.speed_mps,
            };
        }
    }
    plan.clone()
}

/// One receding-horizon planning step from `current`: pick the most
/// uncertain point (the runner-up if that is `current`), route to it through
/// the cost field and cut the route after `n_update` measurements.
pub fn plan_receding(
    current: usize,
    umap: &UncertaintyMap,
    grid: &GridGeometry,
    config: &PlannerConfig,
    next_sample_in_m: f64,
) -> Result<TrajectoryPlan> {
    config.validate()?;
    let mut dest = select_destination(umap, grid)?;
    if dest == current {
        dest = argmax_free(&umap.smoothed, grid, Some(current)).unwrap_or(current);
    }
    let field = cost_field(umap, config.h_kind, config.epsilon)?;
    let plan = shortest_path(grid, &field, config, current, dest)?;
    Ok(truncate_plan(&plan, grid, &field, config, next_sample_in_m))
}
