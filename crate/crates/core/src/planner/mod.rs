//! Uncertainty-aware route planning on the measurement grid.
//!
//! A route is a sequence of 8-adjacent grid points. Each step `a -> b`
//! costs `|b - a| * ((1 - beta) / v + beta / 2 * (c(a) + c(b)))`, where
//! `c = h(uncertainty)` is low where the map is uncertain, and the cheapest
//! route to the most uncertain point is followed for a few measurements
//! before replanning.

mod baselines;
mod cost;
mod oracle;
mod path;
mod receding;

pub use baselines::{grid_order, spiral_order, straight_line, uniform_targets, UniformTargets};
pub use cost::{cost_field, edge_cost, CostField, HKind};
pub use oracle::enumerate_min_cost;
pub use path::{bellman_ford_distances, dijkstra_distances, shortest_path, shortest_path_with, Solver};
pub use receding::{plan_receding, select_destination, truncate_plan, PlannerConfig};

/// Ordered waypoints with the cost and travel time of following them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    pub waypoints: Vec<usize>,
    pub total_cost: f64,
    pub total_time_s: f64,
}

impl TrajectoryPlan {
    pub fn start(&self) -> usize {
        self.waypoints[0]
    }

    pub fn destination(&self) -> usize {
        *self.waypoints.last().expect("plans are never empty")
    }
}
