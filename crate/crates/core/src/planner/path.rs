use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;

use super::cost::{step_cost, CostField};
use super::{PlannerConfig, TrajectoryPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Reference label-correcting solver.
    BellmanFord,
    /// Label-setting solver; valid because step costs are non-negative.
    #[default]
    Dijkstra,
}

/// Relative slack when deciding whether a step lies on a cheapest route.
const TIGHT_REL: f64 = 1e-12;

/// Cheapest cost from `start` to every grid point (`inf` if unreachable).
pub fn bellman_ford_distances(grid: &GridGeometry, field: &CostField, config: &PlannerConfig, start: usize) -> Vec<f64> {
    let n = grid.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[start] = 0.0;
    for _ in 1..n.max(2) {
        let mut changed = false;
        for u in 0..n {
            if !dist[u].is_finite() {
                continue;
            }
            for v in grid.neighbors(u) {
                let cand = dist[u] + step_cost(grid, u, v, field, config);
                if cand < dist[v] {
                    dist[v] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dijkstra_distances(grid: &GridGeometry, field: &CostField, config: &PlannerConfig, start: usize) -> Vec<f64> {
    let n = grid.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for v in grid.neighbors(u) {
            let cand = d + step_cost(grid, u, v, field, config);
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(Entry(cand, v));
            }
        }
    }
    dist
}

/// Cheapest route with the configured solver.
pub fn shortest_path(
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    start: usize,
    dest: usize,
) -> Result<TrajectoryPlan> {
    shortest_path_with(grid, field, config, start, dest, config.solver)
}

/// Cheapest route from `start` to `dest`. Among equally cheap routes the one
/// with fewest steps wins, then the lowest-index predecessor at every step
/// walking back from `dest`.
pub fn shortest_path_with(
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    start: usize,
    dest: usize,
    solver: Solver,
) -> Result<TrajectoryPlan> {
    for k in [start, dest] {
        if k >= grid.len() {
            return Err(Error::InvalidParameter(format!("grid index {k} out of range")));
        }
        if grid.is_building(k) {
            return Err(Error::BlockedNode(k));
        }
    }
    if field.node_cost.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            actual: field.node_cost.len(),
        });
    }
    let dist = match solver {
        Solver::BellmanFord => bellman_ford_distances(grid, field, config, start),
        Solver::Dijkstra => dijkstra_distances(grid, field, config, start),
    };
    if !dist[dest].is_finite() {
        return Err(Error::DestinationDisconnected);
    }
    let waypoints = backtrack(grid, field, config, &dist, start, dest);

    let mut total_cost = 0.0;
    let mut length = 0.0;
    for w in waypoints.windows(2) {
        total_cost += step_cost(grid, w[0], w[1], field, config);
        length += grid.step_length(w[0], w[1]);
    }
    Ok(TrajectoryPlan {
        waypoints,
        total_cost,
        total_time_s: length / config.speed_mps,
    })
}

fn backtrack(
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    dist: &[f64],
    start: usize,
    dest: usize,
) -> Vec<usize> {
    let tight = |u: usize, v: usize| {
        let cand = dist[u] + step_cost(grid, u, v, field, config);
        (cand - dist[v]).abs() <= TIGHT_REL * dist[v].abs().max(1.0)
    };
    // hop counts over cheapest-route steps; zero-cost steps cannot loop
    let mut hops = vec![usize::MAX; grid.len()];
    hops[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == dest {
            break;
        }
        for v in grid.neighbors(u) {
            if hops[v] == usize::MAX && dist[v].is_finite() && tight(u, v) {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![dest];
    let mut v = dest;
    while v != start {
        let u = grid
            .neighbors(v)
            .filter(|&u| hops[u] != usize::MAX && hops[u] + 1 == hops[v] && tight(u, v))
            .min()
            .expect("cheapest-route steps form a connected tree from start");
        path.push(u);
        v = u;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn grid(rows: usize, cols: usize) -> GridGeometry {
        GridGeometry::new(rows, cols, 3.0, Point2::default()).unwrap()
    }

    fn cfg(beta: f64) -> PlannerConfig {
        PlannerConfig {
            beta,
            ..Default::default()
        }
    }

    #[test]
    fn trivial_plan() {
        let g = grid(3, 3);
        let p = shortest_path(&g, &CostField::constant(9), &cfg(0.5), 4, 4).unwrap();
        assert_eq!(p.waypoints, vec![4]);
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.total_time_s, 0.0);
    }

    #[test]
    fn distance_only_paths_are_geometric() {
        let g = grid(5, 7);
        let f = CostField::constant(g.len());
        for solver in [Solver::BellmanFord, Solver::Dijkstra] {
            let p = shortest_path_with(&g, &f, &cfg(0.0), 0, g.index(2, 6), solver).unwrap();
            // 2 diagonal + 4 straight steps
            let want = 3.0 * (2.0 * 2f64.sqrt() + 4.0);
            assert!((p.total_cost - want).abs() < 1e-9);
            assert!((p.total_time_s - want).abs() < 1e-9);
            assert_eq!(p.waypoints.len(), 7);
        }
    }

    #[test]
    fn routes_around_buildings_or_fails() {
        // wall on column 1 except the bottom row
        let g = grid(3, 3).with_buildings([1, 4]).unwrap();
        let p = shortest_path(&g, &CostField::constant(9), &cfg(0.0), 0, 2).unwrap();
        // diagonals 3->7 and 7->5 would cut the corners of 4
        assert_eq!(p.waypoints, vec![0, 3, 6, 7, 8, 5, 2]);
        let g = grid(3, 3).with_buildings([1, 4, 7]).unwrap();
        assert!(matches!(
            shortest_path(&g, &CostField::constant(9), &cfg(0.0), 0, 2),
            Err(Error::DestinationDisconnected)
        ));
    }
}
