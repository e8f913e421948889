//! Exhaustive reference for small grids.

use crate::geometry::GridGeometry;

use super::cost::{step_cost, CostField};
use super::PlannerConfig;

/// Cheapest simple path from `start` to `dest` by depth-first enumeration of
/// every simple path, or `None` if there is none. Exponential; meant for
/// grids of a few dozen points. Partial paths already costlier than the best
/// complete one are cut, which cannot hide a cheaper path since step costs
/// are non-negative.
pub fn enumerate_min_cost(
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    start: usize,
    dest: usize,
) -> Option<(f64, Vec<usize>)> {
    if grid.is_building(start) || grid.is_building(dest) {
        return None;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = vec![false; grid.len()];
    let mut path = vec![start];
    visited[start] = true;
    dfs(grid, field, config, dest, 0.0, &mut path, &mut visited, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    grid: &GridGeometry,
    field: &CostField,
    config: &PlannerConfig,
    dest: usize,
    cost: f64,
    path: &mut Vec<usize>,
    visited: &mut [bool],
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let u = *path.last().unwrap();
    if u == dest {
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            *best = Some((cost, path.clone()));
        }
        return;
    }
    if best.as_ref().is_some_and(|(b, _)| cost > *b) {
        return;
    }
    let next: Vec<usize> = grid.neighbors(u).collect();
    for v in next {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        path.push(v);
        dfs(grid, field, config, dest, cost + step_cost(grid, u, v, field, config), path, visited, best);
        path.pop();
        visited[v] = false;
    }
}
