use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::uncertainty::UncertaintyMap;

use super::PlannerConfig;

/// Decreasing map from uncertainty to location cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HKind {
    /// `1 / (u + epsilon)`
    #[default]
    Reciprocal,
    /// `exp(-u)`
    Exponential,
    /// `1`; reduces the planner to shortest paths.
    Constant,
}

impl HKind {
    pub fn eval(self, u: f64, epsilon: f64) -> f64 {
        match self {
            HKind::Reciprocal => 1.0 / (u + epsilon),
            HKind::Exponential => (-u).exp(),
            HKind::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub node_cost: Vec<f64>,
    pub h_kind: HKind,
    pub epsilon: f64,
}

impl CostField {
    pub fn constant(n: usize) -> Self {
        Self {
            node_cost: vec![1.0; n],
            h_kind: HKind::Constant,
            epsilon: 0.0,
        }
    }
}

/// Location costs from the smoothed uncertainty.
pub fn cost_field(umap: &UncertaintyMap, h_kind: HKind, epsilon: f64) -> Result<CostField> {
    if h_kind == HKind::Reciprocal && !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("reciprocal cost needs epsilon > 0".into()));
    }
    Ok(CostField {
        node_cost: umap.smoothed.iter().map(|u| h_kind.eval(*u, epsilon)).collect(),
        h_kind,
        epsilon,
    })
}

/// Trapezoidal cost of the step `a -> b`.
pub fn edge_cost(grid: &GridGeometry, a: usize, b: usize, field: &CostField, config: &PlannerConfig) -> Result<f64> {
    for k in [a, b] {
        if grid.is_building(k) {
            return Err(Error::BlockedNode(k));
        }
    }
    if !grid.is_step(a, b) {
        return Err(Error::NotAdjacent(a, b));
    }
    Ok(step_cost(grid, a, b, field, config))
}

pub(super) fn step_cost(grid: &GridGeometry, a: usize, b: usize, field: &CostField, config: &PlannerConfig) -> f64 {
    let len = grid.step_length(a, b);
    let beta = config.beta;
    len * ((1.0 - beta) / config.speed_mps + 0.5 * beta * (field.node_cost[a] + field.node_cost[b]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::uncertainty::UncertaintySource;

    fn config(beta: f64) -> PlannerConfig {
        PlannerConfig {
            beta,
            speed_mps: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn h_functions() {
        let u = UncertaintyMap::new(vec![0.0, 2.0], UncertaintySource::Bayesian).unwrap();
        let f = cost_field(&u, HKind::Reciprocal, 0.01).unwrap();
        assert!((f.node_cost[0] - 100.0).abs() < 1e-9);
        let f = cost_field(&u, HKind::Exponential, 0.01).unwrap();
        assert_eq!(f.node_cost[0], 1.0);
        let f = cost_field(&u, HKind::Constant, 0.01).unwrap();
        assert_eq!(f.node_cost, vec![1.0, 1.0]);
        assert!(cost_field(&u, HKind::Reciprocal, 0.0).is_err());
    }

    #[test]
    fn edge_cost_examples() {
        let g = GridGeometry::new(3, 3, 3.0, Point2::default()).unwrap();
        let ones = CostField::constant(9);
        assert!((edge_cost(&g, 0, 1, &ones, &config(0.0)).unwrap() - 3.0).abs() < 1e-12);
        assert!((edge_cost(&g, 0, 4, &ones, &config(0.0)).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-12);

        let hundred = CostField {
            node_cost: vec![100.0; 9],
            h_kind: HKind::Reciprocal,
            epsilon: 0.01,
        };
        assert!((edge_cost(&g, 4, 5, &hundred, &config(1.0)).unwrap() - 300.0).abs() < 1e-9);

        let zero = CostField {
            node_cost: vec![0.0; 9],
            h_kind: HKind::Exponential,
            epsilon: 0.0,
        };
        assert!((edge_cost(&g, 4, 5, &zero, &config(0.75)).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(
            edge_cost(&g, 1, 3, &zero, &config(0.3)).unwrap(),
            edge_cost(&g, 3, 1, &zero, &config(0.3)).unwrap()
        );
        assert!(matches!(edge_cost(&g, 0, 2, &zero, &config(0.5)), Err(Error::NotAdjacent(0, 2))));
    }
}
