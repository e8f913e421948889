//! Active radio map construction: synthetic shadowing maps, batch and online
//! Bayesian map estimation, uncertainty-aware UAV route planning and the
//! surveying loop that ties them together.
//!
//! ```
//! use specsurvey::{GaussianModelParams, GridGeometry, Point2, SurveyConfig, Transmitter};
//! use specsurvey::survey::{MapSource, monte_carlo, aggregate};
//!
//! let grid = GridGeometry::new(8, 8, 3.0, Point2::default()).unwrap();
//! let tx = Transmitter { position: Point2::default(), height_m: 20.0, power_dbm: 10.0, carrier_hz: 2.4e9 };
//! let params = GaussianModelParams::default();
//! let source = MapSource::synthetic(grid, params, tx, 2).unwrap();
//! let cfg = SurveyConfig { max_measurements: 10, ..SurveyConfig::default() };
//! let runs = monte_carlo(&source, &cfg, 2, Some(1)).unwrap();
//! let agg = aggregate(&runs).unwrap();
//! assert_eq!(agg.mean_u.len(), 11);
//! assert!(agg.mean_u[10] < agg.mean_u[0]);
//! ```

// NaN must fail every positivity check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod error;
pub mod geometry;
pub mod kriging;
pub mod mapio;
pub mod model;
pub mod online;
pub mod planner;
pub mod rng;
pub mod survey;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{GridGeometry, Point2};
pub use kriging::{batch_posterior, MeanMode, Observation, Posterior, PriorMean};
pub use model::{
    base_power, generate_map, shadowing_covariance, GaussianModelParams, Interpolation, MapGenerator, Measurement,
    RadioMap, Sensor, Transmitter,
};
pub use online::{compute_update_terms, init_posterior, update_posterior, OnlinePrior, OnlineSession, UpdateTerms};
pub use planner::{HKind, PlannerConfig, Solver, TrajectoryPlan};
pub use survey::{run_survey, EstimatorKind, PlannerKind, SurveyConfig, SurveyRecord};
pub use uncertainty::{UncertaintyMap, UncertaintySource};
