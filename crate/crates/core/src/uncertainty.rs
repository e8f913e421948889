//! Uncertainty maps consumed by the planner, plus the evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::kriging::Posterior;
use crate::model::RadioMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintySource {
    /// Posterior variances, dB².
    Bayesian,
    /// Residual-magnitude estimates from an external estimator, dB.
    Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    /// Point-wise uncertainty at the latest update.
    pub values: Vec<f64>,
    /// Running average used for planning.
    pub smoothed: Vec<f64>,
    pub source: UncertaintySource,
}

impl UncertaintyMap {
    /// Fresh map; `smoothed` starts equal to `values`. Round-off negatives
    /// (down to `-1e-9`) are clamped to zero.
    pub fn new(values: Vec<f64>, source: UncertaintySource) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| {
                if v >= 0.0 {
                    Ok(v)
                } else if v >= -1e-9 {
                    Ok(0.0)
                } else {
                    Err(Error::InvalidParameter(format!("negative uncertainty {v}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            smoothed: values.clone(),
            values,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Average of the posterior variances across transmitters.
pub fn bayes_uncertainty(posteriors: &[Posterior]) -> Result<UncertaintyMap> {
    let first = posteriors
        .first()
        .ok_or_else(|| Error::InvalidParameter("no posteriors to aggregate".into()))?;
    let n = first.mean.len();
    let mut acc = vec![0.0; n];
    for p in posteriors {
        if p.cov.nrows() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: p.cov.nrows(),
            });
        }
        for (a, v) in acc.iter_mut().zip(p.cov.diagonal().iter()) {
            *a += v;
        }
    }
    let count = posteriors.len() as f64;
    UncertaintyMap::new(acc.into_iter().map(|v| v / count).collect(), UncertaintySource::Bayesian)
}

fn free_mean<I: Iterator<Item = f64>>(values: I, buildings: &[bool]) -> Result<f64> {
    let (sum, count) = values
        .zip(buildings)
        .filter(|(_, b)| !**b)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::NoFreeSpace);
    }
    Ok(sum / count as f64)
}

/// Spatial average of the point-wise uncertainty outside buildings.
pub fn total_uncertainty(umap: &UncertaintyMap, buildings: &[bool]) -> Result<f64> {
    if umap.len() != buildings.len() {
        return Err(Error::ShapeMismatch {
            expected: buildings.len(),
            actual: umap.len(),
        });
    }
    free_mean(umap.values.iter().copied(), buildings)
}

/// Exponential running average `alpha * fresh + (1 - alpha) * previous`.
pub fn smooth(prev: &UncertaintyMap, fresh: Vec<f64>, alpha: f64) -> Result<UncertaintyMap> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("smoothing factor {alpha} not in (0, 1]")));
    }
    if fresh.len() != prev.len() {
        return Err(Error::ShapeMismatch {
            expected: prev.len(),
            actual: fresh.len(),
        });
    }
    let mut next = UncertaintyMap::new(fresh, prev.source)?;
    if alpha < 1.0 {
        for (s, p) in next.smoothed.iter_mut().zip(&prev.smoothed) {
            *s = *s * alpha + p * (1.0 - alpha);
        }
    }
    Ok(next)
}

/// Root mean squared error against the combined map, outside buildings.
pub fn rmse(truth: &RadioMap, estimate: &[f64], buildings: &[bool]) -> Result<f64> {
    rmse_values(&truth.combined_power_db, estimate, buildings)
}

pub fn rmse_values(truth: &[f64], estimate: &[f64], buildings: &[bool]) -> Result<f64> {
    if estimate.len() != truth.len() || buildings.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: truth.len(),
            actual: estimate.len().min(buildings.len()),
        });
    }
    Ok(free_mean(truth.iter().zip(estimate).map(|(t, e)| (t - e).powi(2)), buildings)?.sqrt())
}

/// K-nearest-neighbour map estimate: each grid point takes the plain average
/// of the `k` closest measured values (fewer if fewer are available). Ties
/// in distance keep acquisition order. Empty input yields `None`.
pub fn knn_estimate(grid: &GridGeometry, samples: &[(Point2, f64)], k: usize) -> Option<Vec<f64>> {
    if samples.is_empty() || k == 0 {
        return None;
    }
    let k = k.min(samples.len());
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
    let est = (0..grid.len())
        .map(|g| {
            let p = grid.point(g);
            scratch.clear();
            scratch.extend(samples.iter().enumerate().map(|(i, (x, _))| (x.distance(&p), i)));
            scratch.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scratch[..k].iter().map(|(_, i)| samples[*i].1).sum::<f64>() / k as f64
        })
        .collect();
    Some(est)
}
