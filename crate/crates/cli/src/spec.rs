//! Experiment description read from `--config` and echoed to the manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use specsurvey::survey::ReconEstimator;
use specsurvey::{EstimatorKind, HKind, PlannerKind, Point2, SurveyConfig, Transmitter};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dataset {
    /// Fresh synthetic maps per run.
    Gudmundson {
        #[serde(default = "default_size")]
        rows: usize,
        #[serde(default = "default_size")]
        cols: usize,
        #[serde(default = "default_spacing")]
        spacing_m: f64,
        #[serde(default)]
        origin: Point2,
        #[serde(default = "default_tx_count")]
        num_transmitters: usize,
        #[serde(default = "default_tx")]
        transmitter: Transmitter,
        #[serde(default)]
        buildings: Vec<usize>,
    },
    /// One map file in the text format, reused by every run.
    Imported { path: PathBuf },
}

fn default_size() -> usize {
    32
}

fn default_spacing() -> f64 {
    3.0
}

fn default_tx_count() -> usize {
    2
}

/// Placement is random per run; the position here is ignored.
fn default_tx() -> Transmitter {
    Transmitter {
        position: Point2::default(),
        height_m: 20.0,
        power_dbm: 10.0,
        carrier_hz: 2.4e9,
    }
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::Gudmundson {
            rows: default_size(),
            cols: default_size(),
            spacing_m: default_spacing(),
            origin: Point2::default(),
            num_transmitters: default_tx_count(),
            transmitter: default_tx(),
            buildings: Vec::new(),
        }
    }
}

/// One planner setting varied across otherwise identical campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Beta(Vec<f64>),
    HKind(Vec<HKind>),
    Alpha(Vec<f64>),
    NUpdate(Vec<usize>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Beta(_) => "beta",
            Sweep::HKind(_) => "h",
            Sweep::Alpha(_) => "alpha",
            Sweep::NUpdate(_) => "n_update",
        }
    }

    /// `(label, config)` per swept value.
    pub fn variants(&self, base: &SurveyConfig) -> Vec<(String, SurveyConfig)> {
        let with = |f: &dyn Fn(&mut SurveyConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            Sweep::Beta(v) => v.iter().map(|b| (b.to_string(), with(&|c| c.planner_config.beta = *b))).collect(),
            Sweep::Alpha(v) => v.iter().map(|a| (a.to_string(), with(&|c| c.planner_config.alpha = *a))).collect(),
            Sweep::NUpdate(v) => v.iter().map(|n| (n.to_string(), with(&|c| c.planner_config.n_update = *n))).collect(),
            Sweep::HKind(v) => v
                .iter()
                .map(|h| {
                    let label = match h {
                        HKind::Reciprocal => "reciprocal",
                        HKind::Exponential => "exponential",
                        HKind::Constant => "constant",
                    };
                    (label.to_string(), with(&|c| c.planner_config.h_kind = *h))
                })
                .collect(),
        }
    }
}

/// Estimator comparison on measurements at independent random locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reconstruction {
    pub estimators: Vec<ReconEstimator>,
    /// Measurement counts at which the RMSE is evaluated.
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub dataset: Dataset,
    pub estimators: Vec<EstimatorKind>,
    pub planners: Vec<PlannerKind>,
    pub n_runs: usize,
    /// Defaults for every campaign; `estimator`, `planner` and `seed` are
    /// overwritten per campaign.
    pub survey: SurveyConfig,
    pub sweep: Option<Sweep>,
    pub reconstruction: Option<Reconstruction>,
    pub output_dir: PathBuf,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            dataset: Dataset::default(),
            estimators: vec![EstimatorKind::OnlineBayes],
            planners: PlannerKind::ALL.to_vec(),
            n_runs: 100,
            survey: SurveyConfig::default(),
            sweep: None,
            reconstruction: None,
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.estimators.is_empty() && self.reconstruction.is_none() {
            return bad("nothing to run: no estimators and no reconstruction".into());
        }
        if !self.estimators.is_empty() && self.planners.is_empty() {
            return bad("no planners listed".into());
        }
        for &e in &self.estimators {
            for &p in &self.planners {
                let cfg = self.campaign_config(e, p);
                cfg.validate()
                    .map_err(|err| CliError::Config(format!("{}/{}: {err}", e.name(), p.name())))?;
                if let Some(sweep) = &self.sweep {
                    for (label, c) in sweep.variants(&cfg) {
                        c.validate().map_err(|err| {
                            CliError::Config(format!("{}/{} {}={label}: {err}", e.name(), p.name(), sweep.name()))
                        })?;
                    }
                }
            }
        }
        if let Some(r) = &self.reconstruction {
            if r.estimators.is_empty() || r.checkpoints.is_empty() {
                return bad("reconstruction needs estimators and checkpoints".into());
            }
        }
        if let Dataset::Gudmundson { num_transmitters: 0, .. } = self.dataset {
            return bad("num_transmitters must be at least 1".into());
        }
        Ok(())
    }

    pub fn campaign_config(&self, estimator: EstimatorKind, planner: PlannerKind) -> SurveyConfig {
        SurveyConfig {
            estimator,
            planner,
            seed: self.seed,
            ..self.survey.clone()
        }
    }
}
