use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use specsurvey::mapio;
use specsurvey::survey::{
    aggregate, monte_carlo, reconstruction_monte_carlo, run_seed, save_aggregate_csv, save_runs_csv, MapSource,
};
use specsurvey::GridGeometry;

use crate::spec::{Dataset, ExperimentSpec};
use crate::{CliError, CommonArgs};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads the config file (if any) and applies command-line overrides.
pub fn resolve(args: &CommonArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    if let Some(ep) = &args.bridge_endpoint {
        spec.survey.bridge_endpoint = Some(ep.clone());
    }
    if let Some(runs) = args.runs {
        spec.n_runs = runs;
    }
    if let Some(w) = args.workers {
        spec.workers = Some(w);
    }
    spec.validate()?;
    Ok(spec)
}

fn map_source(spec: &ExperimentSpec) -> Result<MapSource, CliError> {
    match &spec.dataset {
        Dataset::Gudmundson {
            rows,
            cols,
            spacing_m,
            origin,
            num_transmitters,
            transmitter,
            buildings,
        } => {
            let grid = GridGeometry::new(*rows, *cols, *spacing_m, *origin)?.with_buildings(buildings.iter().copied())?;
            Ok(MapSource::synthetic(grid, spec.survey.model_params, *transmitter, *num_transmitters)?)
        }
        Dataset::Imported { path } => {
            if !path.exists() {
                return Err(CliError::Io(format!("imported dataset not found: {}", path.display())));
            }
            let map = mapio::read_text(path).map_err(|e| match e {
                specsurvey::Error::Io(io) => io_err(path, io),
                other => CliError::Config(format!("{}: {other}", path.display())),
            })?;
            Ok(MapSource::Fixed(Arc::new(map)))
        }
    }
}

fn prepare_output(spec: &ExperimentSpec) -> Result<(), CliError> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(spec).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(&manifest, json + "\n").map_err(|e| io_err(&manifest, e))
}

fn out_path(spec: &ExperimentSpec, name: &str) -> PathBuf {
    spec.output_dir.join(name)
}

pub fn generate_maps(spec: &ExperimentSpec) -> Result<(), CliError> {
    let source = map_source(spec)?;
    prepare_output(spec)?;
    let count = match source {
        MapSource::Fixed(_) => 1,
        MapSource::Synthetic { .. } => spec.n_runs,
    };
    for i in 0..count {
        let map = source.map(run_seed(spec.seed, i))?;
        let path = out_path(spec, &format!("map_{i:04}.txt"));
        mapio::write_text(&map, &path).map_err(|e| io_err(&path, e))?;
    }
    info!("wrote {count} map(s) to {}", spec.output_dir.display());
    Ok(())
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<(), CliError> {
    let source = map_source(spec)?;
    prepare_output(spec)?;
    for &estimator in &spec.estimators {
        for &planner in &spec.planners {
            let base = spec.campaign_config(estimator, planner);
            let stem = format!("{}_{}", estimator.name(), planner.name());
            let variants = match &spec.sweep {
                None => vec![(stem, base)],
                Some(sweep) => sweep
                    .variants(&base)
                    .into_iter()
                    .map(|(label, cfg)| (format!("{stem}_{}-{label}", sweep.name()), cfg))
                    .collect(),
            };
            for (name, cfg) in variants {
                info!("{name}: {} runs", spec.n_runs);
                let records = monte_carlo(&source, &cfg, spec.n_runs, spec.workers)?;
                let runs = out_path(spec, &format!("{name}_runs.csv"));
                save_runs_csv(&records, &runs).map_err(|e| io_err(&runs, e))?;
                let agg = out_path(spec, &format!("{name}_aggregate.csv"));
                save_aggregate_csv(&aggregate(&records)?, &agg).map_err(|e| io_err(&agg, e))?;
            }
        }
    }
    if let Some(recon) = &spec.reconstruction {
        info!("reconstruction: {} runs", spec.n_runs);
        let cfg = spec.campaign_config(specsurvey::EstimatorKind::OnlineBayes, specsurvey::PlannerKind::Grid);
        let results = reconstruction_monte_carlo(
            &source,
            &recon.estimators,
            &recon.checkpoints,
            &cfg,
            spec.n_runs,
            spec.workers,
        )?;
        write_reconstruction(spec, &recon.estimators, &recon.checkpoints, &results)?;
    }
    Ok(())
}

fn write_csv<F>(path: &Path, header: &[&str], fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut csv::Writer<fs::File>) -> csv::Result<()>,
{
    let write = || -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| io_err(path, e))
}

fn write_reconstruction(
    spec: &ExperimentSpec,
    estimators: &[specsurvey::survey::ReconEstimator],
    checkpoints: &[usize],
    results: &[Vec<Vec<f64>>],
) -> Result<(), CliError> {
    let path = out_path(spec, "reconstruction_runs.csv");
    write_csv(&path, &["run", "estimator", "t", "rmse_db"], |w| {
        for (r, run) in results.iter().enumerate() {
            for (e, est) in estimators.iter().enumerate() {
                for (c, t) in checkpoints.iter().enumerate() {
                    w.write_record(&[r.to_string(), est.name().to_string(), t.to_string(), run[e][c].to_string()])?;
                }
            }
        }
        Ok(())
    })?;

    let path = out_path(spec, "reconstruction_aggregate.csv");
    let n = results.len() as f64;
    write_csv(&path, &["estimator", "t", "mean_rmse", "std_rmse"], |w| {
        for (e, est) in estimators.iter().enumerate() {
            for (c, t) in checkpoints.iter().enumerate() {
                let vals: Vec<f64> = results.iter().map(|run| run[e][c]).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let ms = vals.iter().map(|v| v * v).sum::<f64>() / n;
                let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                w.write_record(&[est.name().to_string(), t.to_string(), ms.sqrt().to_string(), sd.to_string()])?;
            }
        }
        Ok(())
    })
}
