//! Simulation studies: for every grid point and trial, draw a panel from
//! the block model, run the configured clusterers, and score each against
//! the planted partition. Emits a long-format CSV (method, grid value,
//! trial, AMI) plus a summary CSV of means — the raw material for the usual
//! comparison figures.

use rayon::prelude::*;

use droclust::baselines::{
    acc_cluster, cord_dissimilarity, correlation_dissimilarity, default_lambda_grid, kmedoids,
    lasso_cv, lasso_nodewise, LassoConfig,
};
use droclust::cluster::{ami, spectral_cluster, symmetrize};
use droclust::datamodel::generate_block_model;
use droclust::delta::select_delta;
use droclust::dro::admm_fit;
use droclust::error::Result;
use droclust::seeding::derive_seed;

use crate::config::{StudyConfig, StudyMethod};

/// One scored run; `ami` is None when the trial failed for that method.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub method: &'static str,
    pub grid_value: f64,
    pub trial: usize,
    pub ami: Option<f64>,
    pub error: Option<String>,
}

/// Mean AMI per (method, grid value) over the trials that succeeded.
#[derive(Debug, Clone)]
pub struct StudySummary {
    pub method: &'static str,
    pub grid_value: f64,
    pub mean_ami: f64,
    pub trials_ok: usize,
    pub trials: usize,
}

/// Runs the whole study. Trials are parallel; each derives its seeds from
/// the master seed and its (grid, trial) index, so worker count never
/// changes the results. Per-trial failures are recorded and the study
/// continues.
pub fn run_study(config: &StudyConfig, seed: u64) -> Result<(Vec<StudyRow>, Vec<StudySummary>)> {
    let grid = config.grid();
    let tasks: Vec<(usize, f64, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, (value, _))| (0..config.trials).map(move |t| (gi, *value, t)))
        .collect();

    let rows: Vec<Vec<StudyRow>> = tasks
        .par_iter()
        .map(|&(gi, value, trial)| {
            let generator = &grid[gi].1;
            let trial_seed = derive_seed(derive_seed(seed, gi as u64), trial as u64);
            run_trial(config, generator, value, trial, trial_seed)
        })
        .collect();
    let mut rows: Vec<StudyRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.grid_value
            .partial_cmp(&b.grid_value)
            .unwrap()
            .then(a.method.cmp(b.method))
            .then(a.trial.cmp(&b.trial))
    });

    let mut summaries = Vec::new();
    for (value, _) in &grid {
        for method in &config.methods {
            let label = method.label();
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == label && r.grid_value == *value)
                .filter_map(|r| r.ami)
                .collect();
            let trials_ok = scores.len();
            let mean = if trials_ok > 0 {
                scores.iter().sum::<f64>() / trials_ok as f64
            } else {
                f64::NAN
            };
            summaries.push(StudySummary {
                method: label,
                grid_value: *value,
                mean_ami: mean,
                trials_ok,
                trials: config.trials,
            });
        }
    }
    Ok((rows, summaries))
}

fn run_trial(
    config: &StudyConfig,
    generator: &droclust::datamodel::BlockModelConfig,
    grid_value: f64,
    trial: usize,
    trial_seed: u64,
) -> Vec<StudyRow> {
    let k = generator.k;
    let row = |method: StudyMethod, result: Result<f64>| -> StudyRow {
        match result {
            Ok(ami) => StudyRow {
                method: method.label(),
                grid_value,
                trial,
                ami: Some(ami),
                error: None,
            },
            Err(e) => StudyRow {
                method: method.label(),
                grid_value,
                trial,
                ami: None,
                error: Some(e.to_string()),
            },
        }
    };

    let generated = generate_block_model(generator, derive_seed(trial_seed, 0));
    let (panel, truth) = match generated {
        Ok((panel, truth, _)) => (panel, truth),
        Err(e) => {
            // the draw itself failed: every requested method records it
            return config
                .methods
                .iter()
                .map(|m| row(*m, Err(clone_error(&e))))
                .collect();
        }
    };

    config
        .methods
        .iter()
        .map(|method| match method {
            StudyMethod::Dro => row(
                StudyMethod::Dro,
                (|| {
                    let delta = select_delta(&panel, &config.delta, derive_seed(trial_seed, 1))?;
                    let (coef, _) = admm_fit(&panel, delta.delta, &config.solver)?;
                    let partition =
                        spectral_cluster(&symmetrize(&coef), k, derive_seed(trial_seed, 2))?;
                    ami(&partition, &truth)
                })(),
            ),
            StudyMethod::Lasso => row(
                StudyMethod::Lasso,
                (|| {
                    let lasso_cfg = LassoConfig {
                        lambda_grid: default_lambda_grid(&panel),
                        cv_folds: config.cv_folds,
                        seed: derive_seed(trial_seed, 3),
                    };
                    let lambda = lasso_cv(&panel, &lasso_cfg)?;
                    let coef = lasso_nodewise(&panel, lambda)?;
                    let partition =
                        spectral_cluster(&symmetrize(&coef), k, derive_seed(trial_seed, 4))?;
                    ami(&partition, &truth)
                })(),
            ),
            StudyMethod::Acc => row(
                StudyMethod::Acc,
                (|| {
                    let dist = cord_dissimilarity(&panel)?;
                    let partition = acc_cluster(&dist, k)?;
                    ami(&partition, &truth)
                })(),
            ),
            StudyMethod::KMedoids => row(
                StudyMethod::KMedoids,
                (|| {
                    let dist = correlation_dissimilarity(&panel)?;
                    let partition = kmedoids(&dist, k, derive_seed(trial_seed, 5))?;
                    ami(&partition, &truth)
                })(),
            ),
        })
        .collect()
}

fn clone_error(e: &droclust::Error) -> droclust::Error {
    droclust::Error::InvalidSpec(e.to_string())
}
