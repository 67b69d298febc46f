use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feature::{FeatureSet, ForceFeature};
use super::model::ForceModel;
use super::svr::{train, Dataset, SvrParams};
use crate::error::{Error, Result};

/// One indentor press: features sampled along the trace with the true force.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrial {
    pub id: String,
    /// Indentor shape.
    pub tag: String,
    pub samples: Vec<(ForceFeature, f64)>,
}

pub fn dataset_from_trials<'a>(trials: impl IntoIterator<Item = &'a ForceTrial>, set: FeatureSet) -> Dataset {
    let mut ds = Dataset::new(set.dim());
    for tr in trials {
        for (f, y) in &tr.samples {
            ds.push(f.select(set), *y);
        }
    }
    ds
}

pub fn rmse(model: &ForceModel, ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let se: f64 = (0..ds.len())
        .map(|i| (model.predict(ds.row(i)) - ds.target(i)).powi(2))
        .sum();
    (se / ds.len() as f64).sqrt()
}

/// Trial index → fold index, from a seeded shuffle dealt round-robin.
pub fn assign_folds(n_trials: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n_trials {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds requested for {n_trials} trials"
        )));
    }
    let mut order: Vec<usize> = (0..n_trials).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n_trials];
    for (k, &t) in order.iter().enumerate() {
        fold[t] = k % folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub feature_set: FeatureSet,
    pub params: SvrParams,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            feature_set: FeatureSet::Full,
            params: SvrParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub test_trials: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub rmse: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of per-fold RMSE.
    pub mean_rmse: f64,
    /// RMSE over all held-out samples pooled together.
    pub pooled_rmse: f64,
}

/// Trial-wise k-fold cross-validation. Folds train in parallel.
pub fn cross_validate(trials: &[ForceTrial], cfg: &CvConfig) -> Result<CvReport> {
    let fold_of = assign_folds(trials.len(), cfg.folds, cfg.seed)?;
    let results: Vec<Result<(FoldResult, f64)>> = (0..cfg.folds)
        .into_par_iter()
        .map(|k| {
            let train_set = dataset_from_trials(
                trials.iter().zip(&fold_of).filter(|(_, &f)| f != k).map(|(t, _)| t),
                cfg.feature_set,
            );
            let test: Vec<&ForceTrial> = trials.iter().zip(&fold_of).filter(|(_, &f)| f == k).map(|(t, _)| t).collect();
            let test_set = dataset_from_trials(test.iter().copied(), cfg.feature_set);
            let (model, converged, iterations) = match train(&train_set, &cfg.params, cfg.feature_set) {
                Ok((m, r)) => (m, true, r.iterations),
                Err(Error::NotConverged { best, iterations, .. }) => (*best, false, iterations),
                Err(e) => return Err(e),
            };
            let r = rmse(&model, &test_set);
            let fr = FoldResult {
                fold: k,
                test_trials: test.iter().map(|t| t.id.clone()).collect(),
                n_train: train_set.len(),
                n_test: test_set.len(),
                rmse: r,
                converged,
                iterations,
            };
            Ok((fr, r * r * test_set.len() as f64))
        })
        .collect();
    let mut folds = Vec::with_capacity(cfg.folds);
    let mut se = 0.0;
    let mut n = 0usize;
    for r in results {
        let (fr, s) = r?;
        se += s;
        n += fr.n_test;
        folds.push(fr);
    }
    let mean_rmse = folds.iter().map(|f| f.rmse).sum::<f64>() / folds.len() as f64;
    Ok(CvReport {
        folds,
        mean_rmse,
        pooled_rmse: if n > 0 { (se / n as f64).sqrt() } else { 0.0 },
    })
}
