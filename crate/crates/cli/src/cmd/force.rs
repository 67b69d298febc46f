use std::path::PathBuf;

use clap::ValueEnum;

use forte_core::force::dataset::{load_trials, ExtractConfig};
use forte_core::force::{cross_validate, dataset_from_trials, rmse, train as fit, CvConfig, CvReport, FeatureSet, ForceTrial, SvrParams};
use forte_core::kv::KvFile;
use forte_core::sim::{force_trials, ScenarioKind};
use forte_core::trace::CsvSink;
use forte_core::Error;

use crate::config;
use crate::fail::{Failure, Gate};
use crate::Common;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Features {
    /// Current frame plus the 2.5, 5 and 10 s means (24 values).
    Full,
    /// Current frame only (6 values).
    Current,
    /// Both, for comparison.
    Both,
}

impl Features {
    fn sets(self) -> Vec<FeatureSet> {
        match self {
            Features::Full => vec![FeatureSet::Full],
            Features::Current => vec![FeatureSet::CurrentOnly],
            Features::Both => vec![FeatureSet::Full, FeatureSet::CurrentOnly],
        }
    }
}

fn set_name(s: FeatureSet) -> &'static str {
    match s {
        FeatureSet::Full => "full",
        FeatureSet::CurrentOnly => "current",
    }
}

#[derive(clap::Args, Debug)]
pub struct Source {
    /// Manifest CSV `trial_id,tag,trace[,load]` of recorded trials.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Simulated protocol to use without a manifest (B, or E with drift).
    #[arg(long, default_value = "B", conflicts_with = "manifest")]
    pub scenario: String,
    /// Simulated presses per indentor shape.
    #[arg(long, default_value_t = 40, conflicts_with = "manifest")]
    pub trials_per_tag: usize,
}

impl Source {
    fn load(&self, extract: &ExtractConfig, seed: u64) -> Result<Vec<ForceTrial>, Failure> {
        if let Some(m) = &self.manifest {
            return Ok(load_trials(m, extract)?);
        }
        let kind: ScenarioKind = self.scenario.parse().map_err(Failure::usage)?;
        if !kind.is_force_protocol() {
            return Err(Failure::Usage(format!("scenario {kind} has no force labels; use B or E")));
        }
        if self.trials_per_tag == 0 {
            return Err(Failure::Usage("--trials-per-tag must be at least 1".into()));
        }
        Ok(force_trials(kind, self.trials_per_tag, seed, extract)?)
    }
}

fn settings(kv: &KvFile) -> forte_core::Result<(ExtractConfig, SvrParams)> {
    Ok((config::extract(kv)?, config::svr(kv)?))
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = Features::Full)]
    pub features: Features,
    /// Where to write the model JSON.
    #[arg(long, short, default_value = "model.json")]
    pub output: PathBuf,
}

pub fn train(a: TrainArgs, seed: u64) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let (extract, params) = config::apply(&kv, settings)?;
    let set = match a.features {
        Features::Full => FeatureSet::Full,
        Features::Current => FeatureSet::CurrentOnly,
        Features::Both => return Err(Failure::Usage("train-force fits one feature set at a time".into())),
    };
    let trials = a.source.load(&extract, seed)?;
    let ds = dataset_from_trials(trials.iter(), set);
    let model = match fit(&ds, &params, set) {
        Ok((m, r)) => {
            println!("converged after {} iterations (KKT gap {:.3e})", r.iterations, r.gap);
            m
        }
        Err(Error::NotConverged { iterations, gap, best }) => {
            eprintln!("warning: no convergence after {iterations} iterations (KKT gap {gap:.3e}); saving the best model");
            *best
        }
        Err(e) => return Err(e.into()),
    };
    model.save(&a.output)?;
    println!(
        "{} trials, {} samples, {} support vectors, training RMSE {:.4} N -> {}",
        trials.len(),
        ds.len(),
        model.n_sv(),
        rmse(&model, &ds),
        a.output.display()
    );
    Ok(())
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = Features::Both)]
    pub features: Features,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Fail (exit 3) if the mean fold RMSE exceeds this (N). Checks the full
    /// feature set unless only `current` is evaluated.
    #[arg(long)]
    pub max_rmse: Option<f64>,
    /// Fail (exit 3) unless the full feature set beats the current-only one.
    #[arg(long)]
    pub require_full_better: bool,
}

pub fn eval(a: EvalArgs, seed: u64) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let (extract, params) = config::apply(&kv, settings)?;
    if a.require_full_better && a.features != Features::Both {
        return Err(Failure::Usage("--require-full-better needs --features both".into()));
    }
    let trials = a.source.load(&extract, seed)?;
    let reports: Vec<(FeatureSet, CvReport)> = a
        .features
        .sets()
        .into_iter()
        .map(|feature_set| {
            let cfg = CvConfig {
                folds: a.folds,
                seed,
                feature_set,
                params,
            };
            cross_validate(&trials, &cfg).map(|r| (feature_set, r))
        })
        .collect::<forte_core::Result<_>>()?;

    config::create_dir(&a.out)?;
    let mut folds = CsvSink::create(
        &a.out.join("cv_folds.csv"),
        &["features", "fold", "n_train", "n_test", "rmse", "converged", "iterations"],
    )?;
    let mut summary = CsvSink::create(&a.out.join("cv_summary.csv"), &["features", "folds", "mean_rmse", "pooled_rmse"])?;
    for (set, r) in &reports {
        for f in &r.folds {
            folds.line([
                set_name(*set).to_string(),
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_test.to_string(),
                f.rmse.to_string(),
                f.converged.to_string(),
                f.iterations.to_string(),
            ])?;
        }
        summary.line([
            set_name(*set).to_string(),
            r.folds.len().to_string(),
            r.mean_rmse.to_string(),
            r.pooled_rmse.to_string(),
        ])?;
        let unconverged = r.folds.iter().filter(|f| !f.converged).count();
        println!(
            "{:8} mean RMSE {:.4} N, pooled {:.4} N over {} trials{}",
            set_name(*set),
            r.mean_rmse,
            r.pooled_rmse,
            trials.len(),
            if unconverged > 0 { format!(" ({unconverged} folds unconverged)") } else { String::new() }
        );
    }
    folds.finish()?;
    summary.finish()?;

    let mean = |s: FeatureSet| reports.iter().find(|(x, _)| *x == s).map(|(_, r)| r.mean_rmse);
    let mut gate = Gate::default();
    if let Some(max) = a.max_rmse {
        let (set, r) = &reports[0];
        gate.check(r.mean_rmse <= max, || format!("{} RMSE {} > {max}", set_name(*set), r.mean_rmse));
    }
    if a.require_full_better {
        let (full, cur) = (mean(FeatureSet::Full).unwrap(), mean(FeatureSet::CurrentOnly).unwrap());
        gate.check(full < cur, || format!("full-feature RMSE {full} does not beat current-only {cur}"));
    }
    gate.finish()
}
