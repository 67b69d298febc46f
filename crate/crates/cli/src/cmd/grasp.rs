use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use forte_core::controller::write_session_log;
use forte_core::sim::{calibration_model, find_object, object_suite, run_episode, EpisodeResult, Outcome, SimObject};
use forte_core::trace::CsvSink;
use forte_core::{ForceModel, Policy};

use crate::config;
use crate::fail::{Failure, Gate};
use crate::Common;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: Common,
    /// Object name; repeat for several. Defaults to the whole suite.
    #[arg(long = "object")]
    pub objects: Vec<String>,
    /// forte, on_off or wo_slip; repeat for several. Defaults to all three.
    #[arg(long = "policy")]
    pub policies: Vec<String>,
    /// Episodes per object and policy, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Force model JSON. Without one a small calibration model is trained.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Also write one session log per episode under `logs/`.
    #[arg(long)]
    pub logs: bool,
    /// Fail (exit 3) if the success rate over all episodes is below this.
    #[arg(long)]
    pub min_success: Option<f64>,
}

pub fn run(a: Args, seed: u64) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let ep_cfg = config::apply(&kv, config::episode)?;
    let objects: Vec<SimObject> = if a.objects.is_empty() {
        object_suite()
    } else {
        a.objects.iter().map(|o| find_object(o)).collect::<forte_core::Result<_>>()?
    };
    let policies: Vec<Policy> = if a.policies.is_empty() {
        Policy::ALL.to_vec()
    } else {
        a.policies.iter().map(|p| p.parse()).collect::<forte_core::Result<_>>()?
    };
    let model = match &a.model {
        Some(p) => ForceModel::load(p)?,
        None => calibration_model(seed)?,
    };

    let jobs: Vec<(&SimObject, Policy, u64)> = objects
        .iter()
        .flat_map(|o| policies.iter().flat_map(move |&p| (0..a.seeds).map(move |k| (o, p, seed + k))))
        .collect();
    let episodes: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(obj, policy, s)| {
            let mut cfg = ep_cfg.clone();
            cfg.controller.policy = policy;
            run_episode(obj, s, &model, &cfg)
        })
        .collect::<forte_core::Result<_>>()?;

    config::create_dir(&a.out)?;
    let mut sink = CsvSink::create(
        &a.out.join("episodes.csv"),
        &["object", "policy", "seed", "outcome", "duration_s", "peak_force_n", "increments", "saturated"],
    )?;
    for e in &episodes {
        sink.line([
            e.object.clone(),
            e.policy.to_string(),
            e.seed.to_string(),
            e.outcome.to_string(),
            e.duration_s.to_string(),
            e.peak_force_n.to_string(),
            e.increments.len().to_string(),
            e.saturated.to_string(),
        ])?;
    }
    sink.finish()?;
    if a.logs {
        let dir = a.out.join("logs");
        config::create_dir(&dir)?;
        for e in &episodes {
            write_session_log(&dir.join(format!("{}_{}_{}.csv", e.object, e.policy, e.seed)), &e.log)?;
        }
    }

    let mut by_policy: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for e in &episodes {
        let c = by_policy.entry(e.policy.name()).or_default();
        match e.outcome {
            Outcome::Success => c[0] += 1,
            Outcome::Dropped => c[1] += 1,
            Outcome::Crushed => c[2] += 1,
        }
    }
    let mut sink = CsvSink::create(
        &a.out.join("policy_summary.csv"),
        &["policy", "episodes", "success", "dropped", "crushed", "success_rate"],
    )?;
    for (p, c) in &by_policy {
        let n: usize = c.iter().sum();
        let rate = c[0] as f64 / n as f64;
        println!("{p:8} {:>4} episodes  success {:.3}  dropped {}  crushed {}", n, rate, c[1], c[2]);
        sink.line([p.to_string(), n.to_string(), c[0].to_string(), c[1].to_string(), c[2].to_string(), rate.to_string()])?;
    }
    sink.finish()?;

    let mut gate = Gate::default();
    if let Some(min) = a.min_success {
        let ok = episodes.iter().filter(|e| e.outcome == Outcome::Success).count();
        let rate = ok as f64 / episodes.len().max(1) as f64;
        gate.check(rate >= min, || format!("success rate {rate} < {min}"));
    }
    gate.finish()
}
