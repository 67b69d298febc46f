use std::path::{Path, PathBuf};

use rayon::prelude::*;

use forte_core::eval::replay::write_events;
use forte_core::eval::{replay_sim_run, QuiescentSpec, ReplayConfig, SimReplay};
use forte_core::sim::{calibration_model, find_object, run_scenario, ScenarioConfig, ScenarioKind, SimRun};
use forte_core::trace::{write_ground_truth, write_trace, CsvSink};
use forte_core::ForceModel;

use super::{finger_label, opt};
use crate::config;
use crate::fail::{Failure, Gate};
use crate::Common;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: Common,
    /// Scenario id (A, B, C, D, E, Q) when the config does not name one.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of runs, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    /// Force model for the closed-loop scenarios.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Replay each run through the detector and write `score.csv`.
    #[arg(long)]
    pub score: bool,
    /// With `--score`: fail (exit 3) if pooled event recall is below this.
    #[arg(long, requires = "score")]
    pub min_recall: Option<f64>,
    /// With `--score`: fail (exit 3) if any event latency exceeds this.
    #[arg(long, requires = "score")]
    pub max_latency_ms: Option<f64>,
    /// With `--score`: fail (exit 3) on any firing in a quiescent segment.
    #[arg(long, requires = "score")]
    pub quiet: bool,
}

struct Setup {
    scenario: ScenarioConfig,
    /// Objects cycled over the runs.
    objects: Vec<String>,
    replay: ReplayConfig,
    quiet: QuiescentSpec,
}

fn setup(kv: &forte_core::kv::KvFile, seed: u64) -> forte_core::Result<Setup> {
    let scenario = ScenarioConfig::from_kv(kv, seed)?;
    let objects = kv.list::<String>("objects")?.unwrap_or_default();
    for o in &objects {
        find_object(o)?;
    }
    let replay = config::replay(kv)?;
    let mut quiet = QuiescentSpec::default();
    kv.set("quiet.settle_s", &mut quiet.settle_s)?;
    kv.set("quiet.guard_s", &mut quiet.guard_s)?;
    Ok(Setup {
        scenario,
        objects,
        replay,
        quiet,
    })
}

pub fn run(a: Args, seed: u64) -> Result<(), Failure> {
    let mut kv = config::load(a.common.config.as_deref())?;
    if let Some(s) = &a.scenario {
        if !kv.insert_default("scenario", s) {
            return Err(Failure::Usage("scenario given both in the config and on the command line".into()));
        }
    }
    let setup = config::apply(&kv, |kv| setup(kv, seed))?;
    if a.runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    let model = match &a.model {
        Some(p) => Some(ForceModel::load(p)?),
        None if matches!(setup.scenario.kind, ScenarioKind::C | ScenarioKind::D) => Some(calibration_model(setup.scenario.seed)?),
        None => None,
    };
    config::create_dir(&a.out)?;

    let base = setup.scenario.seed;
    let results: Vec<(SimRun, Option<SimReplay>)> = (0..a.runs)
        .into_par_iter()
        .map(|k| {
            let mut cfg = setup.scenario.clone();
            cfg.seed = base + k;
            if !setup.objects.is_empty() {
                cfg.object = find_object(&setup.objects[k as usize % setup.objects.len()])?;
            }
            let run = run_scenario(&cfg, model.as_ref())?;
            let scored = a.score.then(|| replay_sim_run(&run, &setup.replay, &setup.quiet)).transpose()?;
            Ok((run, scored))
        })
        .collect::<forte_core::Result<_>>()?;

    for (run, scored) in &results {
        let dir = if a.runs == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("seed_{}", run.seed))
        };
        config::create_dir(&dir)?;
        write_run(&dir, run)?;
        if let Some(s) = scored {
            write_events(&dir.join("events.csv"), &s.output.detections)?;
        }
        println!(
            "scenario {} seed {} object {}: {} samples, {} slip onsets{}",
            run.kind,
            run.seed,
            run.object.name,
            run.trace.len(),
            run.onsets.len(),
            run.outcome.map(|o| format!(", {o}")).unwrap_or_default(),
        );
    }
    if a.score {
        score(&a, &results)
    } else {
        Ok(())
    }
}

fn write_run(dir: &Path, run: &SimRun) -> Result<(), Failure> {
    write_trace(&dir.join("trace.csv"), &run.trace)?;
    write_ground_truth(&dir.join("ground_truth.csv"), &run.ground_truth)?;
    let mut sink = CsvSink::create(&dir.join("onsets.csv"), &["t", "finger"])?;
    for o in &run.onsets {
        sink.line([o.t.to_string(), finger_label(o.finger).to_string()])?;
    }
    sink.finish()?;
    let mut sink = CsvSink::create(&dir.join("run.csv"), &["scenario", "seed", "object", "outcome", "theta_targets"])?;
    let thetas: Vec<String> = run.theta_targets.iter().map(f64::to_string).collect();
    sink.line([
        run.kind.to_string(),
        run.seed.to_string(),
        run.object.name.clone(),
        run.outcome.map(|o| o.to_string()).unwrap_or_default(),
        thetas.join(";"),
    ])?;
    sink.finish()?;
    Ok(())
}

fn score(a: &Args, results: &[(SimRun, Option<SimReplay>)]) -> Result<(), Failure> {
    let mut sink = CsvSink::create(
        &a.out.join("score.csv"),
        &["seed", "object", "gt_events", "detected", "false_positives", "quiescent_firings", "max_latency_ms"],
    )?;
    let (mut events, mut detected, mut fps, mut quiet) = (0, 0, 0, 0);
    let mut worst: Option<f64> = None;
    for (run, s) in results {
        let s = s.as_ref().expect("scored");
        let m = &s.matching;
        let lat = m.latencies_ms().into_iter().reduce(f64::max);
        events += m.events.len();
        detected += m.detected();
        fps += m.false_positives.len();
        quiet += s.quiescent_detections.len();
        if let Some(l) = lat {
            worst = Some(worst.map_or(l, |w| w.max(l)));
        }
        sink.line([
            run.seed.to_string(),
            run.object.name.clone(),
            m.events.len().to_string(),
            m.detected().to_string(),
            m.false_positives.len().to_string(),
            s.quiescent_detections.len().to_string(),
            opt(lat),
        ])?;
    }
    sink.finish()?;
    let recall = if events == 0 { 1.0 } else { detected as f64 / events as f64 };
    println!(
        "events {detected}/{events} detected (recall {recall:.3}), {fps} false positives, \
         {quiet} in quiescent segments, max latency {} ms",
        opt(worst)
    );

    let mut gate = Gate::default();
    if let Some(r) = a.min_recall {
        gate.check(recall >= r, || format!("event recall {recall} < {r}"));
    }
    if let (Some(limit), Some(w)) = (a.max_latency_ms, worst) {
        gate.check(w <= limit, || format!("latency {w} ms > {limit} ms"));
    }
    if a.quiet {
        gate.check(quiet == 0, || format!("{quiet} firings in quiescent segments"));
    }
    gate.finish()
}
