use std::path::PathBuf;

use rayon::prelude::*;

use forte_core::eval::sweep::write_sweep;
use forte_core::eval::{onsets_from_flags, sweep, LabeledTrace, Onset, SweepGrid};
use forte_core::kv::KvFile;
use forte_core::sim::{find_object, run_scenario, ScenarioConfig, ScenarioKind};
use forte_core::trace::read_trace;

use super::opt;
use crate::config;
use crate::fail::Failure;
use crate::Common;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: Common,
    /// Traces with a `slip_gt` column. Without any, scenario runs are simulated.
    pub traces: Vec<PathBuf>,
    /// Scenario to simulate when no traces are given.
    #[arg(long, default_value = "A")]
    pub scenario: String,
    /// Simulated runs, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 20)]
    pub runs: u64,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

struct Setup {
    grid: SweepGrid,
    replay: forte_core::eval::ReplayConfig,
    objects: Vec<String>,
}

fn setup(kv: &KvFile) -> forte_core::Result<Setup> {
    let replay = config::replay(kv)?;
    let mut grid = SweepGrid::single(&replay.pipeline);
    if let Some(v) = kv.list("sweep.delta_db")? {
        grid.delta_db = v;
    }
    if let Some(v) = kv.list("sweep.alpha_db2")? {
        grid.alpha_db2 = v;
    }
    if let Some(v) = kv.list("sweep.threshold_db2")? {
        grid.threshold_db2 = v;
    }
    if let Some(v) = kv.list("sweep.history_len")? {
        grid.history_len = v;
    }
    let objects = kv.list::<String>("objects")?.unwrap_or_default();
    for o in &objects {
        find_object(o)?;
    }
    Ok(Setup { grid, replay, objects })
}

pub fn run(a: Args, seed: u64) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let s = config::apply(&kv, setup)?;
    let traces = if a.traces.is_empty() {
        simulated(&a, &s, seed)?
    } else {
        recorded(&a.traces)?
    };
    let rows = sweep(&s.grid, &s.replay.pipeline, &traces, &s.replay.baseline, &s.replay.events)?;
    config::create_dir(&a.out)?;
    write_sweep(&a.out.join("sweep.csv"), &rows)?;
    println!("{} cells over {} traces", rows.len(), traces.len());
    // Trial-level F1 saturates quickly; break ties on event counts.
    let best = rows.iter().max_by(|x, y| {
        let (a, b) = (&x.report, &y.report);
        a.f1.total_cmp(&b.f1)
            .then(b.events.false_positives.cmp(&a.events.false_positives))
            .then(a.events.detected.cmp(&b.events.detected))
    });
    if let Some(best) = best {
        let c = &best.config;
        println!(
            "best F1 {:.3} at delta {} alpha {} T {} V {} ({}/{} events, {} false positives, max latency {} ms)",
            best.report.f1,
            c.delta_db,
            c.alpha_db2,
            c.threshold_db2,
            c.history_len,
            best.report.events.detected,
            best.report.events.gt_events,
            best.report.events.false_positives,
            opt(best.report.max_latency_ms()),
        );
    }
    Ok(())
}

fn recorded(paths: &[PathBuf]) -> Result<Vec<LabeledTrace>, Failure> {
    paths
        .iter()
        .map(|p| {
            let trace = read_trace(p)?;
            let Some(gt) = &trace.slip_gt else {
                return Err(Failure::Data(format!("{} has no slip_gt column", p.display())));
            };
            let t: Vec<f64> = trace.frames.iter().map(|f| f.t).collect();
            let onsets = onsets_from_flags(&t, gt);
            Ok(LabeledTrace {
                id: p.display().to_string(),
                trace,
                onsets,
            })
        })
        .collect()
}

fn simulated(a: &Args, s: &Setup, seed: u64) -> Result<Vec<LabeledTrace>, Failure> {
    let kind: ScenarioKind = a.scenario.parse().map_err(Failure::usage)?;
    if matches!(kind, ScenarioKind::C | ScenarioKind::D) {
        return Err(Failure::Usage("sweep simulates open-loop scenarios only (A, B, E, Q)".into()));
    }
    let traces = (0..a.runs)
        .into_par_iter()
        .map(|k| {
            let mut cfg = ScenarioConfig::new(kind, seed + k);
            if !s.objects.is_empty() {
                cfg.object = find_object(&s.objects[k as usize % s.objects.len()])?;
            }
            let run = run_scenario(&cfg, None)?;
            Ok(LabeledTrace {
                id: format!("{kind}{}", seed + k),
                onsets: run.onsets.iter().map(|o| Onset { t: o.t, finger: Some(o.finger) }).collect(),
                trace: run.trace,
            })
        })
        .collect::<forte_core::Result<_>>()?;
    Ok(traces)
}
