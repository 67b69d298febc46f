use std::path::PathBuf;

use forte_core::eval::metrics::EvalReport;
use forte_core::eval::replay::{replay, write_events, write_force, write_timeline};
use forte_core::eval::EventMatch;
use forte_core::trace::{read_trace, CsvSink};
use forte_core::ForceModel;

use super::{opt, write_metrics};
use crate::config;
use crate::fail::{Failure, Gate};
use crate::Common;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: Common,
    /// Trace CSV: `t,p0..p5[,force_n][,slip_gt]`.
    pub trace: PathBuf,
    /// Force model JSON; adds `force.csv`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Feed frames at their recorded timestamps.
    #[arg(long)]
    pub realtime: bool,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Fail (exit 3) if event recall is below this.
    #[arg(long)]
    pub min_recall: Option<f64>,
    /// Fail (exit 3) if any detected event is later than this.
    #[arg(long)]
    pub max_latency_ms: Option<f64>,
}

pub fn run(a: Args) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let mut cfg = config::apply(&kv, config::replay)?;
    cfg.realtime = a.realtime;
    let trace = read_trace(&a.trace)?;
    let model = a.model.as_deref().map(ForceModel::load).transpose()?;
    let has_model = model.is_some();
    let out = replay(&trace, model, None, &cfg)?;

    config::create_dir(&a.out)?;
    write_events(&a.out.join("events.csv"), &out.detections)?;
    write_timeline(&a.out.join("timeline.csv"), &out.timeline)?;
    if has_model {
        write_force(&a.out.join("force.csv"), &out.force)?;
    }
    println!("{} frames, {} detections", trace.len(), out.detections.len());

    let (Some(report), Some(matching)) = (&out.report, &out.matching) else {
        if a.min_recall.is_some() || a.max_latency_ms.is_some() {
            return Err(Failure::Data(format!("{} has no slip_gt column to score against", a.trace.display())));
        }
        return Ok(());
    };
    write_report(&a, report, matching)?;
    println!(
        "events {}/{} detected, {} false positives, max latency {} ms",
        report.events.detected,
        report.events.gt_events,
        report.events.false_positives,
        opt(report.max_latency_ms()),
    );

    let mut gate = Gate::default();
    if let Some(r) = a.min_recall {
        let got = matching.recall();
        gate.check(got >= r, || format!("event recall {got} < {r}"));
    }
    if let (Some(limit), Some(worst)) = (a.max_latency_ms, report.max_latency_ms()) {
        gate.check(worst <= limit, || format!("latency {worst} ms > {limit} ms"));
    }
    gate.finish()
}

fn write_report(a: &Args, report: &EvalReport, matching: &EventMatch) -> Result<(), Failure> {
    write_metrics(
        &a.out.join("report.csv"),
        &[
            ("accuracy", report.accuracy.to_string()),
            ("precision", report.precision.to_string()),
            ("recall", report.recall.to_string()),
            ("f1", report.f1.to_string()),
            ("gt_events", report.events.gt_events.to_string()),
            ("detected_events", report.events.detected.to_string()),
            ("false_positives", report.events.false_positives.to_string()),
            ("event_recall", matching.recall().to_string()),
            ("mean_latency_ms", opt(report.mean_latency_ms())),
            ("max_latency_ms", opt(report.max_latency_ms())),
        ],
    )?;
    let mut sink = CsvSink::create(
        &a.out.join("matches.csv"),
        &["onset_t", "last_onset_t", "onsets", "detection_t", "latency_ms"],
    )?;
    for m in &matching.events {
        sink.line([
            m.event.start.to_string(),
            m.event.last_onset.to_string(),
            m.event.onsets.to_string(),
            opt(m.detection),
            opt(m.latency_s.map(|l| l * 1e3)),
        ])?;
    }
    sink.finish()?;
    Ok(())
}
