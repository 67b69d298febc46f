//! Offline replay of a recorded trace through the streaming pipeline.

use std::path::Path;
use std::time::{Duration, Instant};

use super::events::{
    match_events, onsets_from_flags, quiescent_detections, quiescent_mask, EventConfig, EventMatch, Onset, QuiescentSpec,
};
use super::metrics::{EvalReport, EventCounts};
use crate::error::Result;
use crate::force::ForceModel;
use crate::pipeline::{BaselineMode, Pipeline, PipelineEvent};
use crate::signal::{Finger, PipelineConfig, NUM_CHANNELS};
use crate::sim::SimRun;
use crate::trace::{CsvSink, Trace};

pub const EVENTS_HEADER: [&str; 4] = ["t_detect", "finger", "sigma_bar_db2", "eta"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    pub pipeline: PipelineConfig,
    pub baseline: BaselineMode,
    pub events: EventConfig,
    /// Pace frames at their timestamps instead of running flat out.
    pub realtime: bool,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            baseline: BaselineMode::Initialization { seconds: 1.0 },
            events: EventConfig::default(),
            realtime: false,
        }
    }
}

/// A 0→1 transition of the slip indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub t: f64,
    pub finger: Finger,
    pub sigma_bar_db2: f64,
}

/// One detection step, for plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineRow {
    pub t: f64,
    pub sigma_bar: [f64; 2],
    pub pmax_db: [f64; NUM_CHANNELS],
    pub eta: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOutput {
    pub detections: Vec<Detection>,
    pub timeline: Vec<TimelineRow>,
    /// `(t, newtons)` at the force cadence, when a model was supplied.
    pub force: Vec<(f64, f64)>,
    /// Present when the trace carries slip ground truth.
    pub report: Option<EvalReport>,
    pub matching: Option<EventMatch>,
}

impl ReplayOutput {
    pub fn detection_times(&self) -> Vec<f64> {
        self.detections.iter().map(|d| d.t).collect()
    }

    pub fn eta_count(&self) -> usize {
        self.detections.len()
    }
}

/// Run `trace` through baseline, filter, slip detector and optional force
/// model. `onsets` overrides the onsets derived from the trace's `slip_gt`.
pub fn replay(
    trace: &Trace,
    model: Option<ForceModel>,
    onsets: Option<&[Onset]>,
    cfg: &ReplayConfig,
) -> Result<ReplayOutput> {
    let mut pipe = Pipeline::new(&cfg.pipeline, cfg.baseline.clone(), model)?;
    let mut out = ReplayOutput::default();
    let start = Instant::now();
    let t0 = trace.frames.first().map(|f| f.t).unwrap_or(0.0);
    let mut last_force_t = f64::NEG_INFINITY;
    for frame in &trace.frames {
        if cfg.realtime {
            let due = Duration::from_secs_f64((frame.t - t0).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        pipe.push_with(frame, |e| collect(&mut out, e, &mut last_force_t))?;
    }
    pipe.flush(|e| collect(&mut out, e, &mut last_force_t))?;

    let derived;
    let onsets = match (onsets, &trace.slip_gt) {
        (Some(o), _) => Some(o),
        (None, Some(gt)) => {
            let t: Vec<f64> = trace.frames.iter().map(|f| f.t).collect();
            derived = onsets_from_flags(&t, gt);
            Some(&derived[..])
        }
        (None, None) => None,
    };
    if let Some(onsets) = onsets {
        let m = match_events(onsets, &out.detection_times(), &cfg.events);
        let gt_any = !onsets.is_empty();
        let mut report = EvalReport::from_trials(vec![(gt_any, !out.detections.is_empty())]);
        report.latencies_ms = m.latencies_ms();
        report.events = EventCounts {
            gt_events: m.events.len(),
            detected: m.detected(),
            false_positives: m.false_positives.len(),
        };
        out.report = Some(report);
        out.matching = Some(m);
    }
    Ok(out)
}

/// Replay of a simulated run scored against its own ground truth.
#[derive(Debug, Clone)]
pub struct SimReplay {
    pub output: ReplayOutput,
    pub matching: EventMatch,
    /// Detections that fell inside quiescent segments.
    pub quiescent_detections: Vec<f64>,
}

impl SimReplay {
    /// Precision restricted to quiescent segments: any firing there is false.
    pub fn quiescent_precision(&self) -> f64 {
        if self.quiescent_detections.is_empty() {
            1.0
        } else {
            0.0
        }
    }
}

/// Replay a simulator run using its per-finger onsets.
pub fn replay_sim_run(run: &SimRun, cfg: &ReplayConfig, quiet: &QuiescentSpec) -> Result<SimReplay> {
    let onsets: Vec<Onset> = run
        .onsets
        .iter()
        .map(|o| Onset {
            t: o.t,
            finger: Some(o.finger),
        })
        .collect();
    let output = replay(&run.trace, None, Some(&onsets), cfg)?;
    let matching = output.matching.clone().unwrap_or_default();
    let mask = quiescent_mask(&run.ground_truth, quiet);
    let quiescent_detections = quiescent_detections(&run.ground_truth, &mask, &output.detection_times());
    Ok(SimReplay {
        output,
        matching,
        quiescent_detections,
    })
}

fn collect(out: &mut ReplayOutput, e: PipelineEvent<'_>, last_force_t: &mut f64) {
    match e {
        PipelineEvent::Slip(s) => {
            out.timeline.push(TimelineRow {
                t: s.t,
                sigma_bar: s.sigma_bar,
                pmax_db: s.pmax_db,
                eta: s.eta,
            });
            if s.rising_edge() {
                let finger = s.leading.unwrap_or(Finger::Right);
                out.detections.push(Detection {
                    t: s.t,
                    finger,
                    sigma_bar_db2: s.sigma_bar[finger.index()],
                });
            }
        }
        PipelineEvent::Force { feature, newtons } => {
            if feature.t > *last_force_t {
                *last_force_t = feature.t;
                out.force.push((feature.t, newtons));
            }
        }
    }
}

pub fn write_events(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut sink = CsvSink::create(path, &EVENTS_HEADER)?;
    for d in detections {
        sink.line([d.t.to_string(), d.finger.label().to_string(), d.sigma_bar_db2.to_string(), "1".to_string()])?;
    }
    sink.finish().map(|_| ())
}

pub fn write_timeline(path: &Path, rows: &[TimelineRow]) -> Result<()> {
    let header = [
        "t", "sigma_bar_R", "sigma_bar_L", "pmax_0", "pmax_1", "pmax_2", "pmax_3", "pmax_4", "pmax_5", "eta",
    ];
    let mut sink = CsvSink::create(path, &header)?;
    for r in rows {
        let mut fields = Vec::with_capacity(header.len());
        fields.push(r.t.to_string());
        fields.extend(r.sigma_bar.iter().map(f64::to_string));
        fields.extend(r.pmax_db.iter().map(f64::to_string));
        fields.push(if r.eta { "1" } else { "0" }.to_string());
        sink.line(fields)?;
    }
    sink.finish().map(|_| ())
}

pub fn write_force(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut sink = CsvSink::create(path, &["t", "force_n"])?;
    for (t, f) in rows {
        sink.line([t.to_string(), f.to_string()])?;
    }
    sink.finish().map(|_| ())
}
