//! Threshold sweeps over δ, α, T and V.
//!
//! PSD features do not depend on any of the swept parameters, so each trace
//! is transformed once and only the decision stage is replayed per cell.

use std::path::Path;

use rayon::prelude::*;

use super::events::{match_events, EventConfig, Onset};
use super::metrics::{EvalReport, EventCounts};
use crate::error::{Error, Result};
use crate::pipeline::{BaselineMode, Pipeline, PipelineEvent};
use crate::signal::{PipelineConfig, NUM_CHANNELS};
use crate::slip::decide_timeline;
use crate::trace::{CsvSink, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub delta_db: Vec<f64>,
    pub alpha_db2: Vec<f64>,
    pub threshold_db2: Vec<f64>,
    pub history_len: Vec<usize>,
}

impl SweepGrid {
    /// The single default operating point.
    pub fn single(cfg: &PipelineConfig) -> Self {
        Self {
            delta_db: vec![cfg.delta_db],
            alpha_db2: vec![cfg.alpha_db2],
            threshold_db2: vec![cfg.threshold_db2],
            history_len: vec![cfg.history_len],
        }
    }

    pub fn len(&self) -> usize {
        self.delta_db.len() * self.alpha_db2.len() * self.threshold_db2.len() * self.history_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order (δ slowest, V fastest).
    pub fn cells(&self, base: &PipelineConfig) -> Vec<PipelineConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &d in &self.delta_db {
            for &a in &self.alpha_db2 {
                for &t in &self.threshold_db2 {
                    for &v in &self.history_len {
                        out.push(PipelineConfig {
                            delta_db: d,
                            alpha_db2: a,
                            threshold_db2: t,
                            history_len: v,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// A trace with its ground-truth slip onsets.
#[derive(Debug, Clone)]
pub struct LabeledTrace {
    pub id: String,
    pub trace: Trace,
    pub onsets: Vec<Onset>,
}

/// PSD features of one trace at every detection step.
#[derive(Debug, Clone)]
pub struct FeatureTimeline {
    pub id: String,
    pub steps: Vec<(f64, [f64; NUM_CHANNELS])>,
    pub onsets: Vec<Onset>,
}

pub fn feature_timeline(trace: &LabeledTrace, base: &PipelineConfig, baseline: &BaselineMode) -> Result<FeatureTimeline> {
    let mut pipe = Pipeline::new(base, baseline.clone(), None)?;
    let mut steps = Vec::new();
    let mut sink = |e: PipelineEvent<'_>| {
        if let PipelineEvent::Slip(s) = e {
            steps.push((s.t, s.pmax_db));
        }
    };
    for f in &trace.trace.frames {
        pipe.push_with(f, &mut sink)?;
    }
    pipe.flush(&mut sink)?;
    Ok(FeatureTimeline {
        id: trace.id.clone(),
        steps,
        onsets: trace.onsets.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: PipelineConfig,
    pub report: EvalReport,
}

/// Evaluate one decision configuration on precomputed timelines.
pub fn evaluate_cell(cfg: &PipelineConfig, timelines: &[FeatureTimeline], events: &EventConfig) -> EvalReport {
    let mut report = EvalReport::default();
    for tl in timelines {
        let detections: Vec<f64> = decide_timeline(cfg, &tl.steps)
            .iter()
            .filter(|s| s.rising_edge())
            .map(|s| s.t)
            .collect();
        let m = match_events(&tl.onsets, &detections, events);
        let mut r = EvalReport::from_trials(vec![(!tl.onsets.is_empty(), !detections.is_empty())]);
        r.latencies_ms = m.latencies_ms();
        r.events = EventCounts {
            gt_events: m.events.len(),
            detected: m.detected(),
            false_positives: m.false_positives.len(),
        };
        report.merge(&r);
    }
    report
}

pub fn sweep(
    grid: &SweepGrid,
    base: &PipelineConfig,
    traces: &[LabeledTrace],
    baseline: &BaselineMode,
    events: &EventConfig,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let cells = grid.cells(base);
    for c in &cells {
        c.validate()?;
    }
    let timelines = traces
        .par_iter()
        .map(|t| feature_timeline(t, base, baseline))
        .collect::<Result<Vec<_>>>()?;
    Ok(cells
        .into_par_iter()
        .map(|config| {
            let report = evaluate_cell(&config, &timelines, events);
            SweepRow { config, report }
        })
        .collect())
}

pub const SWEEP_HEADER: [&str; 14] = [
    "delta_db",
    "alpha_db2",
    "threshold_db2",
    "history_len",
    "trials",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "gt_events",
    "detected_events",
    "false_positives",
    "mean_latency_ms",
    "max_latency_ms",
];

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut sink = CsvSink::create(path, &SWEEP_HEADER)?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        sink.line([
            r.config.delta_db.to_string(),
            r.config.alpha_db2.to_string(),
            r.config.threshold_db2.to_string(),
            r.config.history_len.to_string(),
            r.report.trials.len().to_string(),
            r.report.accuracy.to_string(),
            r.report.precision.to_string(),
            r.report.recall.to_string(),
            r.report.f1.to_string(),
            r.report.events.gt_events.to_string(),
            r.report.events.detected.to_string(),
            r.report.events.false_positives.to_string(),
            opt(r.report.mean_latency_ms()),
            opt(r.report.max_latency_ms()),
        ])?;
    }
    sink.finish().map(|_| ())
}
