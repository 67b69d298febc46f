//! Slip-event matching: ground-truth onsets against detector firings.
//!
//! Onsets closer than `merge_s` form one event (per finger when
//! `per_finger` is set and the onsets carry a finger). A
//! detection belongs to the most recent event that started at or before it
//! and whose last onset lies within `window_s`; anything else is a false
//! positive. Latency is measured from the event's first onset.

use serde::{Deserialize, Serialize};

use crate::trace::GroundTruthRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    pub merge_s: f64,
    pub window_s: f64,
    pub per_finger: bool,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            merge_s: 0.2,
            window_s: 0.25,
            per_finger: false,
        }
    }
}

/// A ground-truth slip onset; `finger` is `None` when unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    pub t: f64,
    pub finger: Option<usize>,
}

/// Rising edges of a per-sample slip flag. A flag already set on the first
/// sample counts as an onset there.
pub fn onsets_from_flags(t: &[f64], slip: &[bool]) -> Vec<Onset> {
    let mut out = Vec::new();
    let mut prev = false;
    for (&ti, &s) in t.iter().zip(slip) {
        if s && !prev {
            out.push(Onset { t: ti, finger: None });
        }
        prev = s;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtEvent {
    pub start: f64,
    pub last_onset: f64,
    pub finger: Option<usize>,
    pub onsets: usize,
}

/// Chain onsets per finger while consecutive gaps stay below `merge_s`.
pub fn merge_onsets(onsets: &[Onset], merge_s: f64) -> Vec<GtEvent> {
    let mut sorted = onsets.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut events: Vec<GtEvent> = Vec::new();
    let mut open: Vec<(Option<usize>, usize)> = Vec::new();
    for o in sorted {
        match open.iter().find(|(f, _)| *f == o.finger).map(|&(_, i)| i) {
            Some(i) if o.t - events[i].last_onset < merge_s => {
                events[i].last_onset = o.t;
                events[i].onsets += 1;
            }
            _ => {
                open.retain(|(f, _)| *f != o.finger);
                open.push((o.finger, events.len()));
                events.push(GtEvent {
                    start: o.t,
                    last_onset: o.t,
                    finger: o.finger,
                    onsets: 1,
                });
            }
        }
    }
    events.sort_by(|a, b| a.start.total_cmp(&b.start));
    events
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEvent {
    pub event: GtEvent,
    /// First detection attributed to the event.
    pub detection: Option<f64>,
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventMatch {
    pub events: Vec<MatchedEvent>,
    /// Detections attributed to some event.
    pub attributed: Vec<f64>,
    pub false_positives: Vec<f64>,
}

impl EventMatch {
    pub fn detected(&self) -> usize {
        self.events.iter().filter(|e| e.detection.is_some()).count()
    }

    /// 1.0 when there are no events.
    pub fn recall(&self) -> f64 {
        if self.events.is_empty() {
            1.0
        } else {
            self.detected() as f64 / self.events.len() as f64
        }
    }

    /// 1.0 when nothing fired.
    pub fn precision(&self) -> f64 {
        let n = self.attributed.len() + self.false_positives.len();
        if n == 0 {
            1.0
        } else {
            self.attributed.len() as f64 / n as f64
        }
    }

    pub fn latencies_ms(&self) -> Vec<f64> {
        self.events.iter().filter_map(|e| e.latency_s.map(|l| l * 1e3)).collect()
    }
}

pub fn match_events(onsets: &[Onset], detections: &[f64], cfg: &EventConfig) -> EventMatch {
    let events = if cfg.per_finger {
        merge_onsets(onsets, cfg.merge_s)
    } else {
        let pooled: Vec<Onset> = onsets.iter().map(|o| Onset { t: o.t, finger: None }).collect();
        merge_onsets(&pooled, cfg.merge_s)
    };
    let mut out = EventMatch {
        events: events
            .iter()
            .map(|&event| MatchedEvent {
                event,
                detection: None,
                latency_s: None,
            })
            .collect(),
        ..EventMatch::default()
    };
    let mut dets = detections.to_vec();
    dets.sort_by(f64::total_cmp);
    for d in dets {
        let owner = events
            .iter()
            .enumerate()
            .rev()
            .find(|(_, e)| e.start <= d && d - e.last_onset <= cfg.window_s)
            .map(|(i, _)| i);
        match owner {
            Some(i) => {
                let m = &mut out.events[i];
                if m.detection.is_none() {
                    m.detection = Some(d);
                    m.latency_s = Some(d - m.event.start);
                }
                out.attributed.push(d);
            }
            None => out.false_positives.push(d),
        }
    }
    out
}

/// Which ground-truth samples count as quiescent.
#[derive(Debug, Clone, PartialEq)]
pub struct QuiescentSpec {
    /// Phases during which the gripper is commanded to move.
    pub moving_phases: Vec<String>,
    /// Time after the last gripper motion before a segment is quiescent.
    pub settle_s: f64,
    /// Time after the last slipping sample before a segment is quiescent.
    pub guard_s: f64,
}

impl Default for QuiescentSpec {
    fn default() -> Self {
        Self {
            moving_phases: ["closing", "press", "preload"].map(String::from).to_vec(),
            settle_s: 1.0,
            guard_s: 0.5,
        }
    }
}

/// Per-row quiescence: the gripper has been still for `settle_s` and nothing
/// has slipped for `guard_s`.
pub fn quiescent_mask(rows: &[GroundTruthRow], spec: &QuiescentSpec) -> Vec<bool> {
    let mut last_move = f64::NEG_INFINITY;
    let mut last_slip = f64::NEG_INFINITY;
    rows.iter()
        .map(|r| {
            if spec.moving_phases.iter().any(|p| p.eq_ignore_ascii_case(&r.phase)) {
                last_move = r.t;
            }
            if r.slip_gt {
                last_slip = r.t;
            }
            r.t - last_move >= spec.settle_s && r.t - last_slip >= spec.guard_s
        })
        .collect()
}

/// Detections that fall on quiescent rows (times matched to the nearest
/// preceding row).
pub fn quiescent_detections(rows: &[GroundTruthRow], mask: &[bool], detections: &[f64]) -> Vec<f64> {
    detections
        .iter()
        .copied()
        .filter(|&d| {
            let i = rows.partition_point(|r| r.t <= d);
            i > 0 && mask[i - 1]
        })
        .collect()
}
