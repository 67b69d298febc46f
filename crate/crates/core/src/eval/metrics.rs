//! Trial-level classification metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Counts of (ground truth, prediction) pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for p in pairs {
            c.add(p.0, p.1);
        }
        c
    }

    pub fn add(&mut self, gt: bool, pred: bool) {
        match (gt, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// 1.0 when nothing is predicted positive (abstention).
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    /// 1.0 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio_or_one(self.tp + self.tn, self.total())
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Event-level counts from onset matching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub gt_events: usize,
    pub detected: usize,
    pub false_positives: usize,
}

impl EventCounts {
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.detected, self.gt_events)
    }
}

/// Metrics over a set of trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Per-trial `(ground truth slip, predicted slip)`.
    pub trials: Vec<(bool, bool)>,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Detection latency of every matched ground-truth event, ms.
    pub latencies_ms: Vec<f64>,
    pub events: EventCounts,
    /// Episode outcome name → count.
    pub outcomes: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn from_trials(trials: Vec<(bool, bool)>) -> Self {
        let mut r = Self {
            trials,
            ..Self::default()
        };
        r.refresh();
        r
    }

    pub fn push_trial(&mut self, gt: bool, pred: bool) {
        self.trials.push((gt, pred));
        self.refresh();
    }

    pub fn add_outcome(&mut self, name: &str) {
        *self.outcomes.entry(name.to_string()).or_default() += 1;
    }

    /// Fold another report into this one.
    pub fn merge(&mut self, other: &EvalReport) {
        self.trials.extend_from_slice(&other.trials);
        self.latencies_ms.extend_from_slice(&other.latencies_ms);
        self.events.gt_events += other.events.gt_events;
        self.events.detected += other.events.detected;
        self.events.false_positives += other.events.false_positives;
        for (k, v) in &other.outcomes {
            *self.outcomes.entry(k.clone()).or_default() += v;
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        self.confusion = Confusion::from_pairs(self.trials.iter().copied());
        self.accuracy = self.confusion.accuracy();
        self.precision = self.confusion.precision();
        self.recall = self.confusion.recall();
        self.f1 = self.confusion.f1();
    }

    pub fn max_latency_ms(&self) -> Option<f64> {
        self.latencies_ms.iter().copied().reduce(f64::max)
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        (!self.latencies_ms.is_empty()).then(|| self.latencies_ms.iter().sum::<f64>() / self.latencies_ms.len() as f64)
    }

    /// Success fraction over recorded outcomes.
    pub fn success_rate(&self) -> f64 {
        let total: usize = self.outcomes.values().sum();
        if total == 0 {
            return 0.0;
        }
        self.outcomes.get("SUCCESS").copied().unwrap_or(0) as f64 / total as f64
    }
}
