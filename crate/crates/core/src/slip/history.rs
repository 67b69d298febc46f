use std::collections::VecDeque;

use crate::signal::{AggregationMode, Finger, PipelineConfig, VarianceMode, NUM_CHANNELS};

/// Bounded history of PSD features for one sensor, oldest first.
///
/// Tracks how many trailing consecutive increments exceed δ so the
/// monotonicity gate is O(1) per push.
#[derive(Debug, Clone)]
pub struct FeatureHistory {
    cap: usize,
    delta: f64,
    values: VecDeque<f64>,
    rising_run: usize,
}

impl FeatureHistory {
    pub fn new(cap: usize, delta_db: f64) -> Self {
        assert!(cap >= 2);
        Self {
            cap,
            delta: delta_db,
            values: VecDeque::with_capacity(cap),
            rising_run: 0,
        }
    }

    pub fn push(&mut self, value: f64) {
        match self.values.back() {
            Some(&last) if value - last > self.delta => {
                self.rising_run = (self.rising_run + 1).min(self.cap - 1);
            }
            _ => self.rising_run = 0,
        }
        if self.values.len() == self.cap {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.cap
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    /// Every consecutive pair in a full history increases by more than δ.
    pub fn strictly_rising(&self) -> bool {
        self.is_full() && self.rising_run >= self.cap - 1
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.rising_run = 0;
    }
}

pub fn variance(values: impl Iterator<Item = f64> + Clone, mode: VarianceMode) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    match mode {
        VarianceMode::Population => ss / n as f64,
        VarianceMode::Sample => ss / (n - 1) as f64,
    }
}

/// Moving variance of a full, strictly rising history; zero otherwise.
pub fn gated_variance(history: &FeatureHistory, mode: VarianceMode) -> f64 {
    if history.strictly_rising() {
        variance(history.values.iter().copied(), mode)
    } else {
        0.0
    }
}

/// Per-finger mean of the sensor variances with the α gate applied.
pub fn finger_aggregate(sigma2: &[f64; NUM_CHANNELS], alpha: f64, mode: AggregationMode) -> [f64; 2] {
    let means = Finger::ALL.map(|g| {
        let ch = g.channels();
        let n = ch.len() as f64;
        sigma2[ch].iter().sum::<f64>() / n
    });
    match mode {
        AggregationMode::PerGroup => means.map(|m| if m >= alpha { m } else { 0.0 }),
        AggregationMode::AllGroups => {
            if means.iter().all(|&m| m >= alpha) {
                means
            } else {
                [0.0; 2]
            }
        }
    }
}

/// Output of one detection step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlipState {
    /// Time of the newest sample in the analysed window.
    pub t: f64,
    /// Band-max PSD feature per sensor, dB.
    pub pmax_db: [f64; NUM_CHANNELS],
    /// Gated moving variance per sensor, dB².
    pub sigma2: [f64; NUM_CHANNELS],
    /// Gated finger averages `[R, L]`, dB².
    pub sigma_bar: [f64; 2],
    pub eta: bool,
    /// Finger with the larger average variance when `eta` is set.
    pub leading: Option<Finger>,
    /// Time of the most recent 0→1 transition of `eta`.
    pub detected_at: Option<f64>,
    /// Count of 0→1 transitions so far.
    pub events: u64,
    pub steps: u64,
}

impl SlipState {
    /// True if this step produced a rising edge.
    pub fn rising_edge(&self) -> bool {
        self.eta && self.detected_at == Some(self.t)
    }
}

/// History → gated variance → finger aggregation → threshold.
///
/// Pure function of the stream of PSD features it is fed; no spectral work.
#[derive(Debug, Clone)]
pub struct SlipDecision {
    histories: [FeatureHistory; NUM_CHANNELS],
    alpha: f64,
    threshold: f64,
    variance: VarianceMode,
    aggregation: AggregationMode,
    state: SlipState,
}

impl SlipDecision {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            histories: std::array::from_fn(|_| FeatureHistory::new(config.history_len, config.delta_db)),
            alpha: config.alpha_db2,
            threshold: config.threshold_db2,
            variance: config.variance,
            aggregation: config.aggregation,
            state: SlipState::default(),
        }
    }

    pub fn state(&self) -> &SlipState {
        &self.state
    }

    pub fn history(&self, sensor: usize) -> &FeatureHistory {
        &self.histories[sensor]
    }

    pub fn update(&mut self, t: f64, pmax_db: [f64; NUM_CHANNELS]) -> &SlipState {
        let mut sigma2 = [0.0; NUM_CHANNELS];
        for (i, h) in self.histories.iter_mut().enumerate() {
            h.push(pmax_db[i]);
            sigma2[i] = gated_variance(h, self.variance);
        }
        let sigma_bar = finger_aggregate(&sigma2, self.alpha, self.aggregation);
        let peak = sigma_bar[0].max(sigma_bar[1]);
        let eta = peak > self.threshold;
        let was = self.state.eta;
        let s = &mut self.state;
        s.t = t;
        s.pmax_db = pmax_db;
        s.sigma2 = sigma2;
        s.sigma_bar = sigma_bar;
        s.eta = eta;
        s.leading = eta.then(|| {
            if sigma_bar[0] >= sigma_bar[1] {
                Finger::Right
            } else {
                Finger::Left
            }
        });
        if eta && !was {
            s.detected_at = Some(t);
            s.events += 1;
        }
        s.steps += 1;
        &self.state
    }

    pub fn reset(&mut self) {
        for h in &mut self.histories {
            h.clear();
        }
        self.state = SlipState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(values: &[f64], delta: f64) -> FeatureHistory {
        let mut h = FeatureHistory::new(values.len(), delta);
        for &v in values {
            h.push(v);
        }
        h
    }

    #[test]
    fn arithmetic_sequence_variance() {
        let seq: Vec<f64> = (1..=15).map(f64::from).collect();
        let h = filled(&seq, 0.1);
        // (V² − 1) / 12 for V = 15
        let v = gated_variance(&h, VarianceMode::Population);
        assert!((v - 224.0 / 12.0).abs() < 1e-12, "{v}");
        let s = gated_variance(&h, VarianceMode::Sample);
        assert!((s - 20.0).abs() < 1e-12);
    }

    #[test]
    fn small_step_fails_gate() {
        let mut seq: Vec<f64> = (1..=15).map(f64::from).collect();
        for v in seq.iter_mut().skip(8) {
            *v -= 0.95; // step 8 -> 9 becomes 0.05 dB
        }
        let h = filled(&seq, 0.1);
        assert_eq!(gated_variance(&h, VarianceMode::Population), 0.0);
    }

    #[test]
    fn constant_history_fails_gate() {
        let h = filled(&[-80.0; 15], 0.1);
        assert_eq!(gated_variance(&h, VarianceMode::Population), 0.0);
    }

    #[test]
    fn partial_history_is_zero() {
        let mut h = FeatureHistory::new(15, 0.1);
        for i in 0..14 {
            h.push(i as f64 * 3.0);
            assert_eq!(gated_variance(&h, VarianceMode::Population), 0.0);
        }
        h.push(100.0);
        assert!(gated_variance(&h, VarianceMode::Population) > 0.0);
    }

    #[test]
    fn step_of_exactly_delta_fails() {
        let seq: Vec<f64> = (0..15).map(|i| i as f64 * 0.5).collect();
        let h = filled(&seq, 0.5);
        assert_eq!(gated_variance(&h, VarianceMode::Population), 0.0);
    }

    #[test]
    fn aggregate_per_group() {
        let s = [3.0, 3.0, 3.0, 0.0, 0.0, 0.0];
        assert_eq!(finger_aggregate(&s, 0.6, AggregationMode::PerGroup), [3.0, 0.0]);
        let s = [0.5, 0.5, 0.5, 0.0, 0.0, 0.0];
        assert_eq!(finger_aggregate(&s, 0.6, AggregationMode::PerGroup), [0.0, 0.0]);
        let s = [0.7, 0.7, 0.4, 0.0, 0.0, 0.0];
        let g = finger_aggregate(&s, 0.6, AggregationMode::PerGroup);
        assert!((g[0] - 0.6).abs() < 1e-12 && g[1] == 0.0, "{g:?}");
    }

    #[test]
    fn aggregate_all_groups_requires_both() {
        let s = [3.0, 3.0, 3.0, 0.0, 0.0, 0.0];
        assert_eq!(finger_aggregate(&s, 0.6, AggregationMode::AllGroups), [0.0, 0.0]);
        let s = [3.0, 3.0, 3.0, 1.0, 1.0, 1.0];
        assert_eq!(finger_aggregate(&s, 0.6, AggregationMode::AllGroups), [3.0, 1.0]);
    }

    #[test]
    fn decision_fires_on_rising_right_finger() {
        let cfg = PipelineConfig::default();
        let mut d = SlipDecision::new(&cfg);
        for k in 0..14 {
            let v = -90.0 + k as f64;
            let s = d.update(k as f64, [v, v, v, -90.0, -90.0, -90.0]);
            assert!(!s.eta);
        }
        let s = d.update(14.0, [-76.0, -76.0, -76.0, -90.0, -90.0, -90.0]).clone();
        assert!(s.eta);
        assert_eq!(s.leading, Some(Finger::Right));
        assert!(s.rising_edge());
        assert_eq!(s.events, 1);
        // Plateau breaks the gate.
        let s = d.update(15.0, [-76.0; 6]);
        assert!(!s.eta);
        assert_eq!(s.detected_at, Some(14.0));
    }

    proptest! {
        #[test]
        fn appending_non_rising_value_zeroes_variance(
            seq in proptest::collection::vec(-120.0f64..0.0, 15..40),
            drop in -50.0f64..0.1,
        ) {
            let mut h = FeatureHistory::new(15, 0.1);
            for &v in &seq {
                h.push(v);
            }
            let last = *seq.last().unwrap();
            h.push(last + drop);
            prop_assert_eq!(gated_variance(&h, VarianceMode::Population), 0.0);
        }

        #[test]
        fn gated_variance_is_non_negative(seq in proptest::collection::vec(-120.0f64..0.0, 1..40)) {
            let mut h = FeatureHistory::new(15, 0.1);
            for &v in &seq {
                h.push(v);
                prop_assert!(gated_variance(&h, VarianceMode::Population) >= 0.0);
            }
        }

        #[test]
        fn variance_is_shift_invariant(seq in proptest::collection::vec(-100.0f64..0.0, 15), shift in -40.0f64..40.0) {
            let a = variance(seq.iter().copied(), VarianceMode::Population);
            let b = variance(seq.iter().map(|v| v + shift), VarianceMode::Population);
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
