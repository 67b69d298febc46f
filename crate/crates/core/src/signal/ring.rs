use super::{PipelineConfig, SensorFrame, NUM_CHANNELS};
use crate::error::{Error, Result};

/// Exact re-summation period for the running window sums.
const RESUM_PERIOD: u64 = 1 << 20;

/// Mean windows tracked with O(1) running sums, in seconds.
pub const FORCE_MEAN_WINDOWS_S: [f64; 3] = [2.5, 5.0, 10.0];

#[derive(Debug, Clone)]
struct TrackedSum {
    len: usize,
    sum: [f64; NUM_CHANNELS],
}

/// Fixed-capacity history of filtered samples, one circular buffer per channel.
///
/// Single writer: `push` takes `&mut self`, readers copy windows out.
#[derive(Debug, Clone)]
pub struct ChannelRing {
    capacity: usize,
    sample_rate_hz: f64,
    data: [Vec<f64>; NUM_CHANNELS],
    /// Next write slot.
    head: usize,
    pushed: u64,
    last_t: Option<f64>,
    tracked: Vec<TrackedSum>,
}

impl ChannelRing {
    pub fn new(capacity: usize, sample_rate_hz: f64, tracked_windows: &[usize]) -> Self {
        assert!(capacity > 0);
        let tracked = tracked_windows
            .iter()
            .map(|&len| {
                assert!(len > 0 && len <= capacity, "tracked window {len} exceeds capacity {capacity}");
                TrackedSum {
                    len,
                    sum: [0.0; NUM_CHANNELS],
                }
            })
            .collect();
        Self {
            capacity,
            sample_rate_hz,
            data: std::array::from_fn(|_| vec![0.0; capacity]),
            head: 0,
            pushed: 0,
            last_t: None,
            tracked,
        }
    }

    /// Ring sized for both the FFT window and the 10 s force-mean window.
    pub fn for_config(config: &PipelineConfig) -> Self {
        let fs = config.sample_rate_hz;
        let tracked: Vec<usize> = FORCE_MEAN_WINDOWS_S
            .iter()
            .map(|s| (s * fs).round() as usize)
            .collect();
        let capacity = tracked
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(config.fft_window);
        Self::new(capacity, fs, &tracked)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of samples currently held.
    pub fn len(&self) -> usize {
        (self.pushed.min(self.capacity as u64)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn last_time(&self) -> Option<f64> {
        self.last_t
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    fn slot_back(&self, back: usize) -> usize {
        // back = 1 is the newest sample
        (self.head + self.capacity - back) % self.capacity
    }

    pub fn push(&mut self, frame: &SensorFrame) {
        let len_before = self.len();
        for ts in &mut self.tracked {
            for ch in 0..NUM_CHANNELS {
                ts.sum[ch] += frame.channels[ch];
            }
            if len_before >= ts.len {
                let old = (self.head + self.capacity - ts.len) % self.capacity;
                for ch in 0..NUM_CHANNELS {
                    ts.sum[ch] -= self.data[ch][old];
                }
            }
        }
        for ch in 0..NUM_CHANNELS {
            self.data[ch][self.head] = frame.channels[ch];
        }
        self.head = (self.head + 1) % self.capacity;
        self.pushed += 1;
        self.last_t = Some(frame.t);
        if self.pushed % RESUM_PERIOD == 0 {
            self.resum();
        }
    }

    /// Recompute every tracked running sum exactly from the stored samples.
    pub fn resum(&mut self) {
        let len = self.len();
        let mut tracked = std::mem::take(&mut self.tracked);
        for ts in &mut tracked {
            let n = ts.len.min(len);
            for ch in 0..NUM_CHANNELS {
                ts.sum[ch] = (1..=n).map(|b| self.data[ch][self.slot_back(b)]).sum();
            }
        }
        self.tracked = tracked;
    }

    /// Newest sample across all channels.
    pub fn latest(&self) -> Option<[f64; NUM_CHANNELS]> {
        if self.is_empty() {
            return None;
        }
        let s = self.slot_back(1);
        Some(std::array::from_fn(|ch| self.data[ch][s]))
    }

    /// Copy the last `out.len()` samples of `channel`, oldest first.
    pub fn copy_last(&self, channel: usize, out: &mut [f64]) -> Result<()> {
        let k = out.len();
        if k > self.len() {
            return Err(Error::InsufficientSamples {
                have: self.len(),
                need: k,
            });
        }
        let start = (self.head + self.capacity - k) % self.capacity;
        let buf = &self.data[channel];
        let first = (self.capacity - start).min(k);
        out[..first].copy_from_slice(&buf[start..start + first]);
        out[first..].copy_from_slice(&buf[..k - first]);
        Ok(())
    }

    /// The last `k` samples of `channel` in chronological order.
    pub fn last(&self, channel: usize, k: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; k];
        self.copy_last(channel, &mut v)?;
        Ok(v)
    }

    /// Per-channel mean of the last `tau_s` seconds; shrinks to the
    /// available samples during warm-up.
    pub fn window_mean(&self, tau_s: f64) -> Result<[f64; NUM_CHANNELS]> {
        if !(tau_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mean window must be positive, got {tau_s}"
            )));
        }
        if self.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let k = ((tau_s * self.sample_rate_hz).round() as usize).max(1);
        let n = k.min(self.len());
        if let Some(ts) = self.tracked.iter().find(|ts| ts.len == k) {
            return Ok(ts.sum.map(|s| s / n as f64));
        }
        Ok(std::array::from_fn(|ch| {
            (1..=n).map(|b| self.data[ch][self.slot_back(b)]).sum::<f64>() / n as f64
        }))
    }

    /// Per-channel (max − min) over the last `k` samples.
    pub fn range_last(&self, k: usize) -> Result<[f64; NUM_CHANNELS]> {
        if k > self.len() || k == 0 {
            return Err(Error::InsufficientSamples {
                have: self.len(),
                need: k.max(1),
            });
        }
        Ok(std::array::from_fn(|ch| {
            let (lo, hi) = (1..=k).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
                let v = self.data[ch][self.slot_back(b)];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        }))
    }

    /// Per-channel |newest − value k−1 samples earlier|.
    pub fn endpoint_change_last(&self, k: usize) -> Result<[f64; NUM_CHANNELS]> {
        if k > self.len() || k == 0 {
            return Err(Error::InsufficientSamples {
                have: self.len(),
                need: k.max(1),
            });
        }
        let newest = self.slot_back(1);
        let oldest = self.slot_back(k);
        Ok(std::array::from_fn(|ch| {
            (self.data[ch][newest] - self.data[ch][oldest]).abs()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(i: usize, v: f64) -> SensorFrame {
        SensorFrame::new(i as f64 / 2000.0, [v; NUM_CHANNELS])
    }

    #[test]
    fn default_capacity_serves_fft_and_ten_seconds() {
        let ring = ChannelRing::for_config(&PipelineConfig::default());
        assert!(ring.capacity() >= 20_000);
        assert!(ring.capacity() >= 400);
    }

    #[test]
    fn last_k_is_chronological_across_wrap() {
        let mut ring = ChannelRing::new(8, 2000.0, &[]);
        for i in 0..13 {
            ring.push(&frame(i, i as f64));
        }
        assert_eq!(ring.last(0, 5).unwrap(), vec![8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(ring.last(4, 8).unwrap(), (5..13).map(|v| v as f64).collect::<Vec<_>>());
        assert!(ring.last(0, 9).is_err());
    }

    #[test]
    fn mean_of_constant_stream() {
        let mut ring = ChannelRing::for_config(&PipelineConfig::default());
        for i in 0..12_000 {
            ring.push(&frame(i, -0.4));
        }
        for tau in [2.5, 5.0, 10.0, 0.7] {
            for m in ring.window_mean(tau).unwrap() {
                assert!((m + 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_of_linear_ramp() {
        // Ramp 0 -> 1 over exactly tau seconds: mean of i/(k-1), i = 0..k, is 0.5.
        let mut ring = ChannelRing::for_config(&PipelineConfig::default());
        let k = 5000;
        for i in 0..k {
            ring.push(&frame(i, i as f64 / (k - 1) as f64));
        }
        for m in ring.window_mean(2.5).unwrap() {
            assert!((m - 0.5).abs() < 1.0 / k as f64);
        }
    }

    #[test]
    fn mean_of_nyquist_alternation_is_zero() {
        let mut ring = ChannelRing::for_config(&PipelineConfig::default());
        for i in 0..12_000 {
            ring.push(&frame(i, if i % 2 == 0 { 0.3 } else { -0.3 }));
        }
        for m in ring.window_mean(5.0).unwrap() {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn mean_shrinks_to_available_samples() {
        let mut ring = ChannelRing::for_config(&PipelineConfig::default());
        ring.push(&frame(0, 0.2));
        assert_eq!(ring.window_mean(10.0).unwrap(), [0.2; 6]);
        ring.push(&frame(1, 0.4));
        for m in ring.window_mean(10.0).unwrap() {
            assert!((m - 0.3).abs() < 1e-15);
        }
        assert!(ring.window_mean(0.0).is_err());
        assert!(ring.window_mean(-1.0).is_err());
    }

    #[test]
    fn range_and_endpoint_change() {
        let mut ring = ChannelRing::new(16, 2000.0, &[]);
        for (i, v) in [0.0, 0.5, -0.2, 0.1].into_iter().enumerate() {
            ring.push(&frame(i, v));
        }
        let r = ring.range_last(4).unwrap();
        assert!((r[0] - 0.7).abs() < 1e-12);
        let e = ring.endpoint_change_last(4).unwrap();
        assert!((e[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn running_sums_match_batch_after_a_million_pushes() {
        let mut ring = ChannelRing::for_config(&PipelineConfig::default());
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut last: Vec<f64> = Vec::new();
        for i in 0..1_000_003usize {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let v = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            ring.push(&frame(i, v));
            if i >= 1_000_003 - 20_000 {
                last.push(v);
            }
        }
        for (tau, k) in [(2.5, 5000usize), (5.0, 10_000), (10.0, 20_000)] {
            let batch: f64 = last[last.len() - k..].iter().sum::<f64>() / k as f64;
            let streamed = ring.window_mean(tau).unwrap();
            assert!((streamed[0] - batch).abs() < 1e-9, "tau={tau}");
        }
    }

    proptest! {
        #[test]
        fn streaming_mean_equals_batch(values in proptest::collection::vec(-1.0f64..1.0, 1..600), k in 1usize..64) {
            let mut ring = ChannelRing::new(64, 10.0, &[k]);
            for (i, &v) in values.iter().enumerate() {
                ring.push(&SensorFrame::new(i as f64, [v; 6]));
            }
            let n = k.min(values.len());
            let batch: f64 = values[values.len() - n..].iter().sum::<f64>() / n as f64;
            let tau = k as f64 / 10.0;
            let got = ring.window_mean(tau).unwrap();
            prop_assert!((got[3] - batch).abs() < 1e-9);
        }
    }
}
