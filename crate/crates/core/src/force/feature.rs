use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::{ChannelRing, FORCE_MEAN_WINDOWS_S, NUM_CHANNELS};

pub const FEATURE_DIM: usize = 4 * NUM_CHANNELS;

/// Regressor input: current frame followed by its 2.5 s, 5 s and 10 s means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceFeature {
    pub t: f64,
    pub v: [f64; FEATURE_DIM],
}

impl ForceFeature {
    pub fn current(&self) -> &[f64] {
        &self.v[..NUM_CHANNELS]
    }

    pub fn mean_block(&self, k: usize) -> &[f64] {
        let s = NUM_CHANNELS * (k + 1);
        &self.v[s..s + NUM_CHANNELS]
    }

    /// Components consumed by a model trained on `set`.
    pub fn select(&self, set: FeatureSet) -> &[f64] {
        &self.v[..set.dim()]
    }
}

/// Which part of the feature vector a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// `S ⊕ S̄_2.5 ⊕ S̄_5 ⊕ S̄_10`, 24 values.
    Full,
    /// The current frame only, 6 values.
    CurrentOnly,
}

impl FeatureSet {
    pub fn dim(self) -> usize {
        match self {
            FeatureSet::Full => FEATURE_DIM,
            FeatureSet::CurrentOnly => NUM_CHANNELS,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FeatureSet::Full => "S,S2.5,S5,S10",
            FeatureSet::CurrentOnly => "S",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [FeatureSet::Full, FeatureSet::CurrentOnly]
            .into_iter()
            .find(|s| s.tag() == tag)
    }
}

/// Assemble the feature vector from the ring's newest sample.
pub fn build_feature(ring: &ChannelRing) -> Result<ForceFeature> {
    let current = ring.latest().ok_or(crate::error::Error::InsufficientSamples { have: 0, need: 1 })?;
    let mut v = [0.0; FEATURE_DIM];
    v[..NUM_CHANNELS].copy_from_slice(&current);
    for (k, tau) in FORCE_MEAN_WINDOWS_S.into_iter().enumerate() {
        let m = ring.window_mean(tau)?;
        v[NUM_CHANNELS * (k + 1)..NUM_CHANNELS * (k + 2)].copy_from_slice(&m);
    }
    Ok(ForceFeature {
        t: ring.last_time().unwrap_or(0.0),
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{PipelineConfig, SensorFrame};

    fn ring() -> ChannelRing {
        ChannelRing::for_config(&PipelineConfig::default())
    }

    #[test]
    fn constant_stream_repeats_value() {
        let mut r = ring();
        for i in 0..30_000 {
            r.push(&SensorFrame::new(i as f64 / 2000.0, [0.25; 6]));
        }
        let f = build_feature(&r).unwrap();
        assert!(f.v.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn step_one_second_ago_gives_rectangle_means() {
        let mut r = ring();
        let c = 0.5;
        // 12 s of zeros, then exactly 1 s (2000 samples) at c.
        for i in 0..24_000 {
            r.push(&SensorFrame::new(i as f64 / 2000.0, [0.0; 6]));
        }
        for i in 24_000..26_000 {
            r.push(&SensorFrame::new(i as f64 / 2000.0, [c; 6]));
        }
        let f = build_feature(&r).unwrap();
        for ch in 0..6 {
            assert_eq!(f.current()[ch], c);
            assert!((f.mean_block(0)[ch] - 0.4 * c).abs() < 1e-12);
            assert!((f.mean_block(1)[ch] - 0.2 * c).abs() < 1e-12);
            assert!((f.mean_block(2)[ch] - 0.1 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_fills_all_blocks() {
        let mut r = ring();
        let x = [0.1, -0.2, 0.3, -0.4, 0.5, -0.6];
        r.push(&SensorFrame::new(0.0, x));
        let f = build_feature(&r).unwrap();
        for k in 0..4 {
            assert_eq!(&f.v[6 * k..6 * k + 6], &x);
        }
    }

    #[test]
    fn empty_ring_is_an_error() {
        assert!(build_feature(&ring()).is_err());
    }

    #[test]
    fn tags_round_trip() {
        for s in [FeatureSet::Full, FeatureSet::CurrentOnly] {
            assert_eq!(FeatureSet::from_tag(s.tag()), Some(s));
        }
        assert_eq!(FeatureSet::from_tag("nope"), None);
    }
}
