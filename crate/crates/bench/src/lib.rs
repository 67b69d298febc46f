//! Warm fixtures for the pipeline benchmarks.

use forte_core::eval::bench::{synthetic_load, synthetic_model};
use forte_core::signal::MedianFilter;
use forte_core::{ChannelRing, ForceModel, PipelineConfig, Result, SensorFrame, SlipDetector};

/// A ring filled with filtered synthetic load and a detector that has seen it.
pub struct Fixture {
    pub config: PipelineConfig,
    pub frames: Vec<SensorFrame>,
    pub ring: ChannelRing,
    pub detector: SlipDetector,
    pub model: ForceModel,
}

/// `seconds` of load pushed through the median filter into the ring, with
/// the detector stepped at every hop so its histories are populated.
pub fn fixture(seconds: f64, support_vectors: usize, seed: u64) -> Result<Fixture> {
    let config = PipelineConfig::default();
    let frames = synthetic_load(seconds, seed);
    let mut median = MedianFilter::new(config.median_window);
    let mut ring = ChannelRing::for_config(&config);
    let mut detector = SlipDetector::new(&config)?;
    for (i, f) in frames.iter().enumerate() {
        ring.push(&median.push(f));
        if (i + 1) % config.hop() == 0 && ring.len() >= config.fft_window {
            detector.step(&ring)?;
        }
    }
    Ok(Fixture {
        model: synthetic_model(support_vectors, seed ^ 0xB3)?,
        config,
        frames,
        ring,
        detector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_warm() {
        let f = fixture(11.0, 10, 1).unwrap();
        assert_eq!(f.ring.len(), f.ring.capacity().min(f.frames.len()));
        assert!(f.detector.state().t > 10.0);
        assert_eq!(f.model.n_sv(), 10);
    }
}
