//! Spectral slip detection.
//!
//! Every hop (`round(N·(1−O))` samples, 2 ms at the defaults) each sensor's
//! last N filtered samples are Hann-windowed and transformed; the maximum
//! log power inside the 10–50 Hz band is appended to a V-long history. A
//! sensor contributes its history variance only while that history rises by
//! more than δ at every step, fingers average their sensors behind an α
//! gate, and the indicator fires when either finger exceeds T.

mod history;
mod psd;

pub use history::{
    finger_aggregate, gated_variance, variance, FeatureHistory, SlipDecision, SlipState,
};
pub use psd::{band_max_db, hann_window, integrated_power, psd_feature, Periodogram};

use crate::error::{Error, Result};
use crate::signal::{ChannelRing, PipelineConfig, NUM_CHANNELS};

/// Streaming slip detector over a [`ChannelRing`].
#[derive(Debug, Clone)]
pub struct SlipDetector {
    config: PipelineConfig,
    periodogram: Periodogram,
    decision: SlipDecision,
    window: Vec<f64>,
    psd: Vec<f64>,
}

impl SlipDetector {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let periodogram = Periodogram::for_config(config)?;
        let bins = periodogram.num_bins();
        Ok(Self {
            config: config.clone(),
            periodogram,
            decision: SlipDecision::new(config),
            window: vec![0.0; config.fft_window],
            psd: vec![0.0; bins],
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn state(&self) -> &SlipState {
        self.decision.state()
    }

    /// PSD features of the newest N samples of every channel.
    pub fn features(&mut self, ring: &ChannelRing) -> Result<[f64; NUM_CHANNELS]> {
        let n = self.config.fft_window;
        if ring.len() < n {
            return Err(Error::InsufficientSamples {
                have: ring.len(),
                need: n,
            });
        }
        let mut out = [0.0; NUM_CHANNELS];
        for (ch, o) in out.iter_mut().enumerate() {
            ring.copy_last(ch, &mut self.window)?;
            self.config.detrend.apply(&mut self.window);
            self.periodogram.compute_into(&self.window, &mut self.psd)?;
            *o = psd_feature(&self.psd, &self.config);
        }
        Ok(out)
    }

    /// One detection step at the ring's newest sample.
    pub fn step(&mut self, ring: &ChannelRing) -> Result<&SlipState> {
        let pmax = self.features(ring)?;
        let t = ring.last_time().unwrap_or(0.0);
        Ok(self.decision.update(t, pmax))
    }

    pub fn reset(&mut self) {
        self.decision.reset();
    }
}

/// Replay a precomputed feature timeline through the decision stage with
/// an alternative configuration (used by sweeps; no spectral work).
pub fn decide_timeline<'a>(
    config: &PipelineConfig,
    timeline: impl IntoIterator<Item = &'a (f64, [f64; NUM_CHANNELS])>,
) -> Vec<SlipState> {
    let mut d = SlipDecision::new(config);
    timeline
        .into_iter()
        .map(|(t, p)| d.update(*t, *p).clone())
        .collect()
}
