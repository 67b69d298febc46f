//! Streaming front end: baseline → median filter → ring → slip / force.

use crate::error::Result;
use crate::force::{build_feature, ForceFeature, ForceModel};
use crate::signal::{Baseline, BaselineEstimator, ChannelRing, MedianFilter, PipelineConfig, SensorFrame};
use crate::slip::{SlipDetector, SlipState};

/// Force estimation runs every this many samples (100 Hz at 2 kHz).
pub const FORCE_DECIMATION: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineMode {
    /// Input is already baseline-corrected.
    None,
    Fixed(Baseline),
    /// Mean of the first `seconds` of the stream. Those frames are held back
    /// and replayed once the baseline is known, so the output matches
    /// offline processing exactly.
    Initialization { seconds: f64 },
}

#[derive(Debug)]
pub enum PipelineEvent<'a> {
    Slip(&'a SlipState),
    Force { feature: &'a ForceFeature, newtons: f64 },
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    mode: BaselineMode,
    baseline: Option<Baseline>,
    init: BaselineEstimator,
    held: Vec<SensorFrame>,
    init_start: Option<f64>,
    median: MedianFilter,
    ring: ChannelRing,
    slip: SlipDetector,
    model: Option<ForceModel>,
    slip_enabled: bool,
    processed: u64,
    force: Option<(f64, f64)>,
    last_feature: Option<ForceFeature>,
}

impl Pipeline {
    pub fn new(config: &PipelineConfig, mode: BaselineMode, model: Option<ForceModel>) -> Result<Self> {
        config.validate()?;
        let baseline = match &mode {
            BaselineMode::None => Some(Baseline::default()),
            BaselineMode::Fixed(b) => Some(*b),
            BaselineMode::Initialization { .. } => None,
        };
        Ok(Self {
            config: config.clone(),
            mode,
            baseline,
            init: BaselineEstimator::default(),
            held: Vec::new(),
            init_start: None,
            median: MedianFilter::new(config.median_window),
            ring: ChannelRing::for_config(config),
            slip: SlipDetector::new(config)?,
            model,
            slip_enabled: true,
            processed: 0,
            force: None,
            last_feature: None,
        })
    }

    /// Skip slip detection, e.g. when only force features are needed.
    pub fn without_slip(mut self) -> Self {
        self.slip_enabled = false;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn ring(&self) -> &ChannelRing {
        &self.ring
    }

    pub fn baseline(&self) -> Option<&Baseline> {
        self.baseline.as_ref()
    }

    pub fn slip_state(&self) -> &SlipState {
        self.slip.state()
    }

    /// Latest force estimate `(t, newtons)`.
    pub fn force(&self) -> Option<(f64, f64)> {
        self.force
    }

    pub fn last_feature(&self) -> Option<&ForceFeature> {
        self.last_feature.as_ref()
    }

    pub fn model(&self) -> Option<&ForceModel> {
        self.model.as_ref()
    }

    /// Frames processed into the ring so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn push(&mut self, frame: &SensorFrame) -> Result<()> {
        self.push_with(frame, |_| {})
    }

    pub fn push_with(&mut self, frame: &SensorFrame, mut sink: impl FnMut(PipelineEvent<'_>)) -> Result<()> {
        if self.baseline.is_none() {
            let BaselineMode::Initialization { seconds } = self.mode else {
                unreachable!()
            };
            let start = *self.init_start.get_or_insert(frame.t);
            if frame.t - start < seconds {
                self.init.push(frame);
                self.held.push(*frame);
                return Ok(());
            }
            self.baseline = Some(self.init.finish());
            for f in std::mem::take(&mut self.held) {
                self.process(&f, &mut sink)?;
            }
        }
        self.process(frame, &mut sink)
    }

    /// Finish the initialization early (e.g. a stream shorter than the window).
    pub fn flush(&mut self, mut sink: impl FnMut(PipelineEvent<'_>)) -> Result<()> {
        if self.baseline.is_none() && !self.held.is_empty() {
            self.baseline = Some(self.init.finish());
            for f in std::mem::take(&mut self.held) {
                self.process(&f, &mut sink)?;
            }
        }
        Ok(())
    }

    fn process(&mut self, frame: &SensorFrame, sink: &mut impl FnMut(PipelineEvent<'_>)) -> Result<()> {
        let corrected = self.baseline.as_ref().map(|b| b.apply(frame)).unwrap_or(*frame);
        let filtered = self.median.push(&corrected);
        self.ring.push(&filtered);
        self.processed += 1;
        let n = self.processed as usize;
        if self.slip_enabled && n % self.config.hop() == 0 && self.ring.len() >= self.config.fft_window {
            let state = self.slip.step(&self.ring)?;
            sink(PipelineEvent::Slip(state));
        }
        if n % FORCE_DECIMATION == 0 {
            if let Some(model) = &self.model {
                let feature = build_feature(&self.ring)?;
                let f = model.predict_feature(&feature);
                self.force = Some((feature.t, f));
                self.last_feature = Some(feature);
                sink(PipelineEvent::Force {
                    feature: self.last_feature.as_ref().unwrap(),
                    newtons: f,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::FeatureSet;

    fn frames(n: usize, offset: f64) -> Vec<SensorFrame> {
        (0..n)
            .map(|i| {
                let t = i as f64 / 2000.0;
                let v = offset + 0.003 * (2.0 * std::f64::consts::PI * 17.0 * t).sin() + 0.001 * ((i * 7919) % 13) as f64 / 13.0;
                SensorFrame::new(t, [v; 6])
            })
            .collect()
    }

    fn collect(p: &mut Pipeline, fs: &[SensorFrame]) -> Vec<SlipState> {
        let mut out = Vec::new();
        for f in fs {
            p.push_with(f, |e| {
                if let PipelineEvent::Slip(s) = e {
                    out.push(s.clone());
                }
            })
            .unwrap();
        }
        out
    }

    #[test]
    fn initialization_matches_offline_baseline() {
        let cfg = PipelineConfig::default();
        let fs = frames(6000, 0.2);
        let mut live = Pipeline::new(&cfg, BaselineMode::Initialization { seconds: 1.0 }, None).unwrap();
        let a = collect(&mut live, &fs);
        let base = Baseline::from_initialization(&fs, 1.0);
        let mut offline = Pipeline::new(&cfg, BaselineMode::Fixed(base), None).unwrap();
        let b = collect(&mut offline, &fs);
        assert_eq!(a, b);
        assert_eq!(a.len(), (6000 - 400) / 4 + 1);
        assert_eq!(live.baseline(), Some(&base));
    }

    #[test]
    fn force_updates_at_100_hz() {
        let cfg = PipelineConfig::default();
        let model = ForceModel::constant(FeatureSet::Full, 1.5);
        let mut p = Pipeline::new(&cfg, BaselineMode::None, Some(model)).unwrap();
        let mut n = 0;
        for f in frames(2000, 0.0) {
            p.push_with(&f, |e| {
                if let PipelineEvent::Force { newtons, .. } = e {
                    assert_eq!(newtons, 1.5);
                    n += 1;
                }
            })
            .unwrap();
        }
        assert_eq!(n, 100);
        assert_eq!(p.force().unwrap().1, 1.5);
    }

    #[test]
    fn short_stream_can_be_flushed() {
        let cfg = PipelineConfig::default();
        let mut p = Pipeline::new(&cfg, BaselineMode::Initialization { seconds: 1.0 }, None).unwrap();
        for f in frames(500, 0.1) {
            p.push(&f).unwrap();
        }
        assert_eq!(p.processed(), 0);
        p.flush(|_| {}).unwrap();
        assert_eq!(p.processed(), 500);
    }
}
