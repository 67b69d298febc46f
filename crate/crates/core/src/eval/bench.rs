//! Throughput and per-step latency measurement on a synthetic load.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{build_feature, FeatureSet, ForceModel, FEATURE_DIM};
use crate::pipeline::FORCE_DECIMATION;
use crate::signal::{ChannelRing, MedianFilter, PipelineConfig, SensorFrame};
use crate::slip::SlipDetector;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub duration_s: f64,
    pub n_support_vectors: usize,
    pub seed: u64,
    pub realtime: bool,
    pub slip_budget_ms: f64,
    pub predict_budget_ms: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            n_support_vectors: 5000,
            seed: 0,
            realtime: false,
            slip_budget_ms: 2.0,
            predict_budget_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub slip_steps: usize,
    pub predictions: usize,
    pub wall_s: f64,
    pub ingest_hz: f64,
    pub slip_p50_ms: f64,
    pub slip_p99_ms: f64,
    pub predict_p50_ms: f64,
    pub predict_p99_ms: f64,
    pub slip_budget_ms: f64,
    pub predict_budget_ms: f64,
}

impl BenchReport {
    pub fn within_budget(&self) -> bool {
        self.slip_p99_ms <= self.slip_budget_ms && self.predict_p99_ms <= self.predict_budget_ms
    }
}

/// Nearest-rank percentile of an unsorted sample, `q` in [0, 1].
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Model with `n` random support vectors over the full feature vector.
pub fn synthetic_model(n: usize, seed: u64) -> Result<ForceModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sv: Vec<f64> = (0..n * FEATURE_DIM).map(|_| rng.gen_range(-0.1..0.5)).collect();
    let coef: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ForceModel::new(FeatureSet::Full, 2.0, 10.0, 0.01, 0.5, sv, coef)
}

/// Noise plus intermittent vibration bursts, 2 kHz.
pub fn synthetic_load(duration_s: f64, seed: u64) -> Vec<SensorFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.002).unwrap();
    let n = (duration_s * 2000.0) as usize;
    let mut burst_t0 = f64::NEG_INFINITY;
    (0..n)
        .map(|i| {
            let t = i as f64 / 2000.0;
            if i % 2000 == 0 && rng.gen_bool(0.5) {
                burst_t0 = t + rng.gen_range(0.0..0.5);
            }
            let dt = t - burst_t0;
            let burst = if dt >= 0.0 {
                0.03 * (-dt / 0.04).exp() * (2.0 * std::f64::consts::PI * 30.0 * dt).sin()
            } else {
                0.0
            };
            SensorFrame::new(t, std::array::from_fn(|c| 0.2 + 0.01 * c as f64 + burst + noise.sample(&mut rng)))
        })
        .collect()
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if !(cfg.duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!("bench duration must be positive, got {}", cfg.duration_s)));
    }
    let pcfg = PipelineConfig::default();
    let frames = synthetic_load(cfg.duration_s, cfg.seed);
    let model = synthetic_model(cfg.n_support_vectors, cfg.seed ^ 0xB3)?;
    let mut median = MedianFilter::new(pcfg.median_window);
    let mut ring = ChannelRing::for_config(&pcfg);
    let mut det = SlipDetector::new(&pcfg)?;
    let hop = pcfg.hop();
    let mut slip_ms = Vec::with_capacity(frames.len() / hop);
    let mut predict_ms = Vec::with_capacity(frames.len() / FORCE_DECIMATION);
    let mut sink = 0.0;
    let start = Instant::now();
    for (i, f) in frames.iter().enumerate() {
        if cfg.realtime {
            let due = Duration::from_secs_f64(f.t);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        ring.push(&median.push(f));
        let n = i + 1;
        if n % hop == 0 && ring.len() >= pcfg.fft_window {
            let t0 = Instant::now();
            let s = det.step(&ring)?;
            sink += s.sigma_bar[0];
            slip_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        if n % FORCE_DECIMATION == 0 {
            let t0 = Instant::now();
            let feat = build_feature(&ring)?;
            sink += model.predict_feature(&feat);
            predict_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }
    let wall = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    Ok(BenchReport {
        frames: frames.len(),
        slip_steps: slip_ms.len(),
        predictions: predict_ms.len(),
        wall_s: wall,
        ingest_hz: frames.len() as f64 / wall.max(1e-12),
        slip_p50_ms: percentile(&slip_ms, 0.5),
        slip_p99_ms: percentile(&slip_ms, 0.99),
        predict_p50_ms: percentile(&predict_ms, 0.5),
        predict_p99_ms: percentile(&predict_ms, 0.99),
        slip_budget_ms: cfg.slip_budget_ms,
        predict_budget_ms: cfg.predict_budget_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 0.5), 50.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[3.0], 0.0), 3.0);
        assert_eq!(percentile(&[], 0.5), 0.0);
    }

    #[test]
    fn short_bench_counts_steps() {
        let r = run_bench(&BenchConfig {
            duration_s: 2.0,
            n_support_vectors: 50,
            ..BenchConfig::default()
        })
        .unwrap();
        assert_eq!(r.frames, 4000);
        // First step once 400 samples are in, then every 4.
        assert_eq!(r.slip_steps, (4000 - 400) / 4 + 1);
        assert_eq!(r.predictions, 200);
        assert!(r.ingest_hz > 2000.0);
    }

    #[test]
    fn synthetic_model_has_requested_size() {
        let m = synthetic_model(17, 1).unwrap();
        assert_eq!(m.n_sv(), 17);
        assert_eq!(m.dim(), FEATURE_DIM);
    }
}
