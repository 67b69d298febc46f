use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::signal::{normalize_raw, quantize, SensorFrame, CHANNELS_PER_FINGER, NUM_CHANNELS};

/// Maps finger loads to the six normalized channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorResponseModel {
    /// Normal-force sensitivity per position (distal, middle, root), 1/N.
    pub gains: [f64; CHANNELS_PER_FINGER],
    /// Soft saturation force: response ∝ F / (1 + F/F_sat).
    pub saturation_n: f64,
    /// Fraction of the response lost to creep at steady state.
    pub relax_ratio: f64,
    pub relax_tau_s: f64,
    /// Sensitivity to the finger's tangential load, 1/N.
    pub tangential_gain: [f64; CHANNELS_PER_FINGER],
    /// Vibration amplitude per newton of friction drop at a slip onset.
    pub burst_gain: f64,
    pub burst_freq_hz: (f64, f64),
    pub burst_decay_s: f64,
    pub burst_weights: [f64; CHANNELS_PER_FINGER],
    /// Random-walk drift, per √s, reflected at ±`drift_limit`.
    pub drift_sigma: f64,
    pub drift_limit: f64,
    pub noise_sigma: f64,
    /// Per-channel resting offset drawn from ±this.
    pub offset_spread: f64,
    pub adc_bits: u32,
    pub adc_baseline: u32,
}

impl Default for SensorResponseModel {
    fn default() -> Self {
        Self {
            gains: [0.1, 0.07, 0.045],
            saturation_n: 20.0,
            relax_ratio: 0.08,
            relax_tau_s: 3.0,
            tangential_gain: [0.03, 0.02, 0.01],
            burst_gain: 0.3,
            burst_freq_hz: (20.0, 40.0),
            burst_decay_s: 0.04,
            burst_weights: [1.0, 0.7, 0.5],
            drift_sigma: 0.001,
            drift_limit: 0.02,
            noise_sigma: 0.002,
            offset_spread: 0.03,
            adc_bits: 11,
            adc_baseline: 1024,
        }
    }
}

impl SensorResponseModel {
    /// Stronger creep and drift for stress-testing the force regressor.
    pub fn drift_stress() -> Self {
        Self {
            relax_ratio: 0.25,
            relax_tau_s: 4.0,
            drift_sigma: 0.004,
            drift_limit: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sensor: {m}")));
        if !(self.saturation_n > 0.0) {
            return bad("saturation_n must be positive");
        }
        if !(0.0..1.0).contains(&self.relax_ratio) || !(self.relax_tau_s > 0.0) {
            return bad("need 0 <= relax_ratio < 1 and relax_tau_s > 0");
        }
        if !(self.burst_decay_s > 0.0) || !(0.0 < self.burst_freq_hz.0 && self.burst_freq_hz.0 <= self.burst_freq_hz.1) {
            return bad("bad burst parameters");
        }
        if self.noise_sigma < 0.0 || self.drift_sigma < 0.0 || self.drift_limit < 0.0 || self.offset_spread < 0.0 {
            return bad("noise, drift and offset must be non-negative");
        }
        if self.adc_bits == 0 || self.adc_bits > 31 || self.adc_baseline as u64 >= 1u64 << self.adc_bits {
            return bad("bad ADC description");
        }
        Ok(())
    }

    /// Override fields from `sensor.*` keys.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        if let Some(g) = kv.list::<f64>("sensor.gains")? {
            self.gains = triple("sensor.gains", &g)?;
        }
        kv.set("sensor.saturation_n", &mut self.saturation_n)?;
        kv.set("sensor.relax_ratio", &mut self.relax_ratio)?;
        kv.set("sensor.relax_tau_s", &mut self.relax_tau_s)?;
        if let Some(g) = kv.list::<f64>("sensor.tangential_gain")? {
            self.tangential_gain = triple("sensor.tangential_gain", &g)?;
        }
        kv.set("sensor.burst_gain", &mut self.burst_gain)?;
        kv.set("sensor.burst_decay_s", &mut self.burst_decay_s)?;
        if let Some(f) = kv.list::<f64>("sensor.burst_freq_hz")? {
            let [lo, hi] = f[..] else {
                return Err(Error::Config("sensor.burst_freq_hz needs two values".into()));
            };
            self.burst_freq_hz = (lo, hi);
        }
        kv.set("sensor.drift_sigma", &mut self.drift_sigma)?;
        kv.set("sensor.drift_limit", &mut self.drift_limit)?;
        kv.set("sensor.noise_sigma", &mut self.noise_sigma)?;
        kv.set("sensor.offset_spread", &mut self.offset_spread)?;
        self.validate()
    }

    /// Noise-free steady response of one channel to a held normal force.
    pub fn static_response(&self, position: usize, force_n: f64, shape: f64) -> f64 {
        shape * self.gains[position] * force_n / (1.0 + force_n / self.saturation_n)
    }
}

fn triple(key: &str, v: &[f64]) -> Result<[f64; 3]> {
    v.try_into()
        .map_err(|_| Error::Config(format!("{key} needs three values")))
}

/// Relative channel sensitivities for a contact geometry, distal to root.
pub fn shape_weights(geometry: &str) -> [f64; CHANNELS_PER_FINGER] {
    match geometry {
        "sphere" => [1.25, 0.9, 0.6],
        "cylinder" => [1.0, 1.05, 0.85],
        "edge" => [0.7, 1.3, 1.0],
        "ring" => [1.1, 0.75, 1.05],
        "wedge" => [1.4, 0.8, 0.45],
        "ellipsoid" => [1.15, 0.95, 0.7],
        _ => [1.0, 1.0, 1.0],
    }
}

#[derive(Debug, Clone)]
struct Burst {
    finger: usize,
    t0: f64,
    amp: f64,
    omega: f64,
    phase: f64,
}

/// Stateful sensor: creep, drift, bursts, noise and quantization.
#[derive(Debug, Clone)]
pub struct SensorState {
    model: SensorResponseModel,
    offset: [f64; NUM_CHANNELS],
    relax: [f64; NUM_CHANNELS],
    drift: [f64; NUM_CHANNELS],
    bursts: Vec<Burst>,
}

impl SensorState {
    pub fn new(model: SensorResponseModel, rng: &mut ChaCha8Rng) -> Result<Self> {
        model.validate()?;
        let s = model.offset_spread;
        let offset = std::array::from_fn(|_| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 });
        Ok(Self {
            model,
            offset,
            relax: [0.0; NUM_CHANNELS],
            drift: [0.0; NUM_CHANNELS],
            bursts: Vec::new(),
        })
    }

    pub fn model(&self) -> &SensorResponseModel {
        &self.model
    }

    /// Start a vibration burst on `finger` for a friction drop of `drop_n`.
    pub fn add_burst(&mut self, finger: usize, t0: f64, drop_n: f64, rng: &mut ChaCha8Rng) {
        let (lo, hi) = self.model.burst_freq_hz;
        let f = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        self.bursts.push(Burst {
            finger,
            t0,
            amp: self.model.burst_gain * drop_n.max(0.0),
            omega: 2.0 * std::f64::consts::PI * f,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        });
    }

    /// One output frame at time `t`, `dt` after the previous one.
    pub fn sample(
        &mut self,
        t: f64,
        dt: f64,
        normal_n: [f64; 2],
        tangential_n: [f64; 2],
        shape: &[[f64; CHANNELS_PER_FINGER]; 2],
        rng: &mut ChaCha8Rng,
    ) -> SensorFrame {
        let m = &self.model;
        let keep = 8.0 * m.burst_decay_s;
        self.bursts.retain(|b| t - b.t0 < keep);
        let mut out = [0.0; NUM_CHANNELS];
        for (c, v) in out.iter_mut().enumerate() {
            let g = c / CHANNELS_PER_FINGER;
            let p = c % CHANNELS_PER_FINGER;
            let x = m.static_response(p, normal_n[g], shape[g][p]);
            self.relax[c] += dt / m.relax_tau_s * (m.relax_ratio * x - self.relax[c]);
            let mut y = self.offset[c] + x - self.relax[c] + m.tangential_gain[p] * tangential_n[g];
            for b in self.bursts.iter().filter(|b| b.finger == g) {
                let s = t - b.t0;
                if s >= 0.0 {
                    y += b.amp * m.burst_weights[p] * (-s / m.burst_decay_s).exp() * (b.omega * s + b.phase).sin();
                }
            }
            if m.drift_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                let mut d = self.drift[c] + m.drift_sigma * dt.sqrt() * z;
                if d > m.drift_limit {
                    d = 2.0 * m.drift_limit - d;
                } else if d < -m.drift_limit {
                    d = -2.0 * m.drift_limit - d;
                }
                self.drift[c] = d;
            }
            y += self.drift[c];
            if m.noise_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                y += m.noise_sigma * z;
            }
            let raw = quantize(y, m.adc_bits, m.adc_baseline);
            *v = normalize_raw(raw, m.adc_bits, m.adc_baseline).unwrap_or(0.0);
        }
        SensorFrame::new(t, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn quiet() -> SensorResponseModel {
        SensorResponseModel {
            drift_sigma: 0.0,
            noise_sigma: 0.0,
            offset_spread: 0.0,
            relax_ratio: 0.0,
            ..SensorResponseModel::default()
        }
    }

    #[test]
    fn noiseless_response_is_quantized_static_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = SensorState::new(quiet(), &mut rng).unwrap();
        let shape = [[1.0; 3]; 2];
        let f = s.sample(0.0, 5e-4, [2.0, 0.0], [0.0; 2], &shape, &mut rng);
        // 0.1 * 2 / 1.1 on an 11-bit grid
        let expect = (0.2f64 / 1.1 * 1024.0).round() / 1024.0;
        assert!((f.channels[0] - expect).abs() < 1e-12);
        assert_eq!(f.channels[3], 0.0);
    }

    #[test]
    fn creep_approaches_ratio() {
        let m = SensorResponseModel {
            relax_ratio: 0.2,
            relax_tau_s: 0.5,
            ..quiet()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = SensorState::new(m, &mut rng).unwrap();
        let shape = [[1.0; 3]; 2];
        let mut last = 0.0;
        for i in 0..20_000 {
            last = s.sample(i as f64 * 5e-4, 5e-4, [5.0, 5.0], [0.0; 2], &shape, &mut rng).channels[0];
        }
        let x = 0.5 / 1.25;
        assert!((last - 0.8 * x).abs() < 2e-3, "{last}");
    }

    #[test]
    fn drift_stays_bounded() {
        let m = SensorResponseModel {
            drift_sigma: 0.05,
            drift_limit: 0.01,
            ..quiet()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = SensorState::new(m, &mut rng).unwrap();
        let shape = [[1.0; 3]; 2];
        for i in 0..20_000 {
            let f = s.sample(i as f64 * 5e-4, 5e-4, [0.0; 2], [0.0; 2], &shape, &mut rng);
            assert!(f.channels.iter().all(|v| v.abs() <= 0.0111));
        }
    }

    #[test]
    fn burst_only_touches_its_finger() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = SensorState::new(quiet(), &mut rng).unwrap();
        s.add_burst(1, 0.0, 1.0, &mut rng);
        let shape = [[1.0; 3]; 2];
        let mut peak = [0.0f64; 6];
        for i in 0..400 {
            let f = s.sample(i as f64 * 5e-4, 5e-4, [0.0; 2], [0.0; 2], &shape, &mut rng);
            for c in 0..6 {
                peak[c] = peak[c].max(f.channels[c].abs());
            }
        }
        assert_eq!(&peak[..3], &[0.0; 3]);
        let gain = quiet().burst_gain;
        assert!(peak[3] > 0.5 * gain && peak[3] <= gain + 2e-3, "{peak:?}");
        assert!(peak[5] < peak[4] && peak[4] < peak[3]);
    }

    #[test]
    fn validation() {
        let mut m = SensorResponseModel::default();
        m.validate().unwrap();
        m.relax_ratio = 1.5;
        assert!(m.validate().is_err());
    }
}
