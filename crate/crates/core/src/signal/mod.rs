//! Sensor data model, acquisition contract and streaming front-end filters.

mod median;
mod ring;

pub use median::MedianFilter;
pub use ring::{ChannelRing, FORCE_MEAN_WINDOWS_S};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvFile;

/// Number of pressure channels across both fingers.
pub const NUM_CHANNELS: usize = 6;

/// Channels per finger, ordered distal, middle, root.
pub const CHANNELS_PER_FINGER: usize = 3;

/// Default ADC resolution of the transducer front end.
pub const ADC_BITS: u32 = 11;

/// One timestamped sample of all six normalized pressure channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Seconds since the start of the trace.
    pub t: f64,
    /// Normalized pressure in [-1, 1]; 0..3 finger R, 3..6 finger L.
    pub channels: [f64; NUM_CHANNELS],
}

impl SensorFrame {
    pub fn new(t: f64, channels: [f64; NUM_CHANNELS]) -> Self {
        Self { t, channels }
    }

    pub fn is_normalized(&self) -> bool {
        self.channels
            .iter()
            .all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
    }
}

/// The two fingers of the parallel gripper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Finger {
    Right,
    Left,
}

impl Finger {
    pub const ALL: [Finger; 2] = [Finger::Right, Finger::Left];

    pub fn index(self) -> usize {
        match self {
            Finger::Right => 0,
            Finger::Left => 1,
        }
    }

    /// Channel indices belonging to this finger.
    pub fn channels(self) -> std::ops::Range<usize> {
        let start = self.index() * CHANNELS_PER_FINGER;
        start..start + CHANNELS_PER_FINGER
    }

    pub fn of_channel(channel: usize) -> Finger {
        if channel < CHANNELS_PER_FINGER {
            Finger::Right
        } else {
            Finger::Left
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Finger::Right => "R",
            Finger::Left => "L",
        }
    }
}

/// How `Var(H_i)` is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMode {
    /// Divide by V.
    Population,
    /// Divide by V - 1.
    Sample,
}

/// Quantifier of the group variance gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregationMode {
    /// Each finger is gated on its own mean.
    PerGroup,
    /// Both fingers must pass the gate, otherwise both are zeroed.
    AllGroups,
}

/// Per-window trend removal ahead of the periodogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detrend {
    None,
    /// Subtract the window mean.
    Constant,
    /// Subtract the least-squares line.
    Linear,
}

macro_rules! parse_modes {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: ", $($name, " ",)+ ")"),
                        other
                    ))),
                }
            }
        }
    };
}

parse_modes!(VarianceMode { "population" => Population, "sample" => Sample });
parse_modes!(AggregationMode { "per_group" => PerGroup, "all_groups" => AllGroups });
parse_modes!(Detrend { "none" => None, "constant" => Constant, "linear" => Linear });

impl Detrend {
    pub fn apply(self, x: &mut [f64]) {
        let n = x.len();
        if n == 0 || self == Detrend::None {
            return;
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        if self == Detrend::Constant || n < 2 {
            x.iter_mut().for_each(|v| *v -= mean);
            return;
        }
        let c = (n - 1) as f64 / 2.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let d = i as f64 - c;
            sxy += d * v;
            sxx += d * d;
        }
        let slope = sxy / sxx;
        for (i, v) in x.iter_mut().enumerate() {
            *v -= mean + slope * (i as f64 - c);
        }
    }
}

/// Acquisition and slip-detection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sample_rate_hz: f64,
    /// Median filter window M (odd).
    pub median_window: usize,
    /// FFT window N.
    pub fft_window: usize,
    /// Overlap fraction O.
    pub overlap: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// PSD feature history length V.
    pub history_len: usize,
    /// Monotonicity increment δ in dB.
    pub delta_db: f64,
    /// Group variance gate α in dB².
    pub alpha_db2: f64,
    /// Slip threshold T in dB².
    pub threshold_db2: f64,
    /// Log guard ε added to the PSD.
    pub log_eps: f64,
    pub variance: VarianceMode,
    pub aggregation: AggregationMode,
    /// Trend removed from each window before the PSD.
    pub detrend: Detrend,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 2000.0,
            median_window: 11,
            fft_window: 400,
            overlap: 0.99,
            f_min_hz: 10.0,
            f_max_hz: 50.0,
            history_len: 15,
            delta_db: 0.1,
            alpha_db2: 0.6,
            threshold_db2: 2.0,
            log_eps: 1e-12,
            variance: VarianceMode::Population,
            aggregation: AggregationMode::PerGroup,
            detrend: Detrend::Linear,
        }
    }
}

impl PipelineConfig {
    /// Samples between detection steps, `round(N·(1−O))`.
    pub fn hop(&self) -> usize {
        (self.fft_window as f64 * (1.0 - self.overlap)).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.fft_window as f64
    }

    /// Inclusive range of PSD bins whose centers fall within
    /// `[f_min − Δf/2, f_max + Δf/2]`.
    pub fn band_bins(&self) -> std::ops::RangeInclusive<usize> {
        let df = self.bin_width_hz();
        let lo = ((self.f_min_hz - df / 2.0) / df).ceil().max(0.0) as usize;
        let hi = ((self.f_max_hz + df / 2.0) / df).floor() as usize;
        lo..=hi.min(self.fft_window / 2)
    }

    /// First sample index at which the indicator could possibly fire.
    pub fn warmup_samples(&self) -> usize {
        self.fft_window + (self.history_len - 1) * self.hop()
    }

    /// Override fields from `pipeline.*` keys.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        kv.set("pipeline.sample_rate_hz", &mut self.sample_rate_hz)?;
        kv.set("pipeline.median_window", &mut self.median_window)?;
        kv.set("pipeline.fft_window", &mut self.fft_window)?;
        kv.set("pipeline.overlap", &mut self.overlap)?;
        kv.set("pipeline.f_min_hz", &mut self.f_min_hz)?;
        kv.set("pipeline.f_max_hz", &mut self.f_max_hz)?;
        kv.set("pipeline.history_len", &mut self.history_len)?;
        kv.set("pipeline.delta_db", &mut self.delta_db)?;
        kv.set("pipeline.alpha_db2", &mut self.alpha_db2)?;
        kv.set("pipeline.threshold_db2", &mut self.threshold_db2)?;
        kv.set("pipeline.log_eps", &mut self.log_eps)?;
        kv.set("pipeline.variance", &mut self.variance)?;
        kv.set("pipeline.aggregation", &mut self.aggregation)?;
        kv.set("pipeline.detrend", &mut self.detrend)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return bad(format!("median window must be odd, got {}", self.median_window));
        }
        if self.fft_window < 2 {
            return bad(format!("FFT window must be >= 2, got {}", self.fft_window));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad(format!("overlap must lie in [0, 1), got {}", self.overlap));
        }
        if self.hop() < 1 {
            return bad(format!(
                "hop round(N(1-O)) must be >= 1 (N={}, O={})",
                self.fft_window, self.overlap
            ));
        }
        if !(self.f_min_hz < self.f_max_hz && self.f_max_hz <= self.sample_rate_hz / 2.0) {
            return bad(format!(
                "band [{}, {}] Hz must satisfy f_min < f_max <= f_s/2",
                self.f_min_hz, self.f_max_hz
            ));
        }
        if self.history_len < 2 {
            return bad(format!("history length must be >= 2, got {}", self.history_len));
        }
        if !(self.log_eps > 0.0) {
            return bad(format!("log guard must be positive, got {}", self.log_eps));
        }
        if self.delta_db < 0.0 || self.alpha_db2 < 0.0 || self.threshold_db2 < 0.0 {
            return bad("δ, α and T must be non-negative".into());
        }
        if self.band_bins().is_empty() {
            return bad("frequency band maps to no FFT bins".into());
        }
        Ok(())
    }
}

/// Affine map of an ADC count onto [-1, 1] with full-scale span `2^bits`.
///
/// `raw == baseline` maps to 0, `raw == 0` to −1 when the baseline sits at
/// mid-scale.
pub fn normalize_raw(raw: u32, bits: u32, baseline: u32) -> Result<f64> {
    if bits == 0 || bits > 31 {
        return Err(Error::InvalidArgument(format!("ADC bits must be in 1..=31, got {bits}")));
    }
    let full_scale = (1u64 << bits) as f64;
    if raw as u64 >= 1u64 << bits {
        return Err(Error::InvalidArgument(format!(
            "raw count {raw} out of range for {bits}-bit ADC"
        )));
    }
    let v = 2.0 * (raw as f64 - baseline as f64) / full_scale;
    Ok(v.clamp(-1.0, 1.0))
}

/// Inverse of [`normalize_raw`] for values on the ADC grid: nearest count.
pub fn quantize(value: f64, bits: u32, baseline: u32) -> u32 {
    let full_scale = (1u64 << bits) as f64;
    let raw = (value * full_scale / 2.0 + baseline as f64).round();
    raw.clamp(0.0, full_scale - 1.0) as u32
}

/// Per-channel offset removed before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Baseline {
    pub offset: [f64; NUM_CHANNELS],
}

impl Baseline {
    /// Mean of the frames whose timestamp lies within `init_s` of the first one.
    pub fn from_initialization(frames: &[SensorFrame], init_s: f64) -> Self {
        let Some(first) = frames.first() else {
            return Self::default();
        };
        let mut sum = [0.0; NUM_CHANNELS];
        let mut n = 0usize;
        for f in frames.iter().take_while(|f| f.t - first.t < init_s) {
            for (s, v) in sum.iter_mut().zip(f.channels) {
                *s += v;
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        Self {
            offset: sum.map(|s| s / n),
        }
    }

    pub fn apply(&self, frame: &SensorFrame) -> SensorFrame {
        let mut out = *frame;
        for (v, o) in out.channels.iter_mut().zip(self.offset) {
            *v = (*v - o).clamp(-1.0, 1.0);
        }
        out
    }
}

/// Accumulates a baseline over the first samples of a live stream.
#[derive(Debug, Clone, Default)]
pub struct BaselineEstimator {
    sum: [f64; NUM_CHANNELS],
    count: usize,
}

impl BaselineEstimator {
    pub fn push(&mut self, frame: &SensorFrame) {
        for (s, v) in self.sum.iter_mut().zip(frame.channels) {
            *s += v;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Baseline {
        let n = self.count.max(1) as f64;
        Baseline {
            offset: self.sum.map(|s| s / n),
        }
    }
}
