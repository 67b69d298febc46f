use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::PipelineConfig;

/// Symmetric Hann window, `w(n) = 0.5·(1 − cos(2πn/(N−1)))`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Hann window needs N >= 2, got {n}")));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect())
}

/// Single-segment Hann periodogram normalized by `1/(f_s·Σw²)`.
///
/// Output holds bins `0..=N/2` (frequencies `k·f_s/N`), in units of
/// (normalized pressure)²/Hz. No one-sided doubling is applied.
pub struct Periodogram {
    n: usize,
    window: Vec<f64>,
    norm: f64,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Periodogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Periodogram").field("n", &self.n).finish()
    }
}

impl Clone for Periodogram {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            window: self.window.clone(),
            norm: self.norm,
            fft: Arc::clone(&self.fft),
            buf: self.buf.clone(),
            scratch: self.scratch.clone(),
        }
    }
}

impl Periodogram {
    pub fn new(n: usize, sample_rate_hz: f64) -> Result<Self> {
        let window = hann_window(n)?;
        let energy: f64 = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            n,
            norm: 1.0 / (sample_rate_hz * energy),
            window,
            fft,
            buf: vec![Complex64::default(); n],
            scratch,
        })
    }

    pub fn for_config(config: &PipelineConfig) -> Result<Self> {
        Self::new(config.fft_window, config.sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_bins(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// `1 / (f_s · Σ w²)`.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// Compute the PSD of one N-sample window into `out` (length N/2 + 1).
    pub fn compute_into(&mut self, samples: &[f64], out: &mut [f64]) -> Result<()> {
        if samples.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "PSD window must hold exactly {} samples, got {}",
                self.n,
                samples.len()
            )));
        }
        assert_eq!(out.len(), self.num_bins());
        for ((b, &x), &w) in self.buf.iter_mut().zip(samples).zip(&self.window) {
            *b = Complex64::new(x * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.norm_sqr() * self.norm;
        }
        Ok(())
    }

    pub fn compute(&mut self, samples: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_bins()];
        self.compute_into(samples, &mut out)?;
        Ok(out)
    }
}

/// Power integrated over `[0, f_s/2]`, folding the mirrored half of the
/// two-sided spectrum back in. For white noise this approaches the variance.
pub fn integrated_power(psd: &[f64], n: usize, sample_rate_hz: f64) -> f64 {
    let df = sample_rate_hz / n as f64;
    let last = n / 2;
    psd.iter()
        .enumerate()
        .map(|(k, &p)| {
            let fold = if k == 0 || (n % 2 == 0 && k == last) { 1.0 } else { 2.0 };
            fold * p
        })
        .sum::<f64>()
        * df
}

/// Band-max log power, `max_k 10·log10(P(f_k) + ε)` over the configured band.
pub fn psd_feature(psd: &[f64], config: &PipelineConfig) -> f64 {
    band_max_db(psd, config.band_bins(), config.log_eps)
}

pub fn band_max_db(psd: &[f64], bins: std::ops::RangeInclusive<usize>, eps: f64) -> f64 {
    psd[bins]
        .iter()
        .map(|&p| 10.0 * (p.max(0.0) + eps).log10())
        .fold(f64::NEG_INFINITY, f64::max)
}
