//! Descriptive power metrics: RMS, dBFS, sequential DR and the Welch
//! periodogram diagnostic.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::audio_io::{peak, Signal};
use crate::error::{Error, Result};
use crate::math;

/// Block layout for the sequential DR statistic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DrsConfig {
    /// Samples per block.
    pub window_len: usize,
    /// Overlapping samples between consecutive blocks.
    pub overlap: usize,
}

impl DrsConfig {
    pub fn validate(&self, signal_len: usize) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::argument("window_len must be positive"));
        }
        if self.overlap >= self.window_len {
            return Err(Error::argument(format!(
                "overlap {} must be smaller than window_len {}",
                self.overlap, self.window_len
            )));
        }
        if self.window_len > signal_len {
            return Err(Error::argument(format!(
                "window_len {} exceeds signal length {}",
                self.window_len, signal_len
            )));
        }
        Ok(())
    }
}

/// Averaged one-sided power spectral density in dBFS.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power_dbfs: Vec<f64>,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power_dbfs) {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

/// RMS power: sqrt of the mean squared amplitude.
pub fn rms_power(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::argument("rms_power of empty sequence"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::argument("rms_power of non-finite values"));
    }
    Ok((math::pairwise_sum_by(samples, |x| x * x) / samples.len() as f64).sqrt())
}

/// Power in dB relative to the reference `p0`. Zero power maps to -inf.
pub fn dbfs(p: f64, p0: f64) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::argument(format!("power must be non-negative, got {p}")));
    }
    if p0 <= 0.0 {
        return Err(Error::argument(format!("reference power must be positive, got {p0}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (p / p0).log10())
}

/// Sequential DR: -20 log10 of the mean block RMS over the peak sample.
///
/// Blocks advance by `window_len - overlap`; a trailing partial block is
/// discarded.
pub fn sequential_dr(signal: &Signal, cfg: &DrsConfig) -> Result<f64> {
    cfg.validate(signal.len())?;
    let x_peak = peak(signal);
    if x_peak == 0.0 {
        return Err(Error::argument("sequential_dr of an all-zero signal"));
    }
    let step = cfg.window_len - cfg.overlap;
    let mut block_rms = Vec::new();
    let mut start = 0usize;
    while start + cfg.window_len <= signal.len() {
        block_rms.push(rms_power(&signal.samples[start..start + cfg.window_len])?);
        start += step;
    }
    let mean_rms = math::mean(&block_rms);
    Ok(-20.0 * (mean_rms / x_peak).log10())
}

/// Number of full DRs blocks for a given signal length and config.
pub fn drs_block_count(signal_len: usize, cfg: &DrsConfig) -> usize {
    if cfg.window_len > signal_len {
        return 0;
    }
    (signal_len - cfg.window_len) / (cfg.window_len - cfg.overlap) + 1
}

/// Hann-windowed, overlapped, averaged periodogram (one-sided PSD in dBFS).
pub fn periodogram(
    samples: &[f64],
    sample_rate: u32,
    segment_len: usize,
    overlap: usize,
) -> Result<Spectrum> {
    if segment_len == 0 || !segment_len.is_power_of_two() {
        return Err(Error::argument(format!(
            "segment_len must be a power of two, got {segment_len}"
        )));
    }
    if segment_len > samples.len() {
        return Err(Error::argument(format!(
            "segment_len {} exceeds data length {}",
            segment_len,
            samples.len()
        )));
    }
    if overlap >= segment_len {
        return Err(Error::argument("overlap must be smaller than segment_len"));
    }
    let n = segment_len;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let window_power = math::pairwise_sum_by(&window, |w| w * w) / n as f64;
    let fs = sample_rate as f64;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let step = n - overlap;
    let n_bins = n / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut start = 0usize;
    while start + n <= samples.len() {
        for i in 0..n {
            buf[i] = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate() {
            let mag2 = buf[k].norm_sqr();
            // one-sided PSD with window power compensation
            let mut psd = mag2 / (fs * n as f64 * window_power);
            if k != 0 && k != n / 2 {
                psd *= 2.0;
            }
            *slot += psd;
        }
        segments += 1;
        start += step;
    }
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    let power_dbfs: Vec<f64> = acc
        .iter()
        .map(|&p| {
            let avg = p / segments as f64;
            if avg == 0.0 {
                f64::NEG_INFINITY
            } else {
                10.0 * avg.log10()
            }
        })
        .collect();
    Ok(Spectrum { freqs, power_dbfs })
}
