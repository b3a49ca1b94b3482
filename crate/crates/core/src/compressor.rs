//! Hard-knee feed-forward RMS compressor used to synthesize controlled
//! DR-compressed versions of signals, plus the threshold x ratio sweep.

use rayon::prelude::*;
use serde::Serialize;

use crate::audio_io::Signal;
use crate::error::{Error, Result};
use crate::smoother::BandwidthGrid;
use crate::subsampler::{mesdr, subsample_distribution, DrReport, SubsampleConfig};

/// Envelope floor in dB: silence is treated as this level so the dB-domain
/// smoother never sees -inf. Far below any audible threshold.
const ENVELOPE_FLOOR_DB: f64 = -200.0;

/// Compressor parameters.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct CompressorConfig {
    /// Gain reduction applies above this envelope level (dBFS, <= 0).
    pub threshold_db: f64,
    /// Input:output dB slope above threshold (>= 1).
    pub ratio: f64,
    /// RMS envelope window, milliseconds.
    pub env_window_ms: f64,
    /// Attack time constant, milliseconds.
    pub attack_ms: f64,
    /// Release time constant, milliseconds.
    pub release_ms: f64,
    /// Output gain applied after compression, dB.
    pub makeup_db: f64,
}

impl Default for CompressorConfig {
    fn default() -> Self {
        CompressorConfig {
            threshold_db: -12.0,
            ratio: 2.0,
            env_window_ms: 10.0,
            attack_ms: 5.0,
            release_ms: 100.0,
            makeup_db: 0.0,
        }
    }
}

impl CompressorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_db <= 0.0 && self.threshold_db.is_finite()) {
            return Err(Error::argument(format!(
                "threshold must be a finite dBFS level <= 0, got {}",
                self.threshold_db
            )));
        }
        if !(self.ratio >= 1.0 && self.ratio.is_finite()) {
            return Err(Error::argument(format!("ratio must be >= 1, got {}", self.ratio)));
        }
        if !(self.env_window_ms > 0.0) {
            return Err(Error::argument("envelope window must be positive"));
        }
        if !(self.attack_ms >= 0.0 && self.release_ms >= 0.0) {
            return Err(Error::argument("attack/release must be non-negative"));
        }
        if !self.makeup_db.is_finite() {
            return Err(Error::argument("makeup gain must be finite"));
        }
        Ok(())
    }
}

/// Compressed signal plus processing metadata.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub signal: Signal,
    /// Samples that hit the [-1, 1] clamp on output.
    pub clipped_samples: usize,
}

fn one_pole_coeff(time_ms: f64, sample_rate: u32) -> f64 {
    if time_ms <= 0.0 {
        return 0.0;
    }
    (-1000.0 / (time_ms * sample_rate as f64)).exp()
}

/// Static hard-knee gain law in dB for an envelope at `level_db`.
fn gain_db(level_db: f64, threshold_db: f64, ratio: f64) -> f64 {
    if level_db <= threshold_db {
        0.0
    } else {
        (threshold_db + (level_db - threshold_db) / ratio) - level_db
    }
}

/// Apply the compressor. Sequential per signal: the envelope recursion
/// carries state sample to sample.
pub fn compress(signal: &Signal, cfg: &CompressorConfig) -> Result<Compressed> {
    cfg.validate()?;
    let n = signal.len();
    let win = ((cfg.env_window_ms / 1000.0 * signal.sample_rate as f64).round() as usize).max(1);
    let a_att = one_pole_coeff(cfg.attack_ms, signal.sample_rate);
    let a_rel = one_pole_coeff(cfg.release_ms, signal.sample_rate);
    let makeup = 10f64.powf(cfg.makeup_db / 20.0);

    let mut out = Vec::with_capacity(n);
    let mut clipped = 0usize;
    let mut sum_sq = 0.0f64;
    let mut level_db = ENVELOPE_FLOOR_DB;
    for t in 0..n {
        // trailing RMS window [t-win+1, t], shorter at the head
        let x = signal.samples[t];
        sum_sq += x * x;
        if t >= win {
            let old = signal.samples[t - win];
            sum_sq -= old * old;
            if sum_sq < 0.0 {
                sum_sq = 0.0;
            }
        }
        let count = (t + 1).min(win);
        let rms = (sum_sq / count as f64).sqrt();
        let raw_db = if rms > 0.0 {
            (20.0 * rms.log10()).max(ENVELOPE_FLOOR_DB)
        } else {
            ENVELOPE_FLOOR_DB
        };
        // one-pole smoothing in the dB domain, separate attack/release
        let coeff = if raw_db > level_db { a_att } else { a_rel };
        level_db = coeff * level_db + (1.0 - coeff) * raw_db;

        let g = 10f64.powf(gain_db(level_db, cfg.threshold_db, cfg.ratio) / 20.0);
        let mut y = x * g * makeup;
        if y > 1.0 {
            y = 1.0;
            clipped += 1;
        } else if y < -1.0 {
            y = -1.0;
            clipped += 1;
        }
        out.push(y);
    }
    let signal = Signal::new(out, signal.sample_rate, format!("{} (compressed)", signal.source))?;
    Ok(Compressed { signal, clipped_samples: clipped })
}

/// One sweep cell. `threshold_db`/`ratio` are None on the row for the
/// uncompressed original.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub threshold_db: Option<f64>,
    pub ratio: Option<f64>,
    pub mesdr: f64,
    pub ci90_lo: Option<f64>,
    pub ci90_hi: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
    pub clipped_samples: usize,
}

/// Full sweep output: original row first, then cells in
/// threshold-major, ratio-minor order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub compressor: CompressorConfig,
    pub subsample: SubsampleConfig,
}

fn row_from_report(
    threshold_db: Option<f64>,
    ratio: Option<f64>,
    report: &DrReport,
    clipped: usize,
) -> SweepRow {
    SweepRow {
        threshold_db,
        ratio,
        mesdr: report.mesdr,
        ci90_lo: report.ci90.map(|c| c.0),
        ci90_hi: report.ci90.map(|c| c.1),
        ci95_lo: report.ci95.map(|c| c.0),
        ci95_hi: report.ci95.map(|c| c.1),
        clipped_samples: clipped,
    }
}

fn analyze_for_sweep(
    signal: &Signal,
    sub: &SubsampleConfig,
    grid: &BandwidthGrid,
) -> Result<DrReport> {
    let sample = subsample_distribution(signal, sub, grid)?;
    mesdr(&sample, signal.peak())
}

/// Run compress + full MeSDR analysis over every (threshold, ratio) cell
/// plus the uncompressed original. Every cell shares the same subsampling
/// seed so rows differ only through the compression itself.
pub fn compression_sweep(
    signal: &Signal,
    thresholds: &[f64],
    ratios: &[f64],
    base: &CompressorConfig,
    sub: &SubsampleConfig,
    grid: &BandwidthGrid,
) -> Result<SweepTable> {
    if thresholds.is_empty() || ratios.is_empty() {
        return Err(Error::argument("sweep needs at least one threshold and one ratio"));
    }
    for (&t, &r) in thresholds.iter().flat_map(|t| ratios.iter().map(move |r| (t, r))) {
        CompressorConfig { threshold_db: t, ratio: r, ..*base }.validate()?;
    }
    let original = analyze_for_sweep(signal, sub, grid)?;
    let mut rows = vec![row_from_report(None, None, &original, 0)];
    let cells: Vec<(f64, f64)> = thresholds
        .iter()
        .flat_map(|&t| ratios.iter().map(move |&r| (t, r)))
        .collect();
    let cell_rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(t, r)| {
            let cfg = CompressorConfig { threshold_db: t, ratio: r, ..*base };
            let compressed = compress(signal, &cfg)?;
            let report = analyze_for_sweep(&compressed.signal, sub, grid)?;
            Ok(row_from_report(Some(t), Some(r), &report, compressed.clipped_samples))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.extend(cell_rows);
    Ok(SweepTable { rows, compressor: *base, subsample: *sub })
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("threshold_db,ratio,mesdr,ci90_lo,ci90_hi,ci95_lo,ci95_hi\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(r.threshold_db),
                csv_field(r.ratio),
                r.mesdr,
                csv_field(r.ci90_lo),
                csv_field(r.ci90_hi),
                csv_field(r.ci95_lo),
                csv_field(r.ci95_hi),
            ));
        }
        out
    }
}
