//! End-to-end orchestration: load/trim -> subsample -> MeSDR report,
//! plus the two-signal comparison built on the Mann-Whitney test.

use serde::Serialize;
use std::time::Instant;

use crate::audio_io::{trim_silence, Signal};
use crate::error::Result;
use crate::smoother::{BandwidthGrid, DEFAULT_C1, DEFAULT_C2, DEFAULT_GRID_POINTS};
use crate::subsampler::{
    mann_whitney, mesdr, subsample_distribution, Alternative, BlockVarianceSample, DrReport,
    SubsampleConfig,
};

/// Default trim threshold in dBFS for leading/trailing silence.
pub const DEFAULT_TRIM_DB: f64 = -60.0;

/// Full analysis configuration: subsampling plus bandwidth-grid constants
/// and the optional silence trim.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct AnalysisConfig {
    pub subsample: SubsampleConfig,
    /// Grid lower constant: h_min = c1 * b^(-1/5).
    pub c1: f64,
    /// Grid upper constant: h_max = c2 * b^(-1/5).
    pub c2: f64,
    pub grid_points: usize,
    /// Trim leading/trailing frames below this dBFS level; None disables.
    pub trim_db: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            subsample: SubsampleConfig::default(),
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            grid_points: DEFAULT_GRID_POINTS,
            trim_db: Some(DEFAULT_TRIM_DB),
        }
    }
}

impl AnalysisConfig {
    /// Per-block bandwidth grid, scaled with m = b.
    pub fn grid(&self) -> Result<BandwidthGrid> {
        BandwidthGrid::new(self.c1, self.c2, self.grid_points, self.subsample.b)
    }
}

/// Analysis output: the DR report plus run provenance.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub source: String,
    pub sample_rate: u32,
    /// Sample count after trimming (the analyzed length).
    pub samples: usize,
    pub samples_trimmed: usize,
    pub peak: f64,
    pub report: DrReport,
    pub analysis: AnalysisConfig,
    /// Wall-clock time; excluded from serialized artifacts so identical
    /// config + seed reproduce them byte for byte.
    #[serde(skip)]
    pub wall_ms: u128,
}

/// Run the full pipeline on an in-memory signal: optional trim,
/// random-block subsampling, MeSDR with confidence bands.
pub fn analyze(signal: &Signal, cfg: &AnalysisConfig) -> Result<AnalyzeReport> {
    let (sample, report) = analyze_with_sample(signal, cfg)?;
    let _ = sample;
    Ok(report)
}

/// Like [`analyze`] but also returns the raw block-variance sample,
/// for callers that need the dr distribution itself (compare, exports).
pub fn analyze_with_sample(
    signal: &Signal,
    cfg: &AnalysisConfig,
) -> Result<(BlockVarianceSample, AnalyzeReport)> {
    let start = Instant::now();
    let trimmed_owned;
    let analyzed: &Signal = match cfg.trim_db {
        Some(db) => {
            trimmed_owned = trim_silence(signal, db)?;
            &trimmed_owned
        }
        None => signal,
    };
    let grid = cfg.grid()?;
    let sample = subsample_distribution(analyzed, &cfg.subsample, &grid)?;
    let report = mesdr(&sample, analyzed.peak())?;
    let out = AnalyzeReport {
        source: signal.source.clone(),
        sample_rate: signal.sample_rate,
        samples: analyzed.len(),
        samples_trimmed: signal.len() - analyzed.len(),
        peak: analyzed.peak(),
        report,
        analysis: *cfg,
        wall_ms: start.elapsed().as_millis(),
    };
    Ok((sample, out))
}

/// Outcome of a two-signal comparison at a significance level.
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub enum Verdict {
    FirstMoreDynamic,
    SecondMoreDynamic,
    NoShift,
}

impl Verdict {
    pub fn describe(&self) -> &'static str {
        match self {
            Verdict::FirstMoreDynamic => "first more dynamic",
            Verdict::SecondMoreDynamic => "second more dynamic",
            Verdict::NoShift => "no shift",
        }
    }
}

/// Comparison report: both analyses, the rank-test p-values on the dr
/// distributions, and a plain-language verdict at `alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub first: AnalyzeReport,
    pub second: AnalyzeReport,
    pub p_two_sided: f64,
    pub p_first_greater: f64,
    pub p_first_less: f64,
    pub alpha: f64,
    pub verdict: Verdict,
    pub verdict_text: String,
}

/// Compare the dr distributions of two signals with the Mann-Whitney
/// test. Pass distinct seeds in the two configs for independent draws,
/// or the same seed to mirror the shared-seed design.
pub fn compare(
    a: &Signal,
    b: &Signal,
    cfg_a: &AnalysisConfig,
    cfg_b: &AnalysisConfig,
    alpha: f64,
) -> Result<CompareReport> {
    let (sample_a, first) = analyze_with_sample(a, cfg_a)?;
    let (sample_b, second) = analyze_with_sample(b, cfg_b)?;
    // compare on the headroom-corrected DR scale (the MeSDR scale):
    // the peak term is what makes levels comparable across signals
    let finite = |s: &BlockVarianceSample, headroom: f64| -> Vec<f64> {
        s.dr_values
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v + headroom)
            .collect()
    };
    let dr_a = finite(&sample_a, first.report.headroom_correction);
    let dr_b = finite(&sample_b, second.report.headroom_correction);
    let p_two_sided = mann_whitney(&dr_a, &dr_b, Alternative::TwoSided)?;
    let p_first_greater = mann_whitney(&dr_a, &dr_b, Alternative::AGreater)?;
    let p_first_less = mann_whitney(&dr_a, &dr_b, Alternative::ALess)?;
    let verdict = if p_two_sided >= alpha {
        Verdict::NoShift
    } else if p_first_greater <= p_first_less {
        Verdict::FirstMoreDynamic
    } else {
        Verdict::SecondMoreDynamic
    };
    Ok(CompareReport {
        first,
        second,
        p_two_sided,
        p_first_greater,
        p_first_less,
        alpha,
        verdict,
        verdict_text: verdict.describe().to_string(),
    })
}
