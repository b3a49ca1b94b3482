//! Dynamic-range estimation for digital audio.
//!
//! The signal is modeled as a smooth trend plus a stochastic sound wave.
//! A Priestley-Chao kernel smoother with a correlation-corrected
//! cross-validated bandwidth separates the two; random block subsampling
//! estimates the distribution of the residual variance; the Median
//! Stochastic Dynamic Range (MeSDR) summarizes it with distribution-free
//! confidence bands. Classical descriptive metrics (RMS power, sequential
//! DR, Welch periodogram) and a hard-knee RMS compressor for controlled
//! sweep experiments round out the toolkit.

pub mod analysis;
pub mod audio_io;
pub mod compressor;
pub mod error;
pub mod math;
pub mod power;
pub mod smoother;
pub mod subsampler;

pub use analysis::{
    analyze, analyze_with_sample, compare, AnalysisConfig, AnalyzeReport, CompareReport, Verdict,
    DEFAULT_TRIM_DB,
};
pub use audio_io::{
    load_pcm, load_raw, loudest_channel, trim_silence, write_wav_16, Signal,
};
pub use compressor::{
    compress, compression_sweep, Compressed, CompressorConfig, SweepRow, SweepTable,
};
pub use error::{Error, Result};
pub use power::{dbfs, periodogram, rms_power, sequential_dr, DrsConfig, Spectrum};
pub use smoother::{
    priestley_chao_at, priestley_chao_fit, select_bandwidth, BandwidthGrid, CvVariant, Epanechnikov, Kernel,
    SmoothFit, DEFAULT_C1, DEFAULT_C2, DEFAULT_GRID_POINTS, MAX_BANDWIDTH,
};
pub use subsampler::{
    block_variance, draw_blocks, empirical_quantile, mann_whitney, median_ci, mesdr,
    subsample_distribution, Alternative, BlockVarianceSample, DrReport, SubsampleConfig,
    DEFAULT_BLOCK_COUNT, DEFAULT_BLOCK_LEN,
};
