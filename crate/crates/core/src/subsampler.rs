//! Random-block subsampling of residual variances, the MeSDR statistic
//! with order-statistic confidence bands, and the Mann-Whitney location
//! test used to compare two DR distributions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashSet;

use crate::audio_io::Signal;
use crate::error::{Error, Result};
use crate::math;
use crate::smoother::{select_bandwidth, BandwidthGrid};

/// The 50 ms default block length at 44.1 kHz.
pub const DEFAULT_BLOCK_LEN: usize = 2205;
/// Default number of random blocks.
pub const DEFAULT_BLOCK_COUNT: usize = 500;
/// Shortest admissible block.
pub const MIN_BLOCK_LEN: usize = 50;

/// Random subsampling configuration.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SubsampleConfig {
    /// Block length in samples.
    pub b: usize,
    /// Number of random blocks.
    pub k: usize,
    /// RNG seed; echoed in every output.
    pub seed: u64,
    /// Draw block starts with or without replacement.
    pub replacement: bool,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            b: DEFAULT_BLOCK_LEN,
            k: DEFAULT_BLOCK_COUNT,
            seed: 0,
            replacement: false,
        }
    }
}

impl SubsampleConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.b < MIN_BLOCK_LEN {
            return Err(Error::argument(format!(
                "block length {} below minimum {MIN_BLOCK_LEN}",
                self.b
            )));
        }
        if self.b >= n {
            return Err(Error::argument(format!(
                "block length {} must be smaller than signal length {n}",
                self.b
            )));
        }
        if self.k < 1 {
            return Err(Error::argument("K must be at least 1"));
        }
        if !self.replacement && self.k > n - self.b + 1 {
            return Err(Error::argument(format!(
                "K={} exceeds the {} distinct block starts available without replacement",
                self.k,
                n - self.b + 1
            )));
        }
        Ok(())
    }
}

/// The K subsample variances with their provenance.
#[derive(Debug, Clone, Serialize)]
pub struct BlockVarianceSample {
    /// Drawn 1-based block start indices, in draw order.
    pub starts: Vec<usize>,
    /// Block residual variances, >= 0.
    pub variances: Vec<f64>,
    /// DR values -10 log10(variance); +inf for degenerate blocks.
    pub dr_values: Vec<f64>,
    /// Bandwidth chosen inside each block; None for degenerate blocks.
    pub per_block_h: Vec<Option<f64>>,
    pub degenerate_blocks: usize,
    /// Set when more than half the blocks were degenerate.
    pub degenerate_warning: bool,
    pub config: SubsampleConfig,
}

/// MeSDR with its confidence bands and run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DrReport {
    pub mesdr: f64,
    /// 20 log10(peak), already folded into mesdr/quantiles/intervals.
    pub headroom_correction: f64,
    /// (gamma, quantile of the DR distribution) pairs, monotone in gamma.
    pub quantiles: Vec<(f64, f64)>,
    /// None when fewer than 30 finite blocks are available.
    pub ci90: Option<(f64, f64)>,
    pub ci95: Option<(f64, f64)>,
    pub degenerate_blocks: usize,
    pub total_blocks: usize,
    pub degenerate_warning: bool,
    pub config: SubsampleConfig,
}

/// Draw K block start indices from {1, ..., n-b+1}, deterministic per seed.
pub fn draw_blocks(n: usize, cfg: &SubsampleConfig) -> Result<Vec<usize>> {
    cfg.validate(n)?;
    let range = n - cfg.b + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.replacement {
        return Ok((0..cfg.k).map(|_| rng.random_range(1..=range)).collect());
    }
    if cfg.k * 2 >= range {
        // dense draw: shuffle the whole index set and take a prefix
        let mut all: Vec<usize> = (1..=range).collect();
        all.shuffle(&mut rng);
        all.truncate(cfg.k);
        return Ok(all);
    }
    let mut seen = HashSet::with_capacity(cfg.k);
    let mut out = Vec::with_capacity(cfg.k);
    while out.len() < cfg.k {
        let idx = rng.random_range(1..=range);
        if seen.insert(idx) {
            out.push(idx);
        }
    }
    Ok(out)
}

/// Outcome of one block analysis.
#[derive(Debug, Clone, Copy)]
pub struct BlockStat {
    pub variance: f64,
    pub h_hat: Option<f64>,
    pub degenerate: bool,
}

/// Residual variance of one block after block-local smoothing.
///
/// A constant block is legitimate silence: it yields variance zero with
/// the degeneracy flag rather than an error.
pub fn block_variance(block: &[f64], grid: &BandwidthGrid) -> Result<BlockStat> {
    if block.len() < MIN_BLOCK_LEN {
        return Err(Error::argument(format!(
            "block length {} below minimum {MIN_BLOCK_LEN}",
            block.len()
        )));
    }
    let (lo, hi) = block
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if lo == hi {
        return Ok(BlockStat {
            variance: 0.0,
            h_hat: None,
            degenerate: true,
        });
    }
    let fit = select_bandwidth(block, grid)?;
    Ok(BlockStat {
        variance: math::sample_variance(&fit.residuals),
        h_hat: Some(fit.h_hat),
        degenerate: false,
    })
}

/// Run the full random subsampling scheme over a signal.
///
/// Starts are drawn up front in one sequential pass; block jobs then run
/// in parallel and are reported in draw order, so the output does not
/// depend on scheduling.
pub fn subsample_distribution(
    signal: &Signal,
    cfg: &SubsampleConfig,
    grid: &BandwidthGrid,
) -> Result<BlockVarianceSample> {
    let starts = draw_blocks(signal.len(), cfg)?;
    let stats: Vec<BlockStat> = starts
        .par_iter()
        .map(|&t| block_variance(&signal.samples[t - 1..t - 1 + cfg.b], grid))
        .collect::<Result<Vec<_>>>()?;
    let variances: Vec<f64> = stats.iter().map(|s| s.variance).collect();
    let dr_values: Vec<f64> = variances
        .iter()
        .map(|&v| if v > 0.0 { -10.0 * v.log10() } else { f64::INFINITY })
        .collect();
    let per_block_h: Vec<Option<f64>> = stats.iter().map(|s| s.h_hat).collect();
    let degenerate_blocks = stats.iter().filter(|s| s.degenerate).count();
    Ok(BlockVarianceSample {
        degenerate_warning: 2 * degenerate_blocks > cfg.k,
        starts,
        variances,
        dr_values,
        per_block_h,
        degenerate_blocks,
        config: *cfg,
    })
}

/// Left-continuous inverse of the empirical CDF: the smallest order
/// statistic x_(k) with k/K >= gamma.
pub fn empirical_quantile(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::argument("quantile of an empty sample"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::argument(format!("gamma {gamma} outside (0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (gamma * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.max(1) - 1])
}

/// Distribution-free confidence interval for the median, from the normal
/// approximation to the order-statistic ranks.
pub fn median_ci(dr_values: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::argument(format!("confidence level {level} outside (0, 1)")));
    }
    let k = dr_values.len();
    if k < 30 {
        return Err(Error::argument(format!(
            "median CI needs at least 30 values, got {k}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z = normal.inverse_cdf(0.5 + level / 2.0);
    let half = z * (k as f64).sqrt() / 2.0;
    let center = k as f64 / 2.0;
    let lower_rank = ((center - half).floor() as i64).clamp(1, k as i64) as usize;
    let upper_rank = (((center + half).ceil() as i64) + 1).clamp(1, k as i64) as usize;
    let mut sorted = dr_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((sorted[lower_rank - 1], sorted[upper_rank - 1]))
}

/// Default report quantiles.
pub const REPORT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// The Median Stochastic DR with confidence bands.
///
/// Degenerate (silent) blocks are excluded from all quantiles but counted
/// in the report. The headroom correction 20 log10(peak) is added to every
/// reported level so signals not scaled onto [-1, 1] read correctly.
pub fn mesdr(sample: &BlockVarianceSample, peak: f64) -> Result<DrReport> {
    if !(peak > 0.0) {
        return Err(Error::argument(format!("peak must be positive, got {peak}")));
    }
    let finite: Vec<f64> = sample
        .dr_values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::estimation(
            "all blocks degenerate: no finite DR values to summarize",
        ));
    }
    let headroom = 20.0 * peak.log10();
    let median = empirical_quantile(&finite, 0.5)? + headroom;
    let quantiles = REPORT_QUANTILES
        .iter()
        .map(|&g| Ok((g, empirical_quantile(&finite, g)? + headroom)))
        .collect::<Result<Vec<_>>>()?;
    let shift = |ci: (f64, f64)| (ci.0 + headroom, ci.1 + headroom);
    let (ci90, ci95) = if finite.len() >= 30 {
        (
            Some(shift(median_ci(&finite, 0.90)?)),
            Some(shift(median_ci(&finite, 0.95)?)),
        )
    } else {
        (None, None)
    };
    Ok(DrReport {
        mesdr: median,
        headroom_correction: headroom,
        quantiles,
        ci90,
        ci95,
        degenerate_blocks: sample.degenerate_blocks,
        total_blocks: sample.config.k,
        degenerate_warning: sample.degenerate_warning,
        config: sample.config,
    })
}

/// Alternative hypothesis for the Mann-Whitney test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    /// First sample location-shifted to the right.
    AGreater,
    /// First sample location-shifted to the left.
    ALess,
}

fn midranks(pooled: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Exact distribution of the doubled rank sum of the first sample,
/// enumerated over all C(n, n1) label assignments.
fn exact_rank_sum_p(doubled_ranks: &[u64], n1: usize, observed: u64, alt: Alternative) -> f64 {
    let total: u64 = doubled_ranks.iter().sum();
    let max_sum = total as usize;
    // counts[k][s]: number of k-subsets with doubled rank sum s;
    // counts stay below C(40, 20) ~ 1.4e11, exactly representable in f64
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1.0;
    for &r in doubled_ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = counts[k - 1][s - r];
                if add > 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    let dist = &counts[n1];
    let total_count: f64 = dist.iter().sum();
    let le: f64 = dist[..=(observed as usize).min(max_sum)].iter().sum();
    let ge: f64 = dist[(observed as usize).min(max_sum)..].iter().sum();
    let p = match alt {
        Alternative::ALess => le / total_count,
        Alternative::AGreater => ge / total_count,
        Alternative::TwoSided => 2.0 * (le.min(ge)) / total_count,
    };
    p.min(1.0)
}

/// Mann-Whitney rank-sum test. Exact enumeration when both samples have
/// at most 20 values, tie-corrected normal approximation otherwise.
pub fn mann_whitney(a: &[f64], b: &[f64], alt: Alternative) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::argument("mann_whitney requires two non-empty samples"));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::argument("mann_whitney requires finite values"));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();

    if n1 <= 20 && n2 <= 20 {
        let doubled: Vec<u64> = ranks.iter().map(|&r| (2.0 * r).round() as u64).collect();
        let observed = (2.0 * r1).round() as u64;
        return Ok(exact_rank_sum_p(&doubled, n1, observed, alt));
    }

    let n = (n1 + n2) as f64;
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean_u = (n1 * n2) as f64 / 2.0;
    // tie correction on the rank variance
    let mut tie_term = 0.0;
    {
        let mut sorted = pooled.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            tie_term += t * t * t - t;
            i = j;
        }
    }
    let var_u = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var_u <= 0.0 {
        // every observation tied: no evidence of shift
        return Ok(1.0);
    }
    let sd = var_u.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    // continuity correction of 1/2 toward the mean
    let p = match alt {
        Alternative::ALess => normal.cdf((u1 - mean_u + 0.5) / sd),
        Alternative::AGreater => 1.0 - normal.cdf((u1 - mean_u - 0.5) / sd),
        Alternative::TwoSided => {
            let lo = normal.cdf((u1 - mean_u + 0.5) / sd);
            let hi = 1.0 - normal.cdf((u1 - mean_u - 0.5) / sd);
            2.0 * lo.min(hi)
        }
    };
    Ok(p.min(1.0))
}

/// dr_values as a single-column CSV for external plotting.
pub fn dr_values_csv(sample: &BlockVarianceSample) -> String {
    let mut out = String::from("dr\n");
    for v in &sample.dr_values {
        out.push_str(&format!("{v}\n"));
    }
    out
}
