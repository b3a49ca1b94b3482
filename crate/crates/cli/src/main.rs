//! Command-line dynamic range meter.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mesdr::{
    analysis::{compare, AnalysisConfig},
    audio_io::{load_pcm, load_raw, loudest_channel, write_wav_16, Signal},
    compressor::{compress, compression_sweep, CompressorConfig},
    power::{periodogram, sequential_dr, DrsConfig},
    subsampler::{dr_values_csv, SubsampleConfig},
    Error,
};

#[derive(Parser)]
#[command(
    name = "mesdr",
    version,
    about = "Dynamic range estimation for digital audio (MeSDR and classical metrics)",
    after_help = "Exit codes: 1 argument error, 2 decode error, 3 estimation error."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// RNG seed for block subsampling; echoed in every output
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Block length in samples (default 2205 = 50 ms at 44.1 kHz)
    #[arg(long, global = true, default_value_t = 2205)]
    b: usize,

    /// Number of random blocks
    #[arg(long, global = true, default_value_t = 500)]
    k: usize,

    /// Draw block starts with replacement
    #[arg(long, global = true, default_value_t = false)]
    replacement: bool,

    /// Bandwidth grid lower constant: h_min = c1 * b^(-1/5)
    #[arg(long, global = true, default_value_t = 0.3)]
    c1: f64,

    /// Bandwidth grid upper constant: h_max = c2 * b^(-1/5)
    #[arg(long, global = true, default_value_t = 3.0)]
    c2: f64,

    /// Number of log-spaced bandwidth grid points
    #[arg(long = "grid-points", global = true, default_value_t = 25)]
    grid_points: usize,

    /// Channel to analyze (0-based); default: loudest channel
    #[arg(long, global = true)]
    channel: Option<usize>,

    /// Trim leading/trailing frames below this dBFS level
    #[arg(long = "trim-db", global = true, default_value_t = -60.0, allow_hyphen_values = true)]
    trim_db: f64,

    /// Disable silence trimming
    #[arg(long = "no-trim", global = true, default_value_t = false)]
    no_trim: bool,

    /// Worker thread cap [env: MESDR_THREADS]
    #[arg(long, global = true, env = "MESDR_THREADS")]
    threads: Option<usize>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sample rate for raw PCM input (no WAV header)
    #[arg(long, global = true)]
    rate: Option<u32>,

    /// Bits per sample for raw PCM input (16 or 24)
    #[arg(long, global = true)]
    bits: Option<u16>,

    /// Channel count for raw PCM input
    #[arg(long, global = true)]
    channels: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate MeSDR with confidence bands via random block subsampling
    Analyze {
        /// Input audio file (WAV, or raw PCM with --rate/--bits/--channels)
        input: PathBuf,
    },
    /// Classical sequential DR (block-averaged RMS vs peak)
    Drs {
        input: PathBuf,
        /// Block window length in samples
        #[arg(long, default_value_t = 2205)]
        window: usize,
        /// Overlapping samples between consecutive blocks
        #[arg(long, default_value_t = 0)]
        overlap: usize,
    },
    /// Apply the hard-knee RMS compressor; writes a 16-bit WAV + JSON sidecar
    Compress {
        input: PathBuf,
        /// Output WAV path
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        comp: CompressorOpts,
    },
    /// Compare the DR distributions of two signals (Mann-Whitney)
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Use the same subsampling seed for both inputs
        #[arg(long = "shared-seed", default_value_t = false)]
        shared_seed: bool,
        /// Significance level for the verdict
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Compression sweep: MeSDR over a threshold x ratio lattice
    Sweep {
        input: PathBuf,
        /// Comma-separated threshold list in dBFS
        #[arg(long, default_value = "-12,-24", allow_hyphen_values = true, value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Comma-separated compression ratio list
        #[arg(long, default_value = "1.5,2,2.5,3,3.5,4,4.5,5", value_delimiter = ',')]
        ratios: Vec<f64>,
        #[command(flatten)]
        comp: CompressorOpts,
    },
    /// Welch periodogram as CSV (freq, power in dBFS)
    Spectrum {
        input: PathBuf,
        /// Segment length in samples (power of two)
        #[arg(long, default_value_t = 4096)]
        segment: usize,
        /// Overlapping samples between segments; default segment/2
        #[arg(long)]
        overlap: Option<usize>,
    },
}

#[derive(Args)]
struct CompressorOpts {
    /// Compression threshold in dBFS (compress only; sweep uses --thresholds)
    #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
    threshold: f64,
    /// Compression ratio (compress only; sweep uses --ratios)
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    /// RMS envelope window in ms
    #[arg(long = "env-window", default_value_t = 10.0)]
    env_window: f64,
    /// Attack time constant in ms
    #[arg(long, default_value_t = 5.0)]
    attack: f64,
    /// Release time constant in ms
    #[arg(long, default_value_t = 100.0)]
    release: f64,
    /// Makeup gain in dB
    #[arg(long, default_value_t = 0.0)]
    makeup: f64,
}

impl CompressorOpts {
    fn config(&self) -> CompressorConfig {
        CompressorConfig {
            threshold_db: self.threshold,
            ratio: self.ratio,
            env_window_ms: self.env_window,
            attack_ms: self.attack,
            release_ms: self.release,
            makeup_db: self.makeup,
        }
    }
}

impl GlobalOpts {
    fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            subsample: SubsampleConfig {
                b: self.b,
                k: self.k,
                seed: self.seed,
                replacement: self.replacement,
            },
            c1: self.c1,
            c2: self.c2,
            grid_points: self.grid_points,
            trim_db: if self.no_trim { None } else { Some(self.trim_db) },
        }
    }

    fn load(&self, path: &Path) -> Result<Signal, Error> {
        let is_raw = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("raw") | Some("pcm")
        ) || self.rate.is_some();
        if is_raw {
            let rate = self.rate.ok_or_else(|| {
                Error::argument("raw PCM input requires --rate (and --bits/--channels)")
            })?;
            let bits = self.bits.unwrap_or(16);
            let channels = self.channels.unwrap_or(1);
            return load_raw(path, rate, bits, channels, self.channel.unwrap_or(0));
        }
        let channel = match self.channel {
            Some(c) => c,
            None => loudest_channel(path)?,
        };
        load_pcm(path, channel)
    }

    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(Error::from),
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                match writeln!(stdout, "{text}") {
                    // a closed pipe (e.g. | head) is not an error
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                    other => other.map_err(Error::from),
                }
            }
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::argument(format!("serialization failed: {e}")))
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::argument("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::argument(format!("thread pool setup failed: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Analyze { input } => {
            let signal = g.load(input)?;
            let cfg = g.analysis_config();
            let (sample, report) = mesdr::analysis::analyze_with_sample(&signal, &cfg)?;
            if report.report.degenerate_warning {
                eprintln!(
                    "warning: {} of {} blocks were degenerate (silence)",
                    report.report.degenerate_blocks, report.report.total_blocks
                );
            }
            eprintln!("analyzed {} samples in {} ms", report.samples, report.wall_ms);
            match g.format {
                Format::Json => g.emit(&to_json(&report)?),
                Format::Csv => g.emit(dr_values_csv(&sample).trim_end()),
            }
        }
        Command::Drs { input, window, overlap } => {
            let signal = g.load(input)?;
            let cfg = DrsConfig { window_len: *window, overlap: *overlap };
            let drs = sequential_dr(&signal, &cfg)?;
            let blocks = mesdr::power::drs_block_count(signal.len(), &cfg);
            match g.format {
                Format::Json => {
                    let payload = serde_json::json!({
                        "source": signal.source,
                        "drs_dbfs": drs,
                        "blocks": blocks,
                        "window_len": window,
                        "overlap": overlap,
                    });
                    g.emit(&to_json(&payload)?)
                }
                Format::Csv => g.emit(&format!("drs_dbfs,blocks\n{drs},{blocks}")),
            }
        }
        Command::Compress { input, output, comp } => {
            let signal = g.load(input)?;
            let cfg = comp.config();
            let result = compress(&signal, &cfg)?;
            write_wav_16(output, &result.signal)?;
            let sidecar = serde_json::json!({
                "input": signal.source,
                "output": output.to_string_lossy(),
                "clipped_samples": result.clipped_samples,
                "config": cfg,
            });
            let sidecar_path = output.with_extension("json");
            std::fs::write(&sidecar_path, to_json(&sidecar)?)?;
            eprintln!(
                "wrote {} ({} clipped samples); sidecar {}",
                output.display(),
                result.clipped_samples,
                sidecar_path.display()
            );
            Ok(())
        }
        Command::Compare { first, second, shared_seed, alpha } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::argument(format!("alpha {alpha} outside (0, 1)")));
            }
            let a = g.load(first)?;
            let b = g.load(second)?;
            let cfg_a = g.analysis_config();
            let mut cfg_b = cfg_a;
            if !shared_seed {
                // derived second seed, still reproducible from the echoed config
                cfg_b.subsample.seed = cfg_a.subsample.seed.wrapping_add(1);
            }
            let report = compare(&a, &b, &cfg_a, &cfg_b, *alpha)?;
            eprintln!("verdict: {}", report.verdict_text);
            g.emit(&to_json(&report)?)
        }
        Command::Sweep { input, thresholds, ratios, comp } => {
            let signal = g.load(input)?;
            let cfg = g.analysis_config();
            // sweep analyzes the trimmed signal so every cell sees the same span
            let analyzed = match cfg.trim_db {
                Some(db) => mesdr::audio_io::trim_silence(&signal, db)?,
                None => signal,
            };
            let table = compression_sweep(
                &analyzed,
                thresholds,
                ratios,
                &comp.config(),
                &cfg.subsample,
                &cfg.grid()?,
            )?;
            match g.format {
                Format::Json => g.emit(&to_json(&table)?),
                Format::Csv => g.emit(table.to_csv().trim_end()),
            }
        }
        Command::Spectrum { input, segment, overlap } => {
            let signal = g.load(input)?;
            let overlap = overlap.unwrap_or(segment / 2);
            let spectrum = periodogram(&signal.samples, signal.sample_rate, *segment, overlap)?;
            match g.format {
                Format::Json => g.emit(&to_json(&spectrum)?),
                Format::Csv => g.emit(spectrum.to_csv().trim_end()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Argument(_) => 1,
                Error::Decode(_) | Error::Io(_) => 2,
                Error::Estimation(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}
