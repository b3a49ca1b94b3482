//! PCM decoding and basic signal utilities.
//!
//! Integer PCM only (16-bit required, 24-bit supported); samples are scaled
//! by 1/2^(bits-1) so the full-scale negative code maps to exactly -1.0.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math;
use crate::power;

/// A mono sample sequence with its rate and a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source: String,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::argument("sample_rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::argument("signal must be non-empty"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("signal contains non-finite samples"));
        }
        Ok(Signal {
            samples,
            sample_rate,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Max of |x_i| over the signal.
    pub fn peak(&self) -> f64 {
        peak(self)
    }
}

/// Max of |x_i| over the signal.
pub fn peak(signal: &Signal) -> f64 {
    signal.samples.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

struct WavFormat {
    channels: usize,
    sample_rate: u32,
    bits: u16,
}

fn parse_wav(bytes: &[u8]) -> Result<(WavFormat, &[u8])> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::decode("not a RIFF/WAVE file"));
    }
    let mut fmt: Option<WavFormat> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            if id == b"data" {
                return Err(Error::decode(format!(
                    "truncated 'data' chunk at byte offset {}: header declares {} bytes, {} available",
                    pos,
                    size,
                    bytes.len() - body_start
                )));
            }
            return Err(Error::decode(format!(
                "truncated '{}' chunk at byte offset {}",
                String::from_utf8_lossy(id),
                pos
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::decode("'fmt ' chunk too short"));
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                if audio_format != 1 {
                    return Err(Error::decode(format!(
                        "'fmt ' chunk: unsupported codec {audio_format} (only integer PCM, format 1)"
                    )));
                }
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap()) as usize;
                let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if bits != 16 && bits != 24 {
                    return Err(Error::decode(format!(
                        "'fmt ' chunk: unsupported sample width {bits} bits (16 or 24 supported)"
                    )));
                }
                if channels == 0 || sample_rate == 0 {
                    return Err(Error::decode("'fmt ' chunk: zero channels or sample rate"));
                }
                fmt = Some(WavFormat {
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_start + size + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| Error::decode("missing 'fmt ' chunk"))?;
    let data = data.ok_or_else(|| Error::decode("missing 'data' chunk"))?;
    Ok((fmt, data))
}

fn decode_channel(data: &[u8], channels: usize, bits: u16, channel: usize) -> Result<Vec<f64>> {
    let bytes_per_sample = bits as usize / 8;
    let frame = bytes_per_sample * channels;
    if data.len() % frame != 0 {
        return Err(Error::decode(format!(
            "'data' chunk length {} is not a whole number of {}-byte frames",
            data.len(),
            frame
        )));
    }
    let n = data.len() / frame;
    let scale = 1.0 / (1i64 << (bits - 1)) as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let off = i * frame + channel * bytes_per_sample;
        let v = match bits {
            16 => i16::from_le_bytes(data[off..off + 2].try_into().unwrap()) as i64,
            24 => {
                let b = &data[off..off + 3];
                // sign-extend the 24-bit little-endian value
                ((i32::from_le_bytes([b[0], b[1], b[2], 0]) << 8) >> 8) as i64
            }
            _ => unreachable!(),
        };
        out.push(v as f64 * scale);
    }
    Ok(out)
}

/// Decode one channel of a RIFF/WAVE integer PCM file.
pub fn load_pcm(path: impl AsRef<Path>, channel: usize) -> Result<Signal> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let (fmt, data) = parse_wav(&bytes)?;
    if channel >= fmt.channels {
        return Err(Error::argument(format!(
            "channel {channel} out of range: file has {} channel(s)",
            fmt.channels
        )));
    }
    let samples = decode_channel(data, fmt.channels, fmt.bits, channel)?;
    Signal::new(
        samples,
        fmt.sample_rate,
        format!("{}#ch{}", path.display(), channel),
    )
}

/// Decode one channel of a headerless raw PCM file with explicit parameters.
pub fn load_raw(
    path: impl AsRef<Path>,
    sample_rate: u32,
    bits: u16,
    channels: usize,
    channel: usize,
) -> Result<Signal> {
    let path = path.as_ref();
    if bits != 16 && bits != 24 {
        return Err(Error::argument(format!(
            "unsupported sample width {bits} bits (16 or 24 supported)"
        )));
    }
    if channels == 0 {
        return Err(Error::argument("channels must be positive"));
    }
    if channel >= channels {
        return Err(Error::argument(format!(
            "channel {channel} out of range: {channels} channel(s) declared"
        )));
    }
    let bytes = fs::read(path)?;
    let samples = decode_channel(&bytes, channels, bits, channel)?;
    Signal::new(
        samples,
        sample_rate,
        format!("{}#ch{}", path.display(), channel),
    )
}

/// Per-channel peaks of a WAV file, for picking the channel to analyze.
pub fn channel_peaks(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let bytes = fs::read(path.as_ref())?;
    let (fmt, data) = parse_wav(&bytes)?;
    (0..fmt.channels)
        .map(|ch| {
            let samples = decode_channel(data, fmt.channels, fmt.bits, ch)?;
            Ok(samples.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())))
        })
        .collect()
}

/// Zero-based index of the channel with the largest peak.
pub fn loudest_channel(path: impl AsRef<Path>) -> Result<usize> {
    let peaks = channel_peaks(path)?;
    let mut best = 0usize;
    for (i, &p) in peaks.iter().enumerate() {
        if p > peaks[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Write a mono signal as a 16-bit little-endian PCM WAV file.
pub fn write_wav_16(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let n = signal.samples.len();
    let data_len = n * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in &signal.samples {
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Frame length used by the silence trimmer: 10 ms of samples.
fn trim_frame_len(sample_rate: u32) -> usize {
    ((sample_rate as usize) / 100).max(1)
}

/// Remove leading and trailing silence, judged on 10 ms RMS frames.
///
/// Keeps everything from the first to the last frame whose RMS level in
/// dBFS exceeds `threshold_db`. An all-silent signal is an error.
pub fn trim_silence(signal: &Signal, threshold_db: f64) -> Result<Signal> {
    if threshold_db > 0.0 {
        return Err(Error::argument(format!(
            "trim threshold must be <= 0 dBFS, got {threshold_db}"
        )));
    }
    let frame = trim_frame_len(signal.sample_rate);
    let n = signal.samples.len();
    let n_frames = n.div_ceil(frame);
    let mut first: Option<usize> = None;
    let mut last: Option<usize> = None;
    for f in 0..n_frames {
        let lo = f * frame;
        let hi = ((f + 1) * frame).min(n);
        let rms = power::rms_power(&signal.samples[lo..hi])?;
        if power::dbfs(rms, 1.0)? > threshold_db {
            if first.is_none() {
                first = Some(f);
            }
            last = Some(f);
        }
    }
    match (first, last) {
        (Some(f0), Some(f1)) => {
            let lo = f0 * frame;
            let hi = ((f1 + 1) * frame).min(n);
            Signal::new(
                signal.samples[lo..hi].to_vec(),
                signal.sample_rate,
                signal.source.clone(),
            )
        }
        _ => Err(Error::estimation(format!(
            "all frames below {threshold_db} dBFS: signal is silent"
        ))),
    }
}

/// RMS power of the whole signal, for quick level checks.
pub fn overall_rms(signal: &Signal) -> f64 {
    (math::pairwise_sum_by(&signal.samples, |x| x * x) / signal.samples.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wav_bytes_16(samples: &[i16], channels: u16, rate: u32) -> Vec<u8> {
        let data_len = samples.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for &s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    fn write_temp(bytes: &[u8]) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("mesdr_test_{}.wav", rand::random::<u64>()));
        fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn sixteen_bit_scaling() {
        let path = write_temp(&wav_bytes_16(&[0, -32768, 16384], 1, 44_100));
        let sig = load_pcm(&path, 0).unwrap();
        assert_eq!(sig.samples[0], 0.0);
        assert_eq!(sig.samples[1], -1.0);
        assert_eq!(sig.samples[2], 0.5);
        assert_eq!(sig.sample_rate, 44_100);
        fs::remove_file(path).ok();
    }

    #[test]
    fn full_scale_negative_peak_is_exactly_one() {
        let path = write_temp(&wav_bytes_16(&[-32768, 100, -5], 1, 44_100));
        let sig = load_pcm(&path, 0).unwrap();
        assert_eq!(peak(&sig), 1.0);
        fs::remove_file(path).ok();
    }

    #[test]
    fn stereo_channel_selection_and_range_check() {
        // interleaved L/R
        let path = write_temp(&wav_bytes_16(&[100, -200, 300, -400], 2, 48_000));
        let left = load_pcm(&path, 0).unwrap();
        let right = load_pcm(&path, 1).unwrap();
        assert_eq!(left.samples.len(), 2);
        assert_relative_eq!(left.samples[1], 300.0 / 32768.0);
        assert_relative_eq!(right.samples[0], -200.0 / 32768.0);
        assert!(matches!(load_pcm(&path, 2), Err(Error::Argument(_))));
        assert_eq!(loudest_channel(&path).unwrap(), 1);
        fs::remove_file(path).ok();
    }

    #[test]
    fn truncated_data_chunk_reports_offset() {
        let mut bytes = wav_bytes_16(&[1, 2, 3, 4], 1, 44_100);
        bytes.truncate(bytes.len() - 3);
        let path = write_temp(&bytes);
        let err = load_pcm(&path, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated"), "{msg}");
        assert!(msg.contains("byte offset"), "{msg}");
        fs::remove_file(path).ok();
    }

    #[test]
    fn unsupported_codec_names_chunk() {
        let mut bytes = wav_bytes_16(&[1, 2], 1, 44_100);
        bytes[20] = 3; // IEEE float format tag
        let path = write_temp(&bytes);
        let err = load_pcm(&path, 0).unwrap_err();
        assert!(err.to_string().contains("fmt "), "{err}");
        fs::remove_file(path).ok();
    }

    #[test]
    fn twenty_four_bit_decode() {
        let mut out = Vec::new();
        let samples: [i32; 2] = [-8_388_608, 4_194_304];
        let mut data = Vec::new();
        for s in samples {
            data.extend_from_slice(&s.to_le_bytes()[..3]);
        }
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&44_100u32.to_le_bytes());
        out.extend_from_slice(&(44_100u32 * 3).to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes());
        out.extend_from_slice(&24u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&data);
        let path = write_temp(&out);
        let sig = load_pcm(&path, 0).unwrap();
        assert_eq!(sig.samples[0], -1.0);
        assert_eq!(sig.samples[1], 0.5);
        fs::remove_file(path).ok();
    }

    #[test]
    fn raw_pcm_decode() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("mesdr_test_{}.raw", rand::random::<u64>()));
        let mut data = Vec::new();
        for s in [0i16, 16384, -32768] {
            data.extend_from_slice(&s.to_le_bytes());
        }
        fs::write(&path, &data).unwrap();
        let sig = load_raw(&path, 22_050, 16, 1, 0).unwrap();
        assert_eq!(sig.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(sig.sample_rate, 22_050);
        fs::remove_file(path).ok();
    }

    #[test]
    fn trim_all_silent_is_error() {
        let sig = Signal::new(vec![0.0; 44_100], 44_100, "zeros").unwrap();
        assert!(matches!(trim_silence(&sig, -60.0), Err(Error::Estimation(_))));
    }

    #[test]
    fn trim_positive_threshold_is_argument_error() {
        let sig = Signal::new(vec![0.5; 1000], 44_100, "x").unwrap();
        assert!(matches!(trim_silence(&sig, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn trim_identity_when_nothing_quiet() {
        let sig = Signal::new(vec![0.5; 44_100], 44_100, "x").unwrap();
        let trimmed = trim_silence(&sig, -60.0).unwrap();
        assert_eq!(trimmed.samples, sig.samples);
    }

    #[test]
    fn trim_keeps_middle_second() {
        let sr = 44_100usize;
        let mut samples = vec![0.0f64; sr];
        samples.extend((0..sr).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
        samples.extend(vec![0.0f64; sr]);
        let sig = Signal::new(samples, sr as u32, "square").unwrap();
        let trimmed = trim_silence(&sig, -60.0).unwrap();
        let frame = sr / 100;
        assert!((trimmed.samples.len() as i64 - sr as i64).unsigned_abs() as usize <= frame);
        assert!(trimmed.samples.iter().all(|&x| x.abs() == 1.0));
    }

    #[test]
    fn trim_is_idempotent() {
        let sr = 44_100usize;
        let mut samples = vec![0.001f64; sr / 2];
        samples.extend(vec![0.8f64; sr]);
        samples.extend(vec![0.0f64; sr / 4]);
        let sig = Signal::new(samples, sr as u32, "x").unwrap();
        let once = trim_silence(&sig, -40.0).unwrap();
        let twice = trim_silence(&once, -40.0).unwrap();
        assert_eq!(once.samples, twice.samples);
    }

    #[test]
    fn wav_round_trip_within_one_quantization_step() {
        let sr = 8_000u32;
        let samples: Vec<f64> = (0..4_000)
            .map(|i| 0.9 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr as f64).sin())
            .collect();
        let sig = Signal::new(samples, sr, "sine").unwrap();
        let dir = std::env::temp_dir();
        let path = dir.join(format!("mesdr_test_{}.wav", rand::random::<u64>()));
        write_wav_16(&path, &sig).unwrap();
        let back = load_pcm(&path, 0).unwrap();
        assert_eq!(back.samples.len(), sig.samples.len());
        for (a, b) in sig.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
        fs::remove_file(path).ok();
    }
}
