//! Reconstruction metrics: SI-SDR and log-spectral L1 distances.
//!
//! Spectral distances are the mean absolute difference over every
//! (frame, bin) cell, not a per-frame average.

use std::fmt;

use crate::bitstream::{bitrate, StreamHeader};
use crate::dsp::mel::log_mel_from_magnitude;
use crate::dsp::{magnitude, AudioBuffer, MelConfig, MelFilterbank, SpectrogramConfig, StftPlan};
use crate::error::{Error, Result};

/// Analysis windows for the multi-resolution distances; hop is a quarter window.
pub const MULTI_RES_WINDOWS: [usize; 7] = [32, 64, 128, 256, 512, 1024, 2048];
/// Mel band counts paired index-wise with [`MULTI_RES_WINDOWS`].
pub const MULTI_RES_MELS: [usize; 7] = [5, 10, 20, 40, 80, 160, 320];

/// Upper (and, symmetrically, lower) bound on reported SI-SDR in dB.
pub const SI_SDR_CAP_DB: f64 = 100.0;

fn check_pair(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::shape(
            format!("{} samples", reference.len()),
            format!("{} samples", estimate.len()),
        ));
    }
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::input(format!(
            "sample rates differ: {} vs {}",
            reference.sample_rate(),
            estimate.sample_rate()
        )));
    }
    if reference.is_empty() {
        return Err(Error::input("cannot compare empty signals"));
    }
    Ok(())
}

/// Scale-invariant signal-to-distortion ratio in dB, clamped to +-100.
pub fn si_sdr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    check_pair(reference, estimate)?;
    let r = reference.samples();
    let e = estimate.samples();
    let ref_energy: f64 = r.iter().map(|x| x * x).sum();
    if ref_energy == 0.0 {
        return Err(Error::input("SI-SDR reference is all zeros"));
    }
    let alpha = r.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / ref_energy;
    let mut target = 0.0;
    let mut residual = 0.0;
    for (&a, &b) in r.iter().zip(e) {
        let t = alpha * a;
        target += t * t;
        residual += (t - b) * (t - b);
    }
    if target == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

/// Mean |log-mel(reference) - log-mel(estimate)|. Bands that cover no FFT bin are skipped.
pub fn log_mel_distance(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    spec: &SpectrogramConfig,
    mel: &MelConfig,
) -> Result<f64> {
    check_pair(reference, estimate)?;
    let plan = StftPlan::new(*spec)?;
    let fb = MelFilterbank::new_skipping_empty(reference.sample_rate(), spec, mel)?;
    let features = |a: &AudioBuffer| -> Result<Vec<f64>> {
        let mag = magnitude(&plan.forward(a.samples(), a.sample_rate())?);
        Ok(log_mel_from_magnitude(&mag, &fb, mel.log_floor))
    };
    Ok(mean_abs_diff(&features(reference)?, &features(estimate)?))
}

/// Mean |ln max(|STFT|, floor)| difference.
pub fn log_stft_distance(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    spec: &SpectrogramConfig,
    log_floor: f64,
) -> Result<f64> {
    check_pair(reference, estimate)?;
    let plan = StftPlan::new(*spec)?;
    let features = |a: &AudioBuffer| -> Result<Vec<f64>> {
        let spec = plan.forward(a.samples(), a.sample_rate())?;
        Ok(spec
            .as_slice()
            .iter()
            .map(|c| c.norm().max(log_floor).ln())
            .collect())
    };
    Ok(mean_abs_diff(&features(reference)?, &features(estimate)?))
}

pub fn multi_res_stft_distance(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let mut total = 0.0;
    for w in MULTI_RES_WINDOWS {
        total += log_stft_distance(
            reference,
            estimate,
            &SpectrogramConfig::with_window(w),
            crate::dsp::DEFAULT_LOG_FLOOR,
        )?;
    }
    Ok(total / MULTI_RES_WINDOWS.len() as f64)
}

pub fn multi_res_mel_distance(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let mut total = 0.0;
    for (w, m) in MULTI_RES_WINDOWS.into_iter().zip(MULTI_RES_MELS) {
        total += log_mel_distance(
            reference,
            estimate,
            &SpectrogramConfig::with_window(w),
            &MelConfig::with_bands(m, reference.sample_rate()),
        )?;
    }
    Ok(total / MULTI_RES_WINDOWS.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub si_sdr_db: f64,
    pub mel_distance: f64,
    pub stft_distance: f64,
    pub multi_res_mel: f64,
    pub multi_res_stft: f64,
    pub bitrate_bps: Option<f64>,
}

/// All metrics at the default 2048/512 analysis configuration, plus the
/// stream's raw bitrate when a header is given.
pub fn evaluate(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    header: Option<&StreamHeader>,
) -> Result<MetricReport> {
    let spec = SpectrogramConfig::default();
    let mel = MelConfig::for_sample_rate(reference.sample_rate());
    Ok(MetricReport {
        si_sdr_db: si_sdr(reference, estimate)?,
        mel_distance: log_mel_distance(reference, estimate, &spec, &mel)?,
        stft_distance: log_stft_distance(reference, estimate, &spec, mel.log_floor)?,
        multi_res_mel: multi_res_mel_distance(reference, estimate)?,
        multi_res_stft: multi_res_stft_distance(reference, estimate)?,
        bitrate_bps: header.map(bitrate),
    })
}

impl MetricReport {
    /// `(key, value)` pairs in output order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("si_sdr_db", self.si_sdr_db),
            ("mel_distance", self.mel_distance),
            ("stft_distance", self.stft_distance),
            ("multi_res_mel", self.multi_res_mel),
            ("multi_res_stft", self.multi_res_stft),
        ];
        if let Some(b) = self.bitrate_bps {
            out.push(("bitrate_bps", b));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let get = |key: &str| -> Result<Option<f64>> {
            for line in text.lines() {
                if let Some((k, v)) = line.split_once('=') {
                    if k.trim() == key {
                        return v
                            .trim()
                            .parse()
                            .map(Some)
                            .map_err(|_| Error::input(format!("bad value for {key}: {v}")));
                    }
                }
            }
            Ok(None)
        };
        let need =
            |v: Option<f64>, key: &str| v.ok_or_else(|| Error::input(format!("missing {key}")));
        Ok(Self {
            si_sdr_db: need(get("si_sdr_db")?, "si_sdr_db")?,
            mel_distance: need(get("mel_distance")?, "mel_distance")?,
            stft_distance: need(get("stft_distance")?, "stft_distance")?,
            multi_res_mel: need(get("multi_res_mel")?, "multi_res_mel")?,
            multi_res_stft: need(get("multi_res_stft")?, "multi_res_stft")?,
            bitrate_bps: get("bitrate_bps")?,
        })
    }
}

/// One `name=value` line per metric. Values use the shortest representation
/// that round-trips, always with a decimal point.
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k}={v:?}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(len: usize, hz: f64, sr: u32) -> AudioBuffer {
        let s = (0..len)
            .map(|i| {
                0.4 * (2.0 * PI * hz * i as f64 / sr as f64).sin()
                    + 0.05 * ((i * 37 % 101) as f64 / 101.0 - 0.5)
            })
            .collect();
        AudioBuffer::new(s, sr).unwrap()
    }

    #[test]
    fn identity_is_capped() {
        let x = tone(4000, 300.0, 16000);
        assert_eq!(si_sdr(&x, &x).unwrap(), 100.0);
        let doubled =
            AudioBuffer::new(x.samples().iter().map(|v| 2.0 * v).collect(), 16000).unwrap();
        assert_eq!(si_sdr(&x, &doubled).unwrap(), 100.0);
    }

    #[test]
    fn si_sdr_errors() {
        let x = tone(100, 300.0, 16000);
        assert!(si_sdr(&x, &x.truncated(99)).is_err());
        let z = AudioBuffer::silence(100, 16000).unwrap();
        assert!(si_sdr(&z, &x).is_err());
        assert_eq!(si_sdr(&x, &z).unwrap(), -100.0);
    }

    #[test]
    fn distances_zero_on_identity_and_symmetric() {
        let a = tone(6000, 440.0, 16000);
        let b = tone(6000, 520.0, 16000);
        let spec = SpectrogramConfig::default();
        let mel = MelConfig::for_sample_rate(16000);
        assert_eq!(log_mel_distance(&a, &a, &spec, &mel).unwrap(), 0.0);
        assert_eq!(log_stft_distance(&a, &a, &spec, 1e-5).unwrap(), 0.0);
        let ab = log_mel_distance(&a, &b, &spec, &mel).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, log_mel_distance(&b, &a, &spec, &mel).unwrap());
        assert_eq!(multi_res_stft_distance(&a, &a).unwrap(), 0.0);
        let m = multi_res_mel_distance(&a, &b).unwrap();
        assert!(m > 0.0);
        assert_eq!(m, multi_res_mel_distance(&b, &a).unwrap());
    }

    #[test]
    fn distance_to_silence_matches_floor_offset() {
        let a = tone(6000, 440.0, 16000);
        let z = AudioBuffer::silence(6000, 16000).unwrap();
        let spec = SpectrogramConfig::default();
        let mel = MelConfig::for_sample_rate(16000);
        let feats = crate::dsp::log_mel(&a, &spec, &mel).unwrap();
        let floor = mel.log_floor.ln();
        let expected = feats
            .as_slice()
            .iter()
            .map(|v| (v - floor).abs())
            .sum::<f64>()
            / feats.as_slice().len() as f64;
        let got = log_mel_distance(&a, &z, &spec, &mel).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(got > 0.0);
    }

    #[test]
    fn report_text_round_trip() {
        let x = tone(8000, 440.0, 16000);
        let r = evaluate(&x, &x, None).unwrap();
        let text = r.to_string();
        assert!(text.starts_with("si_sdr_db=100.0\nmel_distance=0.0\n"));
        assert!(!text.contains("bitrate_bps"));
        assert_eq!(MetricReport::parse(&text).unwrap(), r);
        let h = StreamHeader::new(44100, 512, 1000, 0);
        let r = evaluate(&x, &x, Some(&h)).unwrap();
        assert!(r.to_string().contains("bitrate_bps=6890.625\n"));
    }
}
