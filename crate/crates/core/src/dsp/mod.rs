//! Spectral analysis and synthesis.
//!
//! Everything here is a pure function of its inputs. The default analysis
//! configuration is a 2048-point Hann STFT with hop 512 and centered reflect
//! padding, giving 44100 / 512 = 86.13 frames per second at 44.1 kHz.

mod griffin_lim;
pub(crate) mod mel;

mod stft;

pub use griffin_lim::{griffin_lim, spectral_convergence, GriffinLimOutput};
pub use mel::{hz_to_mel, log_mel, mel_to_hz, mel_to_linear, MelFilterbank, MelFrames};
pub use stft::{hann_window, istft, magnitude, stft, StftPlan};

use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;

/// Mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::input("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::input(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
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

    /// Returns the first `len` samples (or all of them, if shorter).
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// STFT parameters. The analysis window is always a periodic Hann window of
/// `win_length` samples, zero-padded to `n_fft` and centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpectrogramConfig {
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    /// Reflect-pad by `n_fft / 2` on both sides so frame `t` is centered on sample `t * hop`.
    pub centered: bool,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            win_length: 2048,
            hop_length: 512,
            centered: true,
        }
    }
}

impl SpectrogramConfig {
    /// `n_fft = win_length = window`, hop of 25%.
    pub fn with_window(window: usize) -> Self {
        Self {
            n_fft: window,
            win_length: window,
            hop_length: (window / 4).max(1),
            centered: true,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 {
            return Err(Error::config("hop_length must be positive"));
        }
        if self.hop_length > self.win_length {
            return Err(Error::config(format!(
                "hop_length {} exceeds win_length {}",
                self.hop_length, self.win_length
            )));
        }
        if self.win_length > self.n_fft {
            return Err(Error::config(format!(
                "win_length {} exceeds n_fft {}",
                self.win_length, self.n_fft
            )));
        }
        if self.n_fft < 2 || !self.n_fft.is_multiple_of(2) {
            return Err(Error::config(format!(
                "n_fft must be even and at least 2, got {}",
                self.n_fft
            )));
        }
        Ok(())
    }

    /// Number of frames `stft` produces for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.centered {
            len / self.hop_length + 1
        } else if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop_length + 1
        }
    }

    /// Signal length `istft` reconstructs from `frames` frames by default.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            return 0;
        }
        if self.centered {
            self.hop_length * (frames - 1)
        } else {
            self.n_fft + self.hop_length * (frames - 1)
        }
    }

    /// Frames per second at `sample_rate`.
    pub fn frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop_length as f64
    }
}

/// Mel filterbank parameters (HTK mel scale, unnormalized triangles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Magnitudes are clamped to at least this value before taking `ln`.
    pub log_floor: f64,
}

pub const DEFAULT_LOG_FLOOR: f64 = 1e-5;

impl MelConfig {
    /// 80 bands spanning 0 Hz to Nyquist.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        Self::with_bands(80, sample_rate)
    }

    pub fn with_bands(n_mels: usize, sample_rate: u32) -> Self {
        Self {
            n_mels,
            f_min: 0.0,
            f_max: sample_rate as f64 / 2.0,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if self.n_mels == 0 {
            return Err(Error::config("n_mels must be at least 1"));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::config(format!(
                "log_floor must be positive, got {}",
                self.log_floor
            )));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(Error::config(format!(
                "need 0 <= f_min < f_max, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if self.f_max > nyquist {
            return Err(Error::config(format!(
                "f_max {} exceeds Nyquist {}",
                self.f_max, nyquist
            )));
        }
        Ok(())
    }
}

/// Frame-major time-frequency matrix: `frames` rows of `bins` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    frames: usize,
    bins: usize,
    data: Vec<T>,
    sample_rate: u32,
}

pub type ComplexSpectrogram = Spectrogram<Complex64>;
pub type MagnitudeSpectrogram = Spectrogram<f64>;

impl<T: Copy> Spectrogram<T> {
    pub fn from_vec(frames: usize, bins: usize, data: Vec<T>, sample_rate: u32) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(Error::shape(
                format!("{frames}x{bins} = {} values", frames * bins),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            frames,
            bins,
            data,
            sample_rate,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame(&self, t: usize) -> &[T] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn get(&self, t: usize, k: usize) -> T {
        self.data[t * self.bins + k]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_frames(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.bins.max(1)).take(self.frames)
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Spectrogram<U> {
        Spectrogram {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().map(|&v| f(v)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SpectrogramConfig::default().validate().is_ok());
        let bad = SpectrogramConfig {
            hop_length: 3000,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = SpectrogramConfig {
            win_length: 4096,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_frame_rate_matches_token_rate() {
        let cfg = SpectrogramConfig::default();
        assert_eq!(cfg.frame_rate(44100), 86.1328125);
        assert_eq!(cfg.frame_count(44100), 87);
    }

    #[test]
    fn mel_config_rejects_above_nyquist() {
        let mut m = MelConfig::for_sample_rate(44100);
        assert!(m.validate(44100).is_ok());
        m.f_max = 22051.0;
        assert!(m.validate(44100).is_err());
        m.f_max = 0.0;
        assert!(m.validate(44100).is_err());
    }

    #[test]
    fn audio_rejects_non_finite() {
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 8000).is_err());
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
    }
}
