use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{AudioBuffer, ComplexSpectrogram, MagnitudeSpectrogram, SpectrogramConfig};
use crate::error::{Error, Result};

/// Periodic Hann window of `len` samples.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Index into a signal of length `len` for padded position `i`, mirroring
/// about the first and last sample without repeating them.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m >= len as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Precomputed FFTs and window for one `SpectrogramConfig`. Reuse across
/// calls when transforming many signals with the same parameters.
pub struct StftPlan {
    cfg: SpectrogramConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: SpectrogramConfig) -> Result<Self> {
        cfg.validate()?;
        let mut window = vec![0.0; cfg.n_fft];
        let offset = (cfg.n_fft - cfg.win_length) / 2;
        window[offset..offset + cfg.win_length].copy_from_slice(&hann_window(cfg.win_length));
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window,
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        })
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.cfg
    }

    /// The analysis window zero-padded to `n_fft`.
    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn pad(&self) -> usize {
        if self.cfg.centered {
            self.cfg.n_fft / 2
        } else {
            0
        }
    }

    /// Maps a padded-domain index to the source sample it copies.
    fn source_index(&self, m: usize, len: usize) -> usize {
        if self.cfg.centered {
            reflect(m as isize - self.pad() as isize, len)
        } else {
            m
        }
    }

    pub fn forward(&self, samples: &[f64], sample_rate: u32) -> Result<ComplexSpectrogram> {
        if samples.is_empty() {
            return Err(Error::input("cannot transform empty audio"));
        }
        let n = self.cfg.n_fft;
        let hop = self.cfg.hop_length;
        let frames = self.cfg.frame_count(samples.len());
        if frames == 0 {
            return Err(Error::input(format!(
                "signal of {} samples is shorter than n_fft {n}",
                samples.len()
            )));
        }
        let bins = self.cfg.n_bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * hop;
            for (j, slot) in buf.iter_mut().enumerate() {
                let x = samples[self.source_index(start + j, samples.len())];
                *slot = Complex64::new(x * self.window[j], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        ComplexSpectrogram::from_vec(frames, bins, data, sample_rate)
    }

    /// Checks that the squared window overlap-adds to a constant at this hop.
    pub fn check_cola(&self) -> Result<()> {
        let hop = self.cfg.hop_length;
        let sums: Vec<f64> = (0..hop)
            .map(|j| {
                self.window
                    .iter()
                    .skip(j)
                    .step_by(hop)
                    .map(|w| w * w)
                    .sum::<f64>()
            })
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 || (max - min) > 1e-9 * max {
            return Err(Error::config(format!(
                "window {} / hop {} does not satisfy constant overlap-add (ratio {:.6})",
                self.cfg.win_length,
                hop,
                min / max
            )));
        }
        Ok(())
    }

    /// Least-squares inverse of `forward`.
    ///
    /// Overlap-added windowed frames are divided by the accumulated squared
    /// window, with the contributions of reflect-padded positions folded back
    /// onto the samples they mirror. The result is the exact minimizer of
    /// `||forward(x) - spec||` over real signals of the requested length.
    pub fn inverse(&self, spec: &ComplexSpectrogram, length: Option<usize>) -> Result<AudioBuffer> {
        self.check_cola()?;
        let n = self.cfg.n_fft;
        let hop = self.cfg.hop_length;
        let bins = self.cfg.n_bins();
        if spec.bins() != bins {
            return Err(Error::shape(
                format!("{bins} frequency bins"),
                format!("{} bins", spec.bins()),
            ));
        }
        let frames = spec.frames();
        let len = length.unwrap_or_else(|| self.cfg.signal_len(frames));
        if frames == 0 || len == 0 {
            return AudioBuffer::new(vec![0.0; len], spec.sample_rate());
        }
        if self.cfg.frame_count(len) != frames {
            return Err(Error::shape(
                format!("{} frames for {len} samples", self.cfg.frame_count(len)),
                format!("{frames} frames"),
            ));
        }

        let padded_len = len + 2 * self.pad();
        let mut num = vec![0.0; padded_len];
        let mut den = vec![0.0; padded_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            let frame = spec.frame(t);
            buf[..bins].copy_from_slice(frame);
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            for k in 1..n / 2 {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * hop;
            let end = (start + n).min(padded_len);
            for (m, (&w, b)) in (start..end).zip(self.window.iter().zip(&buf)) {
                num[m] += w * b.re * scale;
                den[m] += w * w;
            }
        }

        let mut out_num = vec![0.0; len];
        let mut out_den = vec![0.0; len];
        for m in 0..padded_len {
            if den[m] == 0.0 && num[m] == 0.0 {
                continue;
            }
            let src = self.source_index(m, len);
            if src < len {
                out_num[src] += num[m];
                out_den[src] += den[m];
            }
        }
        let peak = out_den.iter().cloned().fold(0.0, f64::max);
        let samples = out_num
            .iter()
            .zip(&out_den)
            .map(|(&a, &d)| if d > 1e-10 * peak { a / d } else { 0.0 })
            .collect();
        AudioBuffer::new(samples, spec.sample_rate())
    }
}

/// Short-time Fourier transform, one-sided: `frames x (n_fft/2 + 1)`.
pub fn stft(audio: &AudioBuffer, cfg: &SpectrogramConfig) -> Result<ComplexSpectrogram> {
    StftPlan::new(*cfg)?.forward(audio.samples(), audio.sample_rate())
}

/// Inverse STFT; `length` defaults to `cfg.signal_len(frames)`.
pub fn istft(
    spec: &ComplexSpectrogram,
    cfg: &SpectrogramConfig,
    length: Option<usize>,
) -> Result<AudioBuffer> {
    StftPlan::new(*cfg)?.inverse(spec, length)
}

pub fn magnitude(spec: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    spec.map(|c| c.norm())
}
