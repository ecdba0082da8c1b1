//! Griffin-Lim phase reconstruction.
//!
//! Alternates between imposing the target magnitude on the current STFT and
//! projecting back onto consistent spectrograms with the least-squares
//! inverse STFT. Because both steps are exact projections under the
//! full-spectrum norm, the spectral convergence never increases.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::{AudioBuffer, ComplexSpectrogram, MagnitudeSpectrogram, SpectrogramConfig, StftPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GriffinLimOutput {
    pub audio: AudioBuffer,
    /// Spectral convergence of `audio`'s STFT after each iteration.
    pub convergence: Vec<f64>,
}

/// Weight of bin `k` when summing a one-sided spectrum as if it were the full
/// two-sided spectrum of a real signal.
fn bin_weight(k: usize, bins: usize) -> f64 {
    if k == 0 || k + 1 == bins {
        1.0
    } else {
        2.0
    }
}

/// `|| |estimate| - target ||_F / || target ||_F`, both sides summed over the
/// full two-sided spectrum. Returns 0 for an all-zero target.
pub fn spectral_convergence(estimate: &ComplexSpectrogram, target: &MagnitudeSpectrogram) -> f64 {
    let bins = target.bins();
    let mut err = 0.0;
    let mut norm = 0.0;
    for (e, t) in estimate.iter_frames().zip(target.iter_frames()) {
        for k in 0..bins {
            let w = bin_weight(k, bins);
            let d = e[k].norm() - t[k];
            err += w * d * d;
            norm += w * t[k] * t[k];
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        (err / norm).sqrt()
    }
}

fn with_phase_of(target: &MagnitudeSpectrogram, phase: &ComplexSpectrogram) -> ComplexSpectrogram {
    let data = target
        .as_slice()
        .iter()
        .zip(phase.as_slice())
        .map(|(&m, &c)| {
            let n = c.norm();
            if n > 0.0 {
                c * (m / n)
            } else {
                Complex64::new(m, 0.0)
            }
        })
        .collect();
    ComplexSpectrogram::from_vec(target.frames(), target.bins(), data, target.sample_rate())
        .expect("shape preserved")
}

/// Estimates a waveform whose STFT magnitude approximates `magnitude`.
///
/// Initial phases are uniform on `[-pi, pi)` from `seed`. The output has
/// `cfg.signal_len(frames)` samples.
pub fn griffin_lim(
    magnitude: &MagnitudeSpectrogram,
    cfg: &SpectrogramConfig,
    iterations: usize,
    seed: u64,
) -> Result<GriffinLimOutput> {
    if iterations == 0 {
        return Err(Error::config("griffin-lim needs at least one iteration"));
    }
    let plan = StftPlan::new(*cfg)?;
    plan.check_cola()?;
    if magnitude.bins() != cfg.n_bins() {
        return Err(Error::shape(
            format!("{} bins", cfg.n_bins()),
            format!("{} bins", magnitude.bins()),
        ));
    }
    if let Some(v) = magnitude
        .as_slice()
        .iter()
        .find(|v| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::input(format!(
            "magnitude entry {v} is not a finite nonnegative value"
        )));
    }
    let len = cfg.signal_len(magnitude.frames());
    let sample_rate = magnitude.sample_rate();
    if magnitude.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(GriffinLimOutput {
            audio: AudioBuffer::silence(len, sample_rate)?,
            convergence: vec![0.0; iterations],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = magnitude
        .as_slice()
        .iter()
        .map(|&m| Complex64::from_polar(m, rng.random_range(-PI..PI)))
        .collect();
    let mut estimate =
        ComplexSpectrogram::from_vec(magnitude.frames(), magnitude.bins(), data, sample_rate)?;

    let mut convergence = Vec::with_capacity(iterations);
    let mut audio = AudioBuffer::silence(len, sample_rate)?;
    for _ in 0..iterations {
        audio = plan.inverse(&estimate, Some(len))?;
        let rebuilt = plan.forward(audio.samples(), sample_rate)?;
        convergence.push(spectral_convergence(&rebuilt, magnitude));
        estimate = with_phase_of(magnitude, &rebuilt);
    }
    Ok(GriffinLimOutput { audio, convergence })
}
