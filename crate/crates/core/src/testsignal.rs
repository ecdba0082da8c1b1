//! Deterministic synthetic signals for tests and benchmarks.
//!
//! [`speech_like`] is a small source-filter synthesizer: a glottal pulse
//! train with gliding pitch shaped by four formant resonators that move
//! between vowel targets, interleaved with noise fricatives, pauses and a
//! low background noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::AudioBuffer;

const VOWELS: [[f64; 4]; 5] = [
    [730.0, 1090.0, 2440.0, 3400.0],
    [270.0, 2290.0, 3010.0, 3800.0],
    [300.0, 870.0, 2240.0, 3400.0],
    [530.0, 1840.0, 2480.0, 3500.0],
    [570.0, 840.0, 2410.0, 3400.0],
];
const BANDWIDTHS: [f64; 4] = [80.0, 110.0, 160.0, 220.0];

/// Two-pole resonator with unity gain at DC-free peak, direct form I.
#[derive(Default, Clone, Copy)]
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bandwidth: f64, sr: f64) {
        let r = (-PI * bandwidth / sr).exp();
        let theta = 2.0 * PI * freq / sr;
        self.a1 = 2.0 * r * theta.cos();
        self.a2 = -r * r;
        self.gain = 1.0 - r;
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    // Sum of uniforms: cheap, roughly Gaussian, unit variance.
    (0..4).map(|_| rng.random::<f64>() - 0.5).sum::<f64>() * 3f64.sqrt()
}

fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

/// Roughly speech-shaped audio of `seconds` duration, peak-normalized to 0.5.
pub fn speech_like(seed: u64, seconds: f64, sample_rate: u32) -> AudioBuffer {
    let sr = sample_rate as f64;
    let total = (seconds * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    let base_f0 = rng.random_range(95.0..210.0);
    let mut vowel = rng.random_range(0..VOWELS.len());
    let mut formants = [Resonator::default(); 4];
    let mut fricative = Resonator::default();
    let mut tilt = 0.0;
    let mut phase = 0.0;

    while out.len() < total {
        let remaining = total - out.len();
        if rng.random::<f64>() < 0.25 {
            let len = ((rng.random_range(0.03..0.15) * sr) as usize).min(remaining);
            out.extend(std::iter::repeat_n(0.0, len));
            continue;
        }
        let len = ((rng.random_range(0.12..0.32) * sr) as usize).min(remaining);
        if rng.random::<f64>() < 0.2 {
            let center = rng.random_range(3500.0..7000.0f64).min(0.4 * sr);
            fricative.tune(center, 1500.0, sr);
            let amp = rng.random_range(0.05..0.2);
            for i in 0..len {
                let v = fricative.process(noise(&mut rng));
                out.push(amp * envelope(i, len, (0.015 * sr) as usize) * v);
            }
            continue;
        }

        let next = rng.random_range(0..VOWELS.len());
        let f0_start = base_f0 * rng.random_range(0.85..1.2);
        let f0_end = base_f0 * rng.random_range(0.8..1.15);
        let amp = rng.random_range(0.4..1.0);
        for i in 0..len {
            let pos = i as f64 / len as f64;
            if i % 64 == 0 {
                for (k, res) in formants.iter_mut().enumerate() {
                    let f = VOWELS[vowel][k] * (1.0 - pos) + VOWELS[next][k] * pos;
                    res.tune(f.min(0.45 * sr), BANDWIDTHS[k], sr);
                }
            }
            let f0 = f0_start + (f0_end - f0_start) * pos;
            phase += f0 / sr;
            let pulse = if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            };
            tilt = 0.9 * tilt + pulse + 0.02 * noise(&mut rng);
            let mut y = 0.0;
            for res in formants.iter_mut() {
                y += res.process(tilt);
            }
            out.push(amp * envelope(i, len, (0.02 * sr) as usize) * y);
        }
        vowel = next;
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.5 / peak } else { 1.0 };
    for v in out.iter_mut() {
        *v = *v * scale + 1e-4 * noise(&mut rng);
    }
    AudioBuffer::new(out, sample_rate).expect("finite synthetic samples")
}

/// Sine of amplitude `amp` at `hz`.
pub fn sine(hz: f64, amp: f64, len: usize, sample_rate: u32) -> AudioBuffer {
    let samples = (0..len)
        .map(|i| amp * (2.0 * PI * hz * i as f64 / sample_rate as f64).sin())
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite")
}

/// Linear chirp from `f0` to `f1` Hz.
pub fn chirp(f0: f64, f1: f64, amp: f64, len: usize, sample_rate: u32) -> AudioBuffer {
    let dur = len as f64 / sample_rate as f64;
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            amp * (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) / dur * t * t)).sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite")
}

/// Uniform white noise in `[-amp, amp)`.
pub fn white_noise(seed: u64, amp: f64, len: usize, sample_rate: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| amp * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite")
}
