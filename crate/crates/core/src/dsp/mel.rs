use nalgebra::DMatrix;

use super::{stft, AudioBuffer, MagnitudeSpectrogram, MelConfig, SpectrogramConfig};
use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, `n_mels x (n_fft/2 + 1)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    /// Fails if any band receives no FFT bin (too many bands for the FFT size).
    pub fn new(sample_rate: u32, spec: &SpectrogramConfig, mel: &MelConfig) -> Result<Self> {
        let fb = Self::build(sample_rate, spec, mel)?;
        if let Some(row) = (0..fb.n_mels).find(|&r| fb.row(r).iter().sum::<f64>() <= 0.0) {
            return Err(Error::config(format!(
                "mel band {row} of {} covers no FFT bin at n_fft={}",
                fb.n_mels, spec.n_fft
            )));
        }
        Ok(fb)
    }

    /// Like [`MelFilterbank::new`] but silently drops bands with zero weight.
    pub fn new_skipping_empty(
        sample_rate: u32,
        spec: &SpectrogramConfig,
        mel: &MelConfig,
    ) -> Result<Self> {
        let full = Self::build(sample_rate, spec, mel)?;
        let keep: Vec<usize> = (0..full.n_mels)
            .filter(|&r| full.row(r).iter().sum::<f64>() > 0.0)
            .collect();
        let mut weights = Vec::with_capacity(keep.len() * full.n_bins);
        for &r in &keep {
            weights.extend_from_slice(full.row(r));
        }
        Ok(Self {
            n_mels: keep.len(),
            n_bins: full.n_bins,
            weights,
            centers_hz: keep.iter().map(|&r| full.centers_hz[r]).collect(),
        })
    }

    fn build(sample_rate: u32, spec: &SpectrogramConfig, mel: &MelConfig) -> Result<Self> {
        spec.validate()?;
        mel.validate(sample_rate)?;
        let n_bins = spec.n_bins();
        let n_mels = mel.n_mels;
        let lo = hz_to_mel(mel.f_min);
        let hi = hz_to_mel(mel.f_max);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / spec.n_fft as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                weights[m * n_bins + k] = up.min(down).max(0.0);
            }
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
            centers_hz: edges[1..=n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.centers_hz[m]
    }

    /// Applies the filterbank to one magnitude frame.
    pub fn apply_into(&self, frame: &[f64], out: &mut [f64]) {
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = self.row(m).iter().zip(frame).map(|(w, x)| w * x).sum();
        }
    }

    /// Moore-Penrose pseudo-inverse, `n_bins x n_mels`, row-major.
    pub fn pseudo_inverse(&self) -> Result<Vec<f64>> {
        let fb = DMatrix::from_row_slice(self.n_mels, self.n_bins, &self.weights);
        let pinv = fb
            .pseudo_inverse(1e-10)
            .map_err(|e| Error::Degenerate(format!("filterbank pseudo-inverse: {e}")))?;
        let mut out = Vec::with_capacity(self.n_bins * self.n_mels);
        for r in 0..self.n_bins {
            for c in 0..self.n_mels {
                out.push(pinv[(r, c)]);
            }
        }
        Ok(out)
    }
}

/// Natural-log mel features, frame-major, tagged with the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFrames {
    n_mels: usize,
    data: Vec<f64>,
    sample_rate: u32,
    spec: SpectrogramConfig,
    mel: MelConfig,
}

impl MelFrames {
    pub fn from_vec(
        data: Vec<f64>,
        sample_rate: u32,
        spec: SpectrogramConfig,
        mel: MelConfig,
    ) -> Result<Self> {
        let n_mels = mel.n_mels;
        if n_mels == 0 || !data.len().is_multiple_of(n_mels) {
            return Err(Error::shape(
                format!("a multiple of {n_mels} values"),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("mel frames contain non-finite values"));
        }
        Ok(Self {
            n_mels,
            data,
            sample_rate,
            spec,
            mel,
        })
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.n_mels
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn spectrogram_config(&self) -> &SpectrogramConfig {
        &self.spec
    }

    pub fn mel_config(&self) -> &MelConfig {
        &self.mel
    }

    pub fn frame_rate(&self) -> f64 {
        self.spec.frame_rate(self.sample_rate)
    }
}

/// Applies `fb` to every frame of `mag` and takes `ln(max(x, floor))`.
pub(crate) fn log_mel_from_magnitude(
    mag: &MagnitudeSpectrogram,
    fb: &MelFilterbank,
    floor: f64,
) -> Vec<f64> {
    let n_mels = fb.n_mels();
    let mut out = vec![0.0; mag.frames() * n_mels];
    for (frame, dst) in mag.iter_frames().zip(out.chunks_mut(n_mels.max(1))) {
        fb.apply_into(frame, dst);
        for v in dst.iter_mut() {
            *v = v.max(floor).ln();
        }
    }
    out
}

/// `ln(max(filterbank . |STFT|, log_floor))` per frame.
pub fn log_mel(
    audio: &AudioBuffer,
    spec: &SpectrogramConfig,
    mel: &MelConfig,
) -> Result<MelFrames> {
    let fb = MelFilterbank::new(audio.sample_rate(), spec, mel)?;
    let mag = super::magnitude(&stft(audio, spec)?);
    let data = log_mel_from_magnitude(&mag, &fb, mel.log_floor);
    MelFrames::from_vec(data, audio.sample_rate(), *spec, *mel)
}

/// Approximate linear magnitudes from log-mel frames: pseudo-inverse of the
/// filterbank applied to `exp(mel)`, clamped at zero.
pub fn mel_to_linear(mel: &MelFrames, fb: &MelFilterbank) -> Result<MagnitudeSpectrogram> {
    if mel.n_mels() != fb.n_mels() {
        return Err(Error::shape(
            format!("{} mel bands", fb.n_mels()),
            format!("{} mel bands", mel.n_mels()),
        ));
    }
    let pinv = fb.pseudo_inverse()?;
    let n_mels = fb.n_mels();
    let n_bins = fb.n_bins();
    let mut data = Vec::with_capacity(mel.frames() * n_bins);
    let mut lin = vec![0.0; n_mels];
    for t in 0..mel.frames() {
        for (dst, &v) in lin.iter_mut().zip(mel.frame(t)) {
            *dst = v.exp();
        }
        for k in 0..n_bins {
            let row = &pinv[k * n_mels..(k + 1) * n_mels];
            let v: f64 = row.iter().zip(&lin).map(|(a, b)| a * b).sum();
            data.push(v.max(0.0));
        }
    }
    MagnitudeSpectrogram::from_vec(mel.frames(), n_bins, data, mel.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 22050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-8);
        }
        assert!((hz_to_mel(1000.0) - 999.9855).abs() < 1e-3);
    }

    #[test]
    fn default_filterbank_shape_and_shape_invariants() {
        let spec = SpectrogramConfig::default();
        let fb = MelFilterbank::new(44100, &spec, &MelConfig::for_sample_rate(44100)).unwrap();
        assert_eq!((fb.n_mels(), fb.n_bins()), (80, 1025));
        let mut last_peak = None;
        for m in 0..80 {
            let row = fb.row(m);
            assert!(row.iter().all(|&w| w >= 0.0));
            assert!(row.iter().sum::<f64>() > 0.0);
            let peak = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .unwrap();
            if let Some(p) = last_peak {
                assert!(peak > p, "row {m} peak {peak} not after {p}");
            }
            last_peak = Some(peak);
        }
    }

    #[test]
    fn single_band_spans_full_range() {
        let spec = SpectrogramConfig::with_window(64);
        let fb = MelFilterbank::new(8000, &spec, &MelConfig::with_bands(1, 8000)).unwrap();
        let row = fb.row(0);
        assert_eq!(row[0], 0.0);
        assert_eq!(row[32], 0.0);
        assert!(row[1..32].iter().all(|&w| w > 0.0));
        let center = hz_to_mel(4000.0) / 2.0;
        assert!((fb.center_hz(0) - mel_to_hz(center)).abs() < 1e-9);
    }

    #[test]
    fn above_nyquist_rejected() {
        let mut mel = MelConfig::for_sample_rate(16000);
        mel.f_max = 9000.0;
        assert!(MelFilterbank::new(16000, &SpectrogramConfig::default(), &mel).is_err());
    }

    #[test]
    fn empty_bands_rejected_or_skipped() {
        let spec = SpectrogramConfig::with_window(32);
        let mel = MelConfig::with_bands(40, 44100);
        assert!(MelFilterbank::new(44100, &spec, &mel).is_err());
        let fb = MelFilterbank::new_skipping_empty(44100, &spec, &mel).unwrap();
        assert!(fb.n_mels() > 0 && fb.n_mels() < 40);
        assert!((0..fb.n_mels()).all(|m| fb.row(m).iter().sum::<f64>() > 0.0));
    }

    #[test]
    fn silence_hits_the_floor_everywhere() {
        let audio = AudioBuffer::silence(10_000, 22050).unwrap();
        let mel = MelConfig::for_sample_rate(22050);
        let frames = log_mel(&audio, &SpectrogramConfig::default(), &mel).unwrap();
        let floor = mel.log_floor.ln();
        assert!(frames.as_slice().iter().all(|&v| v == floor));
    }

    #[test]
    fn one_second_gives_87_frames_at_86_fps() {
        let audio = AudioBuffer::silence(44100, 44100).unwrap();
        let frames = log_mel(
            &audio,
            &SpectrogramConfig::default(),
            &MelConfig::for_sample_rate(44100),
        )
        .unwrap();
        assert_eq!(frames.frames(), 87);
        assert_eq!(frames.n_mels(), 80);
        assert!((frames.frame_rate() - 86.1328125).abs() < 1e-12);
    }

    #[test]
    fn mel_to_linear_is_nonnegative_and_consistent() {
        let spec = SpectrogramConfig::default();
        let mel_cfg = MelConfig::for_sample_rate(44100);
        let fb = MelFilterbank::new(44100, &spec, &mel_cfg).unwrap();
        let samples: Vec<f64> = (0..8192)
            .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 44100.0).sin())
            .collect();
        let audio = AudioBuffer::new(samples, 44100).unwrap();
        let mel = log_mel(&audio, &spec, &mel_cfg).unwrap();
        let lin = mel_to_linear(&mel, &fb).unwrap();
        assert_eq!((lin.frames(), lin.bins()), (mel.frames(), 1025));
        assert!(lin.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
        // Re-applying the filterbank recovers the mel magnitudes up to the clamp.
        let mut back = vec![0.0; 80];
        fb.apply_into(lin.frame(8), &mut back);
        let peak = mel.frame(8).iter().cloned().fold(f64::MIN, f64::max);
        let m = (0..80).find(|&m| mel.frame(8)[m] == peak).unwrap();
        assert!((back[m].ln() - peak).abs() < 0.05);
    }

    #[test]
    fn mel_to_linear_shape_mismatch() {
        let spec = SpectrogramConfig::with_window(256);
        let fb = MelFilterbank::new(16000, &spec, &MelConfig::with_bands(20, 16000)).unwrap();
        let mel = MelFrames::from_vec(vec![0.0; 30], 16000, spec, MelConfig::with_bands(10, 16000))
            .unwrap();
        assert!(matches!(
            mel_to_linear(&mel, &fb),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
