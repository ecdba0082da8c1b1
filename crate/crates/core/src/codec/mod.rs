//! The spectral codec: log-mel frames -> normalize -> linear projection ->
//! tanh -> FSQ or RVQ tokens, and back through an affine synthesis map and
//! Griffin-Lim.
//!
//! The analysis and synthesis maps are fitted in closed form (PCA and ridge
//! regression), so every quantizer-facing shape is the same as a neural
//! encoder/decoder would see: a 32-wide tanh-bounded embedding per frame and
//! eight codebooks per frame.

mod fit;
mod format;

pub use fit::{fit_codec, FitOptions};
pub use format::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};

use crate::bitstream::{StreamHeader, TokenStream, VERSION as STREAM_VERSION};
use crate::dsp::{
    griffin_lim, log_mel, mel_to_linear, AudioBuffer, MelConfig, MelFilterbank, MelFrames,
    SpectrogramConfig,
};
use crate::error::{Error, Result};
use crate::quantize::{fsq_dequantize, fsq_quantize, rvq_encode, FsqSpec, RvqCodebooks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Fsq,
    Rvq,
    /// No quantizer: the continuous embedding goes straight to synthesis.
    None,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fsq" => Ok(Variant::Fsq),
            "rvq" => Ok(Variant::Rvq),
            "none" => Ok(Variant::None),
            other => Err(Error::config(format!(
                "unknown variant {other:?} (fsq, rvq, none)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Fsq => "fsq",
            Variant::Rvq => "rvq",
            Variant::None => "none",
        })
    }
}

/// Per-band mean and standard deviation of log-mel features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-6;

impl FeatureNormalizer {
    fn normalize(&self, frame: &[f64], out: &mut [f64]) {
        for ((o, x), (m, s)) in out
            .iter_mut()
            .zip(frame)
            .zip(self.mean.iter().zip(&self.std))
        {
            *o = (x - m) / s;
        }
    }

    fn denormalize(&self, z: &[f64], out: &mut [f64]) {
        for ((o, x), (m, s)) in out.iter_mut().zip(z).zip(self.mean.iter().zip(&self.std)) {
            *o = x * s + m;
        }
    }
}

/// `tanh((W z + b) / scale)`, with `W` of shape `dim x n_mels`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisProjection {
    pub dim: usize,
    pub n_mels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AnalysisProjection {
    fn embed(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weights[i * self.n_mels..(i + 1) * self.n_mels];
            let pre: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.bias[i];
            *o = (pre / self.scale[i]).tanh();
        }
    }
}

/// Affine map from quantized embedding to normalized log-mel, `n_mels x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisMap {
    pub n_mels: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SynthesisMap {
    fn apply(&self, q: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weights[i * self.dim..(i + 1) * self.dim];
            *o = row.iter().zip(q).map(|(w, x)| w * x).sum::<f64>() + self.bias[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    Fsq(FsqSpec),
    Rvq(RvqCodebooks),
    None,
}

impl Quantizer {
    pub fn variant(&self) -> Variant {
        match self {
            Quantizer::Fsq(_) => Variant::Fsq,
            Quantizer::Rvq(_) => Variant::Rvq,
            Quantizer::None => Variant::None,
        }
    }
}

/// A fitted codec. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecModel {
    pub(crate) sample_rate: u32,
    pub(crate) spec: SpectrogramConfig,
    pub(crate) mel: MelConfig,
    pub(crate) normalizer: FeatureNormalizer,
    pub(crate) projection: AnalysisProjection,
    pub(crate) quantizer: Quantizer,
    pub(crate) synthesis: SynthesisMap,
}

fn bits_for(size: u32) -> u8 {
    (32 - (size.max(2) - 1).leading_zeros()) as u8
}

impl CodecModel {
    /// Assembles a model from parts, checking that all shapes agree.
    pub fn from_parts(
        sample_rate: u32,
        spec: SpectrogramConfig,
        mel: MelConfig,
        normalizer: FeatureNormalizer,
        projection: AnalysisProjection,
        quantizer: Quantizer,
        synthesis: SynthesisMap,
    ) -> Result<Self> {
        spec.validate()?;
        mel.validate(sample_rate)?;
        let n = mel.n_mels;
        let d = projection.dim;
        let shape_ok = normalizer.mean.len() == n
            && normalizer.std.len() == n
            && projection.n_mels == n
            && projection.weights.len() == d * n
            && projection.bias.len() == d
            && projection.scale.len() == d
            && synthesis.n_mels == n
            && synthesis.dim == d
            && synthesis.weights.len() == n * d
            && synthesis.bias.len() == n;
        if !shape_ok {
            return Err(Error::shape(
                format!("consistent shapes for {n} mel bands and embedding width {d}"),
                "mismatched model parts",
            ));
        }
        if normalizer.std.iter().any(|&s| s.is_nan() || s < STD_FLOOR) {
            return Err(Error::input(
                "normalizer standard deviations must be at least 1e-6",
            ));
        }
        if projection.scale.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::input("projection scales must be positive"));
        }
        match &quantizer {
            Quantizer::Fsq(fsq) => {
                if fsq.dims() != d {
                    return Err(Error::shape(format!("FSQ over {d} dims"), fsq.dims()));
                }
                let size = fsq
                    .uniform_codebook_size()
                    .ok_or_else(|| Error::config("all FSQ groups must share one codebook size"))?;
                if bits_for(size) > crate::bitstream::MAX_BITS_PER_INDEX {
                    return Err(Error::config(format!(
                        "FSQ codebook size {size} exceeds 16 bits"
                    )));
                }
            }
            Quantizer::Rvq(cb) => {
                if cb.dim() != d {
                    return Err(Error::shape(
                        format!("RVQ codewords of width {d}"),
                        cb.dim(),
                    ));
                }
                if bits_for(cb.codebook_size() as u32) > crate::bitstream::MAX_BITS_PER_INDEX {
                    return Err(Error::config("RVQ codebook size exceeds 16 bits"));
                }
            }
            Quantizer::None => {}
        }
        let all_finite = normalizer
            .mean
            .iter()
            .chain(&projection.weights)
            .chain(&projection.bias)
            .chain(&synthesis.weights)
            .chain(&synthesis.bias)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Self {
            sample_rate,
            spec,
            mel,
            normalizer,
            projection,
            quantizer,
            synthesis,
        })
    }

    pub fn variant(&self) -> Variant {
        self.quantizer.variant()
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

    pub fn embedding_dim(&self) -> usize {
        self.projection.dim
    }

    pub fn normalizer(&self) -> &FeatureNormalizer {
        &self.normalizer
    }

    pub fn projection(&self) -> &AnalysisProjection {
        &self.projection
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn synthesis(&self) -> &SynthesisMap {
        &self.synthesis
    }

    /// Codebooks per frame and codes per codebook; `None` for the unquantized variant.
    pub fn codebook_layout(&self) -> Option<(usize, u32)> {
        match &self.quantizer {
            Quantizer::Fsq(f) => Some((f.num_codebooks(), f.uniform_codebook_size()?)),
            Quantizer::Rvq(cb) => Some((cb.num_stages(), cb.codebook_size() as u32)),
            Quantizer::None => None,
        }
    }

    /// Template header for streams produced by this model.
    pub fn stream_header(&self, num_frames: u32) -> Result<StreamHeader> {
        let (codebooks, size) = self.codebook_layout().ok_or(Error::NoTokens)?;
        Ok(StreamHeader {
            version: STREAM_VERSION,
            sample_rate: self.sample_rate,
            hop_length: self.spec.hop_length as u32,
            num_codebooks: codebooks as u16,
            bits_per_index: bits_for(size),
            codebook_size: size,
            num_frames,
        })
    }

    fn check_mel(&self, mel: &MelFrames) -> Result<()> {
        if mel.sample_rate() != self.sample_rate
            || mel.spectrogram_config() != &self.spec
            || mel.mel_config() != &self.mel
        {
            return Err(Error::config(format!(
                "mel frames ({} Hz, {:?}) were not produced with the model configuration ({} Hz, {:?})",
                mel.sample_rate(),
                mel.spectrogram_config(),
                self.sample_rate,
                self.spec
            )));
        }
        Ok(())
    }

    /// tanh-bounded embedding of every frame, `frames x dim`.
    pub fn embed(&self, mel: &MelFrames) -> Result<Vec<f64>> {
        self.check_mel(mel)?;
        let d = self.embedding_dim();
        let mut z = vec![0.0; self.mel.n_mels];
        let mut out = vec![0.0; mel.frames() * d];
        for (t, dst) in out.chunks_exact_mut(d).enumerate() {
            self.normalizer.normalize(mel.frame(t), &mut z);
            self.projection.embed(&z, dst);
        }
        Ok(out)
    }

    /// Log-mel frames from per-frame quantized (or raw) embeddings.
    pub fn synthesize(&self, embeddings: &[f64]) -> Result<MelFrames> {
        let d = self.embedding_dim();
        if !embeddings.len().is_multiple_of(d) {
            return Err(Error::shape(
                format!("a multiple of {d} values"),
                embeddings.len(),
            ));
        }
        let n = self.mel.n_mels;
        let mut z = vec![0.0; n];
        let mut data = vec![0.0; embeddings.len() / d * n];
        for (q, dst) in embeddings.chunks_exact(d).zip(data.chunks_exact_mut(n)) {
            self.synthesis.apply(q, &mut z);
            self.normalizer.denormalize(&z, dst);
        }
        MelFrames::from_vec(data, self.sample_rate, self.spec, self.mel)
    }

    /// Quantizes each frame's embedding in place and returns its tokens.
    fn quantize_embeddings(&self, emb: &mut [f64]) -> Result<Vec<u32>> {
        let d = self.embedding_dim();
        let mut tokens = Vec::new();
        for v in emb.chunks_exact_mut(d) {
            match &self.quantizer {
                Quantizer::Fsq(spec) => {
                    let q = fsq_quantize(v, spec)?;
                    v.copy_from_slice(&q.values);
                    tokens.extend(q.indices);
                }
                Quantizer::Rvq(cb) => {
                    let idx = rvq_encode(v, cb)?;
                    v.copy_from_slice(&cb.decode_prefix(&idx)?);
                    tokens.extend(idx);
                }
                Quantizer::None => {}
            }
        }
        Ok(tokens)
    }

    pub fn encode_frames(&self, mel: &MelFrames) -> Result<TokenStream> {
        if self.variant() == Variant::None {
            return Err(Error::NoTokens);
        }
        let mut emb = self.embed(mel)?;
        let tokens = self.quantize_embeddings(&mut emb)?;
        let frames = u32::try_from(mel.frames()).map_err(|_| Error::input("too many frames"))?;
        TokenStream::new(self.stream_header(frames)?, tokens)
    }

    /// Quantized embeddings for a token stream, `frames x dim`.
    pub fn dequantize(&self, tokens: &TokenStream) -> Result<Vec<f64>> {
        let expected = self.stream_header(tokens.header().num_frames)?;
        if tokens.header() != &expected {
            return Err(Error::config(format!(
                "stream header {:?} does not match model {:?}",
                tokens.header(),
                expected
            )));
        }
        let mut out = Vec::with_capacity(tokens.num_frames() * self.embedding_dim());
        for t in 0..tokens.num_frames() {
            let frame = tokens.frame(t);
            let invalid = |codebook: usize, size: u32| Error::InvalidToken {
                frame: t,
                codebook,
                token: frame[codebook],
                codebook_size: size,
            };
            match &self.quantizer {
                Quantizer::Fsq(spec) => {
                    for (g, &tok) in frame.iter().enumerate() {
                        if tok >= spec.codebook_size(g) {
                            return Err(invalid(g, spec.codebook_size(g)));
                        }
                    }
                    out.extend(fsq_dequantize(frame, spec)?);
                }
                Quantizer::Rvq(cb) => {
                    if let Some(s) = frame.iter().position(|&i| i as usize >= cb.codebook_size()) {
                        return Err(invalid(s, cb.codebook_size() as u32));
                    }
                    out.extend(cb.decode_prefix(frame)?);
                }
                Quantizer::None => return Err(Error::NoTokens),
            }
        }
        Ok(out)
    }

    pub fn decode_frames(&self, tokens: &TokenStream) -> Result<MelFrames> {
        self.synthesize(&self.dequantize(tokens)?)
    }

    /// Encode and decode without materializing tokens. Works for every
    /// variant, including the unquantized one.
    pub fn reconstruct_mel(&self, mel: &MelFrames) -> Result<MelFrames> {
        let mut emb = self.embed(mel)?;
        self.quantize_embeddings(&mut emb)?;
        self.synthesize(&emb)
    }

    pub fn log_mel(&self, audio: &AudioBuffer) -> Result<MelFrames> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::config(format!(
                "audio is {} Hz but the model expects {} Hz",
                audio.sample_rate(),
                self.sample_rate
            )));
        }
        log_mel(audio, &self.spec, &self.mel)
    }

    pub fn encode_audio(&self, audio: &AudioBuffer) -> Result<TokenStream> {
        self.encode_frames(&self.log_mel(audio)?)
    }

    /// Waveform from log-mel frames via filterbank pseudo-inverse and Griffin-Lim.
    pub fn vocode(&self, mel: &MelFrames, gl_iterations: usize, seed: u64) -> Result<AudioBuffer> {
        self.check_mel(mel)?;
        let fb = MelFilterbank::new(self.sample_rate, &self.spec, &self.mel)?;
        let mag = mel_to_linear(mel, &fb)?;
        Ok(griffin_lim(&mag, &self.spec, gl_iterations, seed)?.audio)
    }

    pub fn decode_audio(
        &self,
        tokens: &TokenStream,
        gl_iterations: usize,
        seed: u64,
    ) -> Result<AudioBuffer> {
        self.vocode(&self.decode_frames(tokens)?, gl_iterations, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_for_codebook_sizes() {
        assert_eq!(bits_for(1000), 10);
        assert_eq!(bits_for(1024), 10);
        assert_eq!(bits_for(1025), 11);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(1), 1);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("FSQ".parse::<Variant>().unwrap(), Variant::Fsq);
        assert_eq!("none".parse::<Variant>().unwrap(), Variant::None);
        assert!("pq".parse::<Variant>().is_err());
    }
}
