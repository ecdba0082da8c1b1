use nalgebra::{DMatrix, SymmetricEigen};

use super::{
    AnalysisProjection, CodecModel, FeatureNormalizer, Quantizer, SynthesisMap, Variant, STD_FLOOR,
};
use crate::dsp::{log_mel, AudioBuffer, MelConfig, SpectrogramConfig};
use crate::error::{Error, Result};
use crate::quantize::{rvq_train, FsqSpec, RvqTrainOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub variant: Variant,
    pub seed: u64,
    pub embedding_dim: usize,
    /// Ridge penalty on the per-frame averaged normal equations of the synthesis fit.
    pub ridge_lambda: f64,
    /// Each embedding component is divided by this many standard deviations
    /// before tanh. At 1, a 3-sigma component lands at |tanh| = 0.995.
    pub tanh_scale_sigmas: f64,
    pub fsq: FsqSpec,
    pub rvq_stages: usize,
    pub rvq_codebook_size: usize,
    pub rvq_pin_zero: bool,
    pub spec: SpectrogramConfig,
    pub n_mels: usize,
    /// Required ratio of training frames to the largest codebook size.
    pub min_frames_per_code: usize,
}

impl FitOptions {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            seed: 0,
            embedding_dim: 32,
            ridge_lambda: 1e-3,
            tanh_scale_sigmas: 1.0,
            fsq: FsqSpec::default(),
            rvq_stages: 8,
            rvq_codebook_size: 1024,
            rvq_pin_zero: true,
            spec: SpectrogramConfig::default(),
            n_mels: 80,
            min_frames_per_code: 10,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn min_frames(&self) -> usize {
        let units = match self.variant {
            Variant::Fsq => (0..self.fsq.num_codebooks())
                .map(|g| self.fsq.codebook_size(g) as usize)
                .max()
                .unwrap_or(0),
            Variant::Rvq => self.rvq_codebook_size,
            Variant::None => self.embedding_dim,
        };
        units * self.min_frames_per_code
    }
}

/// Fits a codec to `corpus`. Clips are processed in the given order, and the
/// result is a deterministic function of the corpus and options.
pub fn fit_codec(corpus: &[AudioBuffer], opts: &FitOptions) -> Result<CodecModel> {
    let first = corpus.first().ok_or_else(|| Error::input("empty corpus"))?;
    let sample_rate = first.sample_rate();
    if let Some(bad) = corpus.iter().position(|a| a.sample_rate() != sample_rate) {
        return Err(Error::input(format!(
            "clip {bad} is {} Hz but clip 0 is {sample_rate} Hz",
            corpus[bad].sample_rate()
        )));
    }
    let d = opts.embedding_dim;
    if d == 0 || d > opts.n_mels {
        return Err(Error::config(format!(
            "embedding width {d} must be in 1..={}",
            opts.n_mels
        )));
    }
    if opts.variant == Variant::Fsq && opts.fsq.dims() != d {
        return Err(Error::config(format!(
            "FSQ covers {} dims but the embedding has {d}",
            opts.fsq.dims()
        )));
    }
    if opts.ridge_lambda.is_nan()
        || opts.ridge_lambda < 0.0
        || opts.tanh_scale_sigmas.is_nan()
        || opts.tanh_scale_sigmas <= 0.0
    {
        return Err(Error::config(
            "ridge_lambda must be >= 0 and tanh_scale_sigmas > 0",
        ));
    }

    let mel_cfg = MelConfig::with_bands(opts.n_mels, sample_rate);
    let n = opts.n_mels;
    let mut frames = Vec::new();
    for clip in corpus.iter().filter(|c| !c.is_empty()) {
        frames.extend_from_slice(log_mel(clip, &opts.spec, &mel_cfg)?.as_slice());
    }
    let count = frames.len() / n;
    if count < opts.min_frames() {
        return Err(Error::input(format!(
            "corpus has {count} frames; the {} variant needs at least {}",
            opts.variant,
            opts.min_frames()
        )));
    }

    let normalizer = fit_normalizer(&frames, n);
    let mut z = vec![0.0; frames.len()];
    for (src, dst) in frames.chunks_exact(n).zip(z.chunks_exact_mut(n)) {
        normalizer.normalize(src, dst);
    }
    let projection = fit_projection(&z, n, d, opts.tanh_scale_sigmas)?;

    let mut emb = vec![0.0; count * d];
    for (src, dst) in z.chunks_exact(n).zip(emb.chunks_exact_mut(d)) {
        projection.embed(src, dst);
    }

    let quantizer = match opts.variant {
        Variant::Fsq => Quantizer::Fsq(opts.fsq.clone()),
        Variant::None => Quantizer::None,
        Variant::Rvq => Quantizer::Rvq(rvq_train(
            &emb,
            d,
            &RvqTrainOptions {
                pin_zero: opts.rvq_pin_zero,
                ..RvqTrainOptions::new(opts.rvq_stages, opts.rvq_codebook_size, opts.seed)
            },
        )?),
    };

    // A placeholder synthesis map lets the model quantize the training embeddings.
    let placeholder = SynthesisMap {
        n_mels: n,
        dim: d,
        weights: vec![0.0; n * d],
        bias: vec![0.0; n],
    };
    let mut model = CodecModel::from_parts(
        sample_rate,
        opts.spec,
        mel_cfg,
        normalizer,
        projection,
        quantizer,
        placeholder,
    )?;
    model.quantize_embeddings(&mut emb)?;
    model.synthesis = fit_synthesis(&emb, d, &z, n, opts.ridge_lambda)?;
    Ok(model)
}

fn fit_normalizer(frames: &[f64], n: usize) -> FeatureNormalizer {
    let count = (frames.len() / n) as f64;
    let mut mean = vec![0.0; n];
    for f in frames.chunks_exact(n) {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for f in frames.chunks_exact(n) {
        for ((v, x), m) in var.iter_mut().zip(f).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .iter()
        .map(|v| (v / count).sqrt().max(STD_FLOOR))
        .collect();
    FeatureNormalizer { mean, std }
}

fn mean_rows(data: &[f64], width: usize) -> Vec<f64> {
    let count = (data.len() / width) as f64;
    let mut mean = vec![0.0; width];
    for row in data.chunks_exact(width) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    mean
}

/// `sum_t (a_t - a_mean)(b_t - b_mean)^T / N` as an `wa x wb` matrix.
fn cross_covariance(a: &[f64], wa: usize, b: &[f64], wb: usize) -> DMatrix<f64> {
    let ma = mean_rows(a, wa);
    let mb = mean_rows(b, wb);
    let count = (a.len() / wa) as f64;
    let mut out = DMatrix::zeros(wa, wb);
    let mut ca = vec![0.0; wa];
    let mut cb = vec![0.0; wb];
    for (ra, rb) in a.chunks_exact(wa).zip(b.chunks_exact(wb)) {
        for (c, (x, m)) in ca.iter_mut().zip(ra.iter().zip(&ma)) {
            *c = x - m;
        }
        for (c, (x, m)) in cb.iter_mut().zip(rb.iter().zip(&mb)) {
            *c = x - m;
        }
        for i in 0..wa {
            for j in 0..wb {
                out[(i, j)] += ca[i] * cb[j];
            }
        }
    }
    out / count
}

/// Top-`d` principal components of the normalized frames.
fn fit_projection(z: &[f64], n: usize, d: usize, sigmas: f64) -> Result<AnalysisProjection> {
    let cov = cross_covariance(z, n, z, n);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let rank = order
        .iter()
        .filter(|&&i| top > 0.0 && eig.eigenvalues[i] > 1e-10 * top)
        .count();
    if rank < d {
        return Err(Error::Degenerate(format!(
            "feature covariance has rank {rank}, fewer than the {d} embedding dimensions"
        )));
    }

    let mean = mean_rows(z, n);
    let mut weights = Vec::with_capacity(d * n);
    let mut bias = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for &i in order.iter().take(d) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Canonical sign: the largest-magnitude entry is positive.
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("n > 0");
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        bias.push(-v.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>());
        scale.push(sigmas * eig.eigenvalues[i].sqrt());
        weights.extend(v);
    }
    Ok(AnalysisProjection {
        dim: d,
        n_mels: n,
        weights,
        bias,
        scale,
    })
}

/// Ridge regression from quantized embeddings to normalized log-mel:
/// `W = (Cov(q) + lambda I)^-1 Cov(q, z)`, bias from the means.
fn fit_synthesis(q: &[f64], d: usize, z: &[f64], n: usize, lambda: f64) -> Result<SynthesisMap> {
    let mut gram = cross_covariance(q, d, q, d);
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let cross = cross_covariance(q, d, z, n);
    let solved = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&cross),
        None => {
            gram.pseudo_inverse(1e-12)
                .map_err(|e| Error::Degenerate(format!("synthesis normal equations: {e}")))?
                * cross
        }
    };
    let mq = mean_rows(q, d);
    let mz = mean_rows(z, n);
    let mut weights = Vec::with_capacity(n * d);
    let mut bias = Vec::with_capacity(n);
    for j in 0..n {
        let row: Vec<f64> = (0..d).map(|i| solved[(i, j)]).collect();
        bias.push(mz[j] - row.iter().zip(&mq).map(|(w, m)| w * m).sum::<f64>());
        weights.extend(row);
    }
    Ok(SynthesisMap {
        n_mels: n,
        dim: d,
        weights,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsignal::speech_like;

    #[test]
    fn silent_corpus_is_rank_deficient() {
        let corpus = vec![AudioBuffer::silence(44100, 44100).unwrap(); 4];
        let opts = FitOptions {
            min_frames_per_code: 1,
            ..FitOptions::new(Variant::None)
        };
        match fit_codec(&corpus, &opts) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("rank 0"), "{msg}"),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_frames() {
        let corpus = vec![speech_like(1, 1.0, 44100)];
        let err = fit_codec(&corpus, &FitOptions::new(Variant::Fsq)).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }

    #[test]
    fn mixed_sample_rates_rejected() {
        let corpus = vec![speech_like(1, 0.5, 44100), speech_like(2, 0.5, 22050)];
        assert!(fit_codec(&corpus, &FitOptions::new(Variant::None)).is_err());
    }

    #[test]
    fn ridge_recovers_exact_affine_map() {
        // z = A q + c exactly; with lambda = 0 the fit must reproduce A and c.
        let d = 3;
        let n = 2;
        let a = [[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]];
        let c = [0.25, -1.0];
        let mut q = Vec::new();
        let mut z = Vec::new();
        for t in 0..50 {
            let row = [
                (t as f64 * 0.37).sin(),
                (t as f64 * 0.11).cos(),
                (t % 7) as f64 / 7.0,
            ];
            q.extend_from_slice(&row);
            for j in 0..n {
                z.push(c[j] + (0..d).map(|i| a[j][i] * row[i]).sum::<f64>());
            }
        }
        let map = fit_synthesis(&q, d, &z, n, 0.0).unwrap();
        for (j, (row, bias)) in a.iter().zip(&c).enumerate() {
            for (w, want) in map.weights[j * d..(j + 1) * d].iter().zip(row) {
                assert!((w - want).abs() < 1e-9);
            }
            assert!((map.bias[j] - bias).abs() < 1e-9);
        }
    }
}
