use super::kmeans::{kmeans, KMeansOptions};
use super::nearest_row;
use crate::error::{Error, Result};

/// Stage codebooks for residual vector quantization, each `size x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqCodebooks {
    stages: Vec<Vec<f64>>,
    size: usize,
    dim: usize,
}

impl RvqCodebooks {
    pub fn new(stages: Vec<Vec<f64>>, size: usize, dim: usize) -> Result<Self> {
        if stages.is_empty() || size == 0 || dim == 0 {
            return Err(Error::config(
                "RVQ needs at least one stage, one code and one dimension",
            ));
        }
        for (s, cb) in stages.iter().enumerate() {
            if cb.len() != size * dim {
                return Err(Error::shape(
                    format!("stage {s} with {size}x{dim} values"),
                    cb.len(),
                ));
            }
            if cb.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("stage {s} has non-finite codewords")));
            }
        }
        Ok(Self { stages, size, dim })
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stage(&self, s: usize) -> &[f64] {
        &self.stages[s]
    }

    pub fn codeword(&self, stage: usize, index: usize) -> &[f64] {
        &self.stages[stage][index * self.dim..(index + 1) * self.dim]
    }

    /// Sum of the selected codewords of the first `indices.len()` stages.
    pub fn decode_prefix(&self, indices: &[u32]) -> Result<Vec<f64>> {
        if indices.len() > self.num_stages() {
            return Err(Error::shape(
                format!("at most {} indices", self.num_stages()),
                indices.len(),
            ));
        }
        let mut out = vec![0.0; self.dim];
        for (s, &i) in indices.iter().enumerate() {
            if i as usize >= self.size {
                return Err(Error::OutOfRange {
                    what: format!("RVQ stage {s} index"),
                    value: i as u64,
                    limit: self.size as u64,
                });
            }
            for (o, c) in out.iter_mut().zip(self.codeword(s, i as usize)) {
                *o += c;
            }
        }
        Ok(out)
    }
}

/// Greedy stage-by-stage nearest-codeword encoding of `v`.
pub fn rvq_encode(v: &[f64], cb: &RvqCodebooks) -> Result<Vec<u32>> {
    if v.len() != cb.dim() {
        return Err(Error::shape(format!("{} dims", cb.dim()), v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("RVQ input is not finite"));
    }
    let mut residual = v.to_vec();
    let mut indices = Vec::with_capacity(cb.num_stages());
    for s in 0..cb.num_stages() {
        let (i, _) = nearest_row(&residual, cb.stage(s), cb.dim());
        for (r, c) in residual.iter_mut().zip(cb.codeword(s, i)) {
            *r -= c;
        }
        indices.push(i as u32);
    }
    Ok(indices)
}

pub fn rvq_decode(indices: &[u32], cb: &RvqCodebooks) -> Result<Vec<f64>> {
    if indices.len() != cb.num_stages() {
        return Err(Error::shape(
            format!("{} indices", cb.num_stages()),
            indices.len(),
        ));
    }
    cb.decode_prefix(indices)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvqTrainOptions {
    pub stages: usize,
    pub codebook_size: usize,
    pub seed: u64,
    /// Keep the zero vector as codeword 0 of every stage, so adding a stage
    /// can never increase the reconstruction error.
    pub pin_zero: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl RvqTrainOptions {
    pub fn new(stages: usize, codebook_size: usize, seed: u64) -> Self {
        Self {
            stages,
            codebook_size,
            seed,
            pin_zero: true,
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

/// Trains stage codebooks by running k-means on the residuals left by the
/// preceding stages. `frames` is `n x dim`, row-major.
pub fn rvq_train(frames: &[f64], dim: usize, opts: &RvqTrainOptions) -> Result<RvqCodebooks> {
    if dim == 0 || !frames.len().is_multiple_of(dim) {
        return Err(Error::shape(format!("rows of width {dim}"), frames.len()));
    }
    let n = frames.len() / dim;
    if n < opts.codebook_size {
        return Err(Error::input(format!(
            "{n} training frames is fewer than codebook size {}",
            opts.codebook_size
        )));
    }
    if opts.stages == 0 {
        return Err(Error::config("RVQ needs at least one stage"));
    }
    let mut residual = frames.to_vec();
    let mut stages = Vec::with_capacity(opts.stages);
    for s in 0..opts.stages {
        let km = kmeans(
            &residual,
            dim,
            &KMeansOptions {
                k: opts.codebook_size,
                max_iterations: opts.max_iterations,
                tolerance: opts.tolerance,
                seed: opts.seed.wrapping_add(s as u64),
                pin_zero: opts.pin_zero,
            },
        )?;
        for (r, &c) in residual.chunks_exact_mut(dim).zip(&km.assignments) {
            let c = c as usize;
            for (x, w) in r.iter_mut().zip(&km.centroids[c * dim..(c + 1) * dim]) {
                *x -= w;
            }
        }
        stages.push(km.centroids);
    }
    RvqCodebooks::new(stages, opts.codebook_size, dim)
}
