//! `SCMK` model files.
//!
//! Layout: magic `SCMK`, version byte, then five sections, each prefixed by
//! its byte length as a little-endian `u64`:
//!
//! 1. configs: sample rate, n_fft, win_length, hop_length (`u32`), centered
//!    (`u8`), n_mels (`u32`), f_min, f_max, log_floor (`f64`)
//! 2. normalizer: n (`u32`), n means, n standard deviations
//! 3. projection: dim, n_mels (`u32`), weights, bias, scale
//! 4. quantizer: kind (`u8`: 0 none, 1 FSQ, 2 RVQ), then for FSQ the group
//!    count and each group's level list, for RVQ stages/size/dim and the
//!    codewords
//! 5. synthesis: n_mels, dim (`u32`), weights, bias
//!
//! Integers are little-endian `u32` unless noted; reals are little-endian
//! IEEE-754 `f64`, so a load/save round trip is bit-exact.

use super::{AnalysisProjection, CodecModel, FeatureNormalizer, Quantizer, SynthesisMap};
use crate::dsp::{MelConfig, SpectrogramConfig};
use crate::error::{Error, Result};
use crate::quantize::{FsqSpec, RvqCodebooks};
use crate::wire::{ByteReader, ByteWriter};

pub const MODEL_MAGIC: [u8; 4] = *b"SCMK";
pub const MODEL_VERSION: u8 = 1;

const KIND_NONE: u8 = 0;
const KIND_FSQ: u8 = 1;
const KIND_RVQ: u8 = 2;

fn usize_u32(v: usize) -> u32 {
    u32::try_from(v).expect("model dimension fits in u32")
}

pub fn save_model(model: &CodecModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(&MODEL_MAGIC);
    w.u8(MODEL_VERSION);

    let mut s = ByteWriter::new();
    s.u32(model.sample_rate);
    s.u32(usize_u32(model.spec.n_fft));
    s.u32(usize_u32(model.spec.win_length));
    s.u32(usize_u32(model.spec.hop_length));
    s.u8(model.spec.centered as u8);
    s.u32(usize_u32(model.mel.n_mels));
    s.f64(model.mel.f_min);
    s.f64(model.mel.f_max);
    s.f64(model.mel.log_floor);
    w.section(s);

    let mut s = ByteWriter::new();
    s.u32(usize_u32(model.normalizer.mean.len()));
    s.f64s(&model.normalizer.mean);
    s.f64s(&model.normalizer.std);
    w.section(s);

    let p = &model.projection;
    let mut s = ByteWriter::new();
    s.u32(usize_u32(p.dim));
    s.u32(usize_u32(p.n_mels));
    s.f64s(&p.weights);
    s.f64s(&p.bias);
    s.f64s(&p.scale);
    w.section(s);

    let mut s = ByteWriter::new();
    match &model.quantizer {
        Quantizer::None => s.u8(KIND_NONE),
        Quantizer::Fsq(spec) => {
            s.u8(KIND_FSQ);
            s.u32(usize_u32(spec.num_codebooks()));
            for g in spec.groups() {
                s.u32(usize_u32(g.len()));
                for &l in g {
                    s.u32(l);
                }
            }
        }
        Quantizer::Rvq(cb) => {
            s.u8(KIND_RVQ);
            s.u32(usize_u32(cb.num_stages()));
            s.u32(usize_u32(cb.codebook_size()));
            s.u32(usize_u32(cb.dim()));
            for st in 0..cb.num_stages() {
                s.f64s(cb.stage(st));
            }
        }
    }
    w.section(s);

    let m = &model.synthesis;
    let mut s = ByteWriter::new();
    s.u32(usize_u32(m.n_mels));
    s.u32(usize_u32(m.dim));
    s.f64s(&m.weights);
    s.f64s(&m.bias);
    w.section(s);

    w.into_inner()
}

fn count(r: &mut ByteReader<'_>, what: &str, max: usize) -> Result<usize> {
    let at = r.offset();
    let v = r.u32()? as usize;
    if v > max {
        return Err(Error::Corrupt {
            offset: at,
            reason: format!("{what} = {v} exceeds limit {max}"),
        });
    }
    Ok(v)
}

fn product(r: &ByteReader<'_>, a: usize, b: usize) -> Result<usize> {
    a.checked_mul(b)
        .ok_or_else(|| r.corrupt("matrix size overflows"))
}

const MAX_DIM: usize = 1 << 16;

pub fn load_model(bytes: &[u8]) -> Result<CodecModel> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(bytes.len().min(4))?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: MODEL_MAGIC,
            found: magic.to_vec(),
        });
    }
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }

    let mut s = r.section()?;
    let sample_rate = s.u32()?;
    let spec = SpectrogramConfig {
        n_fft: s.u32()? as usize,
        win_length: s.u32()? as usize,
        hop_length: s.u32()? as usize,
        centered: match s.u8()? {
            0 => false,
            1 => true,
            other => return Err(s.corrupt(format!("centered flag {other}"))),
        },
    };
    let mel = MelConfig {
        n_mels: s.u32()? as usize,
        f_min: s.f64()?,
        f_max: s.f64()?,
        log_floor: s.f64()?,
    };
    let config_end = s.offset();
    s.finish()?;
    let corrupt_at = |offset: usize| {
        move |e: Error| Error::Corrupt {
            offset,
            reason: e.to_string(),
        }
    };
    spec.validate().map_err(corrupt_at(config_end))?;
    mel.validate(sample_rate).map_err(corrupt_at(config_end))?;

    let mut s = r.section()?;
    let n = count(&mut s, "normalizer width", MAX_DIM)?;
    let normalizer = FeatureNormalizer {
        mean: s.f64s(n)?,
        std: s.f64s(n)?,
    };
    s.finish()?;

    let mut s = r.section()?;
    let dim = count(&mut s, "embedding width", MAX_DIM)?;
    let n_mels = count(&mut s, "projection width", MAX_DIM)?;
    let projection = AnalysisProjection {
        dim,
        n_mels,
        weights: s.f64s(product(&s, dim, n_mels)?)?,
        bias: s.f64s(dim)?,
        scale: s.f64s(dim)?,
    };
    s.finish()?;

    let mut s = r.section()?;
    let kind_at = s.offset();
    let quantizer = match s.u8()? {
        KIND_NONE => Quantizer::None,
        KIND_FSQ => {
            let groups = count(&mut s, "FSQ group count", MAX_DIM)?;
            let mut levels = Vec::with_capacity(groups);
            for _ in 0..groups {
                let len = count(&mut s, "FSQ group width", MAX_DIM)?;
                levels.push((0..len).map(|_| s.u32()).collect::<Result<Vec<_>>>()?);
            }
            Quantizer::Fsq(FsqSpec::new(levels).map_err(corrupt_at(s.offset()))?)
        }
        KIND_RVQ => {
            let stages = count(&mut s, "RVQ stages", MAX_DIM)?;
            let size = count(&mut s, "RVQ codebook size", MAX_DIM)?;
            let d = count(&mut s, "RVQ width", MAX_DIM)?;
            let per_stage = product(&s, size, d)?;
            let data = (0..stages)
                .map(|_| s.f64s(per_stage))
                .collect::<Result<Vec<_>>>()?;
            Quantizer::Rvq(RvqCodebooks::new(data, size, d).map_err(corrupt_at(s.offset()))?)
        }
        other => {
            return Err(Error::Corrupt {
                offset: kind_at,
                reason: format!("unknown quantizer kind {other}"),
            })
        }
    };
    s.finish()?;

    let mut s = r.section()?;
    let syn_mels = count(&mut s, "synthesis rows", MAX_DIM)?;
    let syn_dim = count(&mut s, "synthesis width", MAX_DIM)?;
    let synthesis = SynthesisMap {
        n_mels: syn_mels,
        dim: syn_dim,
        weights: s.f64s(product(&s, syn_mels, syn_dim)?)?,
        bias: s.f64s(syn_mels)?,
    };
    s.finish()?;
    let end = r.offset();
    r.finish()?;

    CodecModel::from_parts(
        sample_rate,
        spec,
        mel,
        normalizer,
        projection,
        quantizer,
        synthesis,
    )
    .map_err(corrupt_at(end))
}
