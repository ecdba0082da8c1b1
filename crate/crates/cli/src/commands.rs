use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use speccodec::bitstream::{self, bitrate};
use speccodec::codec::{fit_codec, load_model, save_model, FitOptions, Quantizer};
use speccodec::metrics::evaluate;
use speccodec::quantize::FsqSpec;
use speccodec::{AudioBuffer, CodecModel, TokenStream, Variant};
use walkdir::WalkDir;

use crate::{wav, CliError};

pub struct FitArgs {
    pub corpus_dir: PathBuf,
    pub variant: Variant,
    pub seed: u64,
    pub out: PathBuf,
    pub ridge_lambda: Option<f64>,
    pub tanh_sigmas: Option<f64>,
    pub rvq_stages: Option<usize>,
    pub rvq_size: Option<usize>,
    pub fsq_levels: Option<Vec<u32>>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_model_file(path: &Path) -> Result<CodecModel, CliError> {
    load_model(&read_bytes(path)?)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn load_stream_file(path: &Path) -> Result<TokenStream, CliError> {
    bitstream::unpack(&read_bytes(path)?)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Every readable WAV under `dir`, in sorted path order.
fn read_corpus(dir: &Path) -> Result<Vec<(PathBuf, AudioBuffer)>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::io(format!("{}: not a directory", dir.display())));
    }
    let mut paths = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::io(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        if is_wav(entry.path()) {
            paths.push(entry.into_path());
        } else {
            eprintln!(
                "warning: skipping {} (not a WAV file)",
                entry.path().display()
            );
        }
    }
    paths.sort();
    let mut clips = Vec::with_capacity(paths.len());
    for path in paths {
        match wav::read(&path) {
            Ok(audio) => clips.push((path, audio)),
            Err(CliError::Invalid(msg)) => eprintln!("warning: skipping {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(clips)
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let clips = read_corpus(&args.corpus_dir)?;
    let Some((_, first)) = clips.first() else {
        return Err(CliError::invalid(format!(
            "{}: no readable WAV files",
            args.corpus_dir.display()
        )));
    };
    let rate = first.sample_rate();
    let offenders: Vec<String> = clips
        .iter()
        .filter(|(_, a)| a.sample_rate() != rate)
        .map(|(p, a)| format!("{} ({} Hz)", p.display(), a.sample_rate()))
        .collect();
    if !offenders.is_empty() {
        return Err(CliError::invalid(format!(
            "mixed sample rates; expected {rate} Hz like {}, but found: {}",
            clips[0].0.display(),
            offenders.join(", ")
        )));
    }

    let mut opts = FitOptions::new(args.variant).with_seed(args.seed);
    if let Some(l) = args.ridge_lambda {
        opts.ridge_lambda = l;
    }
    if let Some(s) = args.tanh_sigmas {
        opts.tanh_scale_sigmas = s;
    }
    if let Some(s) = args.rvq_stages {
        opts.rvq_stages = s;
    }
    if let Some(k) = args.rvq_size {
        opts.rvq_codebook_size = k;
    }
    if let Some(levels) = args.fsq_levels {
        if levels.is_empty() || !opts.embedding_dim.is_multiple_of(levels.len()) {
            return Err(CliError::invalid(format!(
                "--fsq-levels group of {} dims does not tile the {}-dim embedding",
                levels.len(),
                opts.embedding_dim
            )));
        }
        opts.fsq = FsqSpec::uniform(&levels, opts.embedding_dim / levels.len())?;
    }

    let audio: Vec<AudioBuffer> = clips.into_iter().map(|(_, a)| a).collect();
    let model = fit_codec(&audio, &opts)?;
    write_bytes(&args.out, &save_model(&model))?;

    let mut frames = 0;
    let mut sum_abs = 0.0;
    let mut saturated = 0usize;
    let mut used: Vec<BTreeSet<u32>> = Vec::new();
    for clip in audio.iter().filter(|a| !a.is_empty()) {
        let mel = model.log_mel(clip)?;
        frames += mel.frames();
        let emb = model.embed(&mel)?;
        sum_abs += emb.iter().map(|v| v.abs()).sum::<f64>();
        saturated += emb.iter().filter(|v| v.abs() > 0.995).count();
        if model.variant() != Variant::None {
            let tokens = model.encode_frames(&mel)?;
            used.resize(tokens.num_codebooks(), BTreeSet::new());
            for t in 0..tokens.num_frames() {
                for (set, &tok) in used.iter_mut().zip(tokens.frame(t)) {
                    set.insert(tok);
                }
            }
        }
    }
    let values = (frames * model.embedding_dim()).max(1) as f64;
    println!("model={}", args.out.display());
    println!("variant={}", model.variant());
    println!("sample_rate={}", model.sample_rate());
    println!("frames={frames}");
    println!("embedding_dim={}", model.embedding_dim());
    println!("embedding_mean_abs={:.4}", sum_abs / values);
    println!(
        "embedding_saturated_fraction={:.6}",
        saturated as f64 / values
    );
    if let Some((codebooks, size)) = model.codebook_layout() {
        let usage: Vec<String> = used.iter().map(|s| s.len().to_string()).collect();
        println!("codebooks={codebooks}");
        println!("codebook_size={size}");
        println!("codes_used={}", usage.join(","));
    }
    Ok(())
}

pub fn encode(input: &Path, model: &Path, out: &Path) -> Result<(), CliError> {
    let model = load_model_file(model)?;
    let audio = wav::read(input)?;
    let stream = model.encode_audio(&audio)?;
    write_bytes(out, &bitstream::pack(&stream)?)?;
    let h = stream.header();
    println!("frames={}", h.num_frames);
    println!("token_rate={:.2} Hz", h.token_rate());
    println!("bitrate={:.1} bps", bitrate(h));
    Ok(())
}

pub fn decode(
    input: &Path,
    model: &Path,
    out: &Path,
    gl_iters: usize,
    seed: u64,
) -> Result<(), CliError> {
    let model = load_model_file(model)?;
    let stream = load_stream_file(input)?;
    let audio = model.decode_audio(&stream, gl_iters, seed)?;
    wav::write(out, &audio)?;
    println!("samples={}", audio.len());
    println!("sample_rate={}", audio.sample_rate());
    Ok(())
}

pub fn eval(reference: &Path, estimate: &Path, stream: Option<&Path>) -> Result<(), CliError> {
    let reference = wav::read(reference)?;
    let estimate = wav::read(estimate)?;
    // Decoded audio ends on the last full hop, so compare the common prefix.
    let len = reference.len().min(estimate.len());
    if len == 0 {
        return Err(CliError::invalid("cannot evaluate empty audio"));
    }
    let header = stream.map(load_stream_file).transpose()?;
    let report = evaluate(
        &reference.truncated(len),
        &estimate.truncated(len),
        header.as_ref().map(|s| s.header()),
    )?;
    print!("{report}");
    Ok(())
}

pub fn info(input: &Path) -> Result<(), CliError> {
    let bytes = read_bytes(input)?;
    if bytes.starts_with(&bitstream::MAGIC) {
        let stream = bitstream::unpack(&bytes)?;
        let h = stream.header();
        println!(
            "format=spct version={} sample_rate={} hop_length={} codebook_size={} token_rate={:.2} frames={} codebooks={} bits={} bitrate_bps={:.1}",
            h.version,
            h.sample_rate,
            h.hop_length,
            h.codebook_size,
            h.token_rate(),
            h.num_frames,
            h.num_codebooks,
            h.bits_per_index,
            bitrate(h)
        );
        println!("duration_s={:.3}", h.duration_secs());
        return Ok(());
    }
    if bytes.starts_with(&speccodec::codec::MODEL_MAGIC) {
        let model = load_model(&bytes)?;
        let spec = model.spectrogram_config();
        let mel = model.mel_config();
        println!("format=scmk version={}", speccodec::codec::MODEL_VERSION);
        println!("variant={}", model.variant());
        println!("sample_rate={}", model.sample_rate());
        println!(
            "n_fft={} win_length={} hop_length={} centered={}",
            spec.n_fft, spec.win_length, spec.hop_length, spec.centered
        );
        println!(
            "n_mels={} f_min={} f_max={} log_floor={:e}",
            mel.n_mels, mel.f_min, mel.f_max, mel.log_floor
        );
        println!("embedding_dim={}", model.embedding_dim());
        match model.quantizer() {
            Quantizer::Fsq(spec) => {
                let groups: Vec<String> = spec
                    .groups()
                    .iter()
                    .map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
                    .collect();
                println!("fsq_groups={}", groups.join(" "));
            }
            Quantizer::Rvq(cb) => {
                println!(
                    "rvq_stages={} rvq_size={}",
                    cb.num_stages(),
                    cb.codebook_size()
                );
            }
            Quantizer::None => {}
        }
        if let Ok(h) = model.stream_header(0) {
            println!(
                "codebooks={} bits={} bitrate_bps={:.1}",
                h.num_codebooks,
                h.bits_per_index,
                bitrate(&h)
            );
        }
        return Ok(());
    }
    Err(CliError::invalid(format!(
        "{}: not a .spct stream or SCMK model",
        input.display()
    )))
}
