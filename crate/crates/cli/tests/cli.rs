use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hound::{SampleFormat, WavSpec, WavWriter};
use speccodec::bitstream::{pack, StreamHeader};
use speccodec::testsignal::speech_like;
use speccodec::{AudioBuffer, TokenStream};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speccodec"))
        .args(args)
        .output()
        .expect("spawn speccodec")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_wav(path: &Path, audio: &AudioBuffer) {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).unwrap();
    for &s in audio.samples() {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
            .unwrap();
    }
    w.finalize().unwrap();
}

fn corpus(dir: &Path, clips: u64, seconds: f64, sample_rate: u32) -> PathBuf {
    let corpus = dir.join("corpus");
    std::fs::create_dir_all(corpus.join("nested")).unwrap();
    for seed in 0..clips {
        let sub = if seed % 2 == 0 {
            corpus.clone()
        } else {
            corpus.join("nested")
        };
        write_wav(
            &sub.join(format!("clip{seed:02}.wav")),
            &speech_like(100 + seed, seconds, sample_rate),
        );
    }
    corpus
}

#[test]
fn info_prints_stream_header() {
    let dir = TempDir::new().unwrap();
    let header = StreamHeader::new(44100, 512, 1000, 4);
    let stream = TokenStream::new(header, vec![7; 32]).unwrap();
    let path = dir.path().join("s.spct");
    std::fs::write(&path, pack(&stream).unwrap()).unwrap();

    let out = run(&["info", p(&path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        stdout(&out).lines().next().unwrap(),
        "format=spct version=1 sample_rate=44100 hop_length=512 codebook_size=1000 \
         token_rate=86.13 frames=4 codebooks=8 bits=10 bitrate_bps=6890.6"
    );
}

#[test]
fn eval_identity() {
    let dir = TempDir::new().unwrap();
    let wav = dir.path().join("x.wav");
    write_wav(&wav, &speech_like(3, 1.0, 22050));
    let out = run(&["eval", p(&wav), p(&wav)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "si_sdr_db=100.0"), "{text}");
    assert!(text.lines().any(|l| l == "mel_distance=0.0"), "{text}");
    assert!(!text.contains("bitrate_bps"), "{text}");
}

#[test]
fn missing_file_is_io_error() {
    let out = run(&["info", "/nonexistent/stream.spct"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn garbage_file_is_invalid() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("junk.bin");
    std::fs::write(&path, b"not a codec file at all").unwrap();
    let out = run(&["info", p(&path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mixed_sample_rates_rejected() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus(dir.path(), 2, 1.0, 22050);
    write_wav(&corpus.join("odd.wav"), &speech_like(9, 1.0, 16000));
    let model = dir.path().join("m.scmk");
    let out = run(&["fit", p(&corpus), "--variant", "none", "--out", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("mixed sample rates") && err.contains("odd.wav"),
        "{err}"
    );
    assert!(!model.exists());
}

#[test]
fn unquantized_model_cannot_encode() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus(dir.path(), 4, 2.0, 22050);
    std::fs::write(corpus.join("README.txt"), "ignored").unwrap();
    let model = dir.path().join("m.scmk");
    let out = run(&["fit", p(&corpus), "--variant", "none", "--out", p(&model)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("README.txt"));

    let info = run(&["info", p(&model)]);
    assert!(info.status.success());
    assert!(stdout(&info).contains("variant=none"));

    let wav = corpus.join("clip00.wav");
    let spct = dir.path().join("x.spct");
    let out = run(&["encode", p(&wav), "--model", p(&model), "--out", p(&spct)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unquantized model has no tokens"));
}

#[test]
fn rvq_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus(dir.path(), 4, 2.0, 22050);
    let model = dir.path().join("m.scmk");
    let out = run(&[
        "fit",
        p(&corpus),
        "--variant",
        "rvq",
        "--rvq-stages",
        "3",
        "--rvq-size",
        "16",
        "--seed",
        "5",
        "--out",
        p(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fit_out = stdout(&out);
    assert!(fit_out.contains("codebooks=3"), "{fit_out}");
    assert!(fit_out.contains("codebook_size=16"), "{fit_out}");

    let wav = corpus.join("clip00.wav");
    let spct = dir.path().join("x.spct");
    let out = run(&["encode", p(&wav), "--model", p(&model), "--out", p(&spct)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("token_rate=43.07 Hz"),
        "{}",
        stdout(&out)
    );

    let info = run(&["info", p(&spct)]);
    assert!(
        stdout(&info).contains("codebooks=3 bits=4"),
        "{}",
        stdout(&info)
    );

    let decoded = dir.path().join("y.wav");
    let out = run(&[
        "decode",
        p(&spct),
        "--model",
        p(&model),
        "--out",
        p(&decoded),
        "--gl-iters",
        "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(&["eval", p(&wav), p(&decoded), "--stream", p(&spct)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = speccodec::MetricReport::parse(&stdout(&out)).unwrap();
    assert!(report.mel_distance.is_finite() && report.mel_distance > 0.0);
    assert!(report.si_sdr_db < 0.0);
    let bps = report.bitrate_bps.unwrap();
    assert!((bps - 3.0 * 4.0 * 22050.0 / 512.0).abs() < 1e-6, "{bps}");
}

#[test]
fn fsq_levels_must_tile_embedding() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus(dir.path(), 1, 1.0, 22050);
    let model = dir.path().join("m.scmk");
    let out = run(&[
        "fit",
        p(&corpus),
        "--fsq-levels",
        "5,5,5",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--fsq-levels"));
}

#[test]
fn decode_rejects_mismatched_stream() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus(dir.path(), 4, 2.0, 22050);
    let model = dir.path().join("m.scmk");
    let out = run(&[
        "fit",
        p(&corpus),
        "--variant",
        "rvq",
        "--rvq-stages",
        "2",
        "--rvq-size",
        "8",
        "--out",
        p(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let spct = dir.path().join("wrong.spct");
    let stream = TokenStream::new(StreamHeader::new(44100, 512, 1000, 3), vec![0; 24]).unwrap();
    std::fs::write(&spct, pack(&stream).unwrap()).unwrap();
    let out = run(&[
        "decode",
        p(&spct),
        "--model",
        p(&model),
        "--out",
        p(&dir.path().join("o.wav")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
