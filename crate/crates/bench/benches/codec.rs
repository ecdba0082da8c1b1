use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use speccodec::bitstream::{pack, unpack, StreamHeader, TokenStream};
use speccodec::dsp::{griffin_lim, log_mel, magnitude, stft};
use speccodec::quantize::{fsq_quantize, rvq_encode, rvq_train, FsqSpec, RvqTrainOptions};
use speccodec::testsignal::{speech_like, white_noise};
use speccodec::{MelConfig, SpectrogramConfig};

const SR: u32 = 44_100;

fn dsp(c: &mut Criterion) {
    let audio = speech_like(1, 1.0, SR);
    let cfg = SpectrogramConfig::default();
    let mel = MelConfig::for_sample_rate(SR);
    c.bench_function("stft_1s", |b| {
        b.iter(|| stft(black_box(&audio), &cfg).unwrap())
    });
    c.bench_function("log_mel_1s", |b| {
        b.iter(|| log_mel(black_box(&audio), &cfg, &mel).unwrap())
    });
    let short = speech_like(2, 0.25, SR);
    let mag = magnitude(&stft(&short, &cfg).unwrap());
    c.bench_function("griffin_lim_250ms_8it", |b| {
        b.iter(|| griffin_lim(black_box(&mag), &cfg, 8, 0).unwrap())
    });
}

fn quantizers(c: &mut Criterion) {
    let spec = FsqSpec::default();
    let noise = white_noise(3, 0.9, 32 * 256, SR).into_samples();
    c.bench_function("fsq_quantize_256", |b| {
        b.iter(|| {
            for v in noise.chunks_exact(32) {
                black_box(fsq_quantize(v, &spec).unwrap());
            }
        })
    });
    let train = white_noise(4, 0.5, 32 * 4096, SR).into_samples();
    let cb = rvq_train(&train, 32, &RvqTrainOptions::new(8, 256, 0)).unwrap();
    c.bench_function("rvq_encode_256_8x256", |b| {
        b.iter(|| {
            for v in noise.chunks_exact(32) {
                black_box(rvq_encode(v, &cb).unwrap());
            }
        })
    });
}

fn bitstream(c: &mut Criterion) {
    let frames = 8613;
    let tokens: Vec<u32> = (0..frames * 8).map(|i| (i * 7919 % 1000) as u32).collect();
    let stream = TokenStream::new(StreamHeader::new(SR, 512, 1000, 0), tokens).unwrap();
    let bytes = pack(&stream).unwrap();
    c.bench_function("pack_100s", |b| {
        b.iter(|| pack(black_box(&stream)).unwrap())
    });
    c.bench_function("unpack_100s", |b| {
        b.iter(|| unpack(black_box(&bytes)).unwrap())
    });
}

criterion_group!(benches, dsp, quantizers, bitstream);
criterion_main!(benches);
