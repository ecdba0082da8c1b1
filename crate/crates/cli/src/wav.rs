//! Mono WAV I/O: 16-bit PCM or 32-bit float in, 16-bit PCM out.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use speccodec::AudioBuffer;

use crate::CliError;

fn classify(path: &Path, err: hound::Error) -> CliError {
    match err {
        hound::Error::IoError(e) => CliError::io(format!("{}: {e}", path.display())),
        other => CliError::invalid(format!("{}: {other}", path.display())),
    }
}

pub fn read(path: &Path) -> Result<AudioBuffer, CliError> {
    let reader = WavReader::open(path).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(CliError::invalid(format!(
            "{}: {} channels; only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| classify(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|e| classify(path, e))?,
        (fmt, bits) => {
            return Err(CliError::invalid(format!(
            "{}: unsupported sample format {fmt:?} {bits}-bit (need 16-bit PCM or 32-bit float)",
            path.display()
        )))
        }
    };
    AudioBuffer::new(samples, spec.sample_rate)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, audio: &AudioBuffer) -> Result<(), CliError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    for &s in audio.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| classify(path, e))?;
    }
    writer.finalize().map_err(|e| classify(path, e))
}
