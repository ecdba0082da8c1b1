//! Mel-spectrogram codec toolkit.
//!
//! The pipeline analyses a waveform into 80-band log-mel frames, projects each
//! frame to a 32-dimensional tanh-bounded embedding, quantizes it with finite
//! scalar quantization (eight 1000-code codebooks) or residual vector
//! quantization (eight 1024-code codebooks), and packs the indices at
//! 10 bits each, which is 6890.6 bit/s at 44.1 kHz with hop 512. Decoding maps
//! the quantized embedding back to log-mel frames and recovers a waveform with
//! Griffin-Lim. [`metrics`] provides the time-domain and spectral distances
//! used to judge reconstructions.

pub mod bitstream;
pub mod codec;
pub mod dsp;
mod error;
pub mod metrics;
pub mod quantize;
pub mod testsignal;
mod wire;

pub use bitstream::{StreamHeader, TokenStream};
pub use codec::{CodecModel, FitOptions, Variant};
pub use dsp::{AudioBuffer, MelConfig, MelFrames, SpectrogramConfig};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use quantize::{FsqSpec, RvqCodebooks};
