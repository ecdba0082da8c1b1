//! `.spct` token stream format.
//!
//! ```text
//! offset size field
//!      0    4 magic "SPCT"
//!      4    1 version (1)
//!      5    4 sample_rate     u32 LE
//!      9    4 hop_length      u32 LE
//!     13    2 num_codebooks   u16 LE
//!     15    1 bits_per_index  u8
//!     16    4 codebook_size   u32 LE
//!     20    4 num_frames      u32 LE
//!     24    . payload
//! ```
//!
//! The payload holds `num_frames * num_codebooks` fields of `bits_per_index`
//! bits, frame-major with codebooks ascending, each field written MSB first
//! and packed without gaps. The final byte is zero-padded.

use crate::error::{Error, Result};
use crate::wire::{ByteReader, ByteWriter};

pub const MAGIC: [u8; 4] = *b"SPCT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;
pub const MAX_BITS_PER_INDEX: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u8,
    pub sample_rate: u32,
    pub hop_length: u32,
    pub num_codebooks: u16,
    pub bits_per_index: u8,
    pub codebook_size: u32,
    pub num_frames: u32,
}

impl StreamHeader {
    /// 8 codebooks of `codebook_size` codes in 10-bit fields.
    pub fn new(sample_rate: u32, hop_length: u32, codebook_size: u32, num_frames: u32) -> Self {
        Self {
            version: VERSION,
            sample_rate,
            hop_length,
            num_codebooks: 8,
            bits_per_index: 10,
            codebook_size,
            num_frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        if self.num_codebooks == 0 {
            return Err(Error::config("stream needs at least one codebook"));
        }
        if self.bits_per_index == 0 || self.bits_per_index > MAX_BITS_PER_INDEX {
            return Err(Error::config(format!(
                "bits_per_index must be in 1..={MAX_BITS_PER_INDEX}, got {}",
                self.bits_per_index
            )));
        }
        if self.codebook_size == 0 || self.codebook_size as u64 > 1u64 << self.bits_per_index {
            return Err(Error::config(format!(
                "codebook_size {} does not fit in {} bits",
                self.codebook_size, self.bits_per_index
            )));
        }
        if self.sample_rate == 0 || self.hop_length == 0 {
            return Err(Error::config("sample_rate and hop_length must be positive"));
        }
        Ok(())
    }

    pub fn token_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop_length as f64
    }

    pub fn payload_bits(&self) -> u64 {
        self.num_frames as u64 * self.num_codebooks as u64 * self.bits_per_index as u64
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload_bits().div_ceil(8) as usize
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_frames as f64 / self.token_rate()
    }
}

/// Raw bits per second: codebooks x bits per index x frames per second.
pub fn bitrate(header: &StreamHeader) -> f64 {
    header.num_codebooks as f64 * header.bits_per_index as f64 * header.token_rate()
}

/// Codebook indices for a run of frames, `num_frames x num_codebooks`, frame-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    header: StreamHeader,
    tokens: Vec<u32>,
}

impl TokenStream {
    /// `header.num_frames` is overwritten from the token count.
    pub fn new(mut header: StreamHeader, tokens: Vec<u32>) -> Result<Self> {
        let cb = header.num_codebooks as usize;
        if cb == 0 || !tokens.len().is_multiple_of(cb) {
            return Err(Error::shape(
                format!("a multiple of {cb} tokens"),
                tokens.len(),
            ));
        }
        header.num_frames = u32::try_from(tokens.len() / cb)
            .map_err(|_| Error::input("too many frames for a token stream"))?;
        header.validate()?;
        for (i, &token) in tokens.iter().enumerate() {
            if token >= header.codebook_size {
                return Err(Error::InvalidToken {
                    frame: i / cb,
                    codebook: i % cb,
                    token,
                    codebook_size: header.codebook_size,
                });
            }
        }
        Ok(Self { header, tokens })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn num_frames(&self) -> usize {
        self.header.num_frames as usize
    }

    pub fn num_codebooks(&self) -> usize {
        self.header.num_codebooks as usize
    }

    pub fn frame(&self, t: usize) -> &[u32] {
        let cb = self.num_codebooks();
        &self.tokens[t * cb..(t + 1) * cb]
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn bitrate(&self) -> f64 {
        bitrate(&self.header)
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    used: u32,
}

impl BitWriter {
    fn with_capacity(n: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(n),
            acc: 0,
            used: 0,
        }
    }

    fn put(&mut self, value: u32, width: u32) {
        self.acc = (self.acc << width) | value as u64;
        self.used += width;
        while self.used >= 8 {
            self.used -= 8;
            self.bytes.push((self.acc >> self.used) as u8);
        }
        self.acc &= (1u64 << self.used) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push((self.acc << (8 - self.used)) as u8);
        }
        self.bytes
    }
}

pub fn pack(stream: &TokenStream) -> Result<Vec<u8>> {
    let h = stream.header;
    h.validate()?;
    let mut w = ByteWriter::new();
    w.bytes(&MAGIC);
    w.u8(h.version);
    w.u32(h.sample_rate);
    w.u32(h.hop_length);
    w.u16(h.num_codebooks);
    w.u8(h.bits_per_index);
    w.u32(h.codebook_size);
    w.u32(h.num_frames);
    let mut out = w.into_inner();

    let cb = stream.num_codebooks();
    let mut bits = BitWriter::with_capacity(h.payload_bytes());
    for (i, &token) in stream.tokens.iter().enumerate() {
        if token >= h.codebook_size {
            return Err(Error::InvalidToken {
                frame: i / cb,
                codebook: i % cb,
                token,
                codebook_size: h.codebook_size,
            });
        }
        bits.put(token, h.bits_per_index as u32);
    }
    out.extend(bits.finish());
    Ok(out)
}

pub fn read_header(bytes: &[u8]) -> Result<StreamHeader> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4.min(bytes.len()))?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic.to_vec(),
        });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header = StreamHeader {
        version,
        sample_rate: r.u32()?,
        hop_length: r.u32()?,
        num_codebooks: r.u16()?,
        bits_per_index: r.u8()?,
        codebook_size: r.u32()?,
        num_frames: r.u32()?,
    };
    header.validate().map_err(|e| Error::Corrupt {
        offset: 5,
        reason: e.to_string(),
    })?;
    Ok(header)
}

pub fn unpack(bytes: &[u8]) -> Result<TokenStream> {
    let header = read_header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let needed = header.payload_bytes();
    if payload.len() < needed {
        return Err(Error::Truncated {
            offset: bytes.len(),
            needed: needed - payload.len(),
        });
    }
    if payload.len() > needed {
        return Err(Error::Corrupt {
            offset: HEADER_LEN + needed,
            reason: format!("{} trailing bytes", payload.len() - needed),
        });
    }

    let width = header.bits_per_index as u32;
    let cb = header.num_codebooks as usize;
    let count = header.num_frames as usize * cb;
    let mut tokens = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut have = 0u32;
    let mut bytes_iter = payload.iter();
    for i in 0..count {
        while have < width {
            acc = (acc << 8) | *bytes_iter.next().expect("length checked") as u64;
            have += 8;
        }
        have -= width;
        let token = ((acc >> have) & ((1u64 << width) - 1)) as u32;
        acc &= (1u64 << have) - 1;
        if token >= header.codebook_size {
            return Err(Error::InvalidToken {
                frame: i / cb,
                codebook: i % cb,
                token,
                codebook_size: header.codebook_size,
            });
        }
        tokens.push(token);
    }
    TokenStream::new(header, tokens)
}
