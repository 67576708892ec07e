//! Traditional codecs and the blob container they share.
//!
//! Container layout (big-endian):
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 4     | magic `IMCP`                  |
//! | 1     | version (`0x01`)              |
//! | 1     | codec id                      |
//! | 4     | width                         |
//! | 4     | height                        |
//! | 1     | channels                      |
//! | 1     | quality (0 for lossless)      |
//! | 8     | payload length                |
//! | n     | payload                       |

mod dct;
mod huffman;
mod predictive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dct::{dct_decode, dct_encode, forward_dct_8x8, inverse_dct_8x8, quant_table, rate_distortion_sweep, RdPoint, BASE_LUMA_TABLE, ZIGZAG};
pub use huffman::{code_lengths, huffman_decode, huffman_encode, CanonicalCode};
pub use predictive::{predictive_decode, predictive_encode, predictive_residuals};

use crate::raster::Image;

pub const BLOB_MAGIC: &[u8; 4] = b"IMCP";
pub const BLOB_VERSION: u8 = 1;
pub const BLOB_HEADER_LEN: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("cannot entropy-code an empty input")]
    EmptyInput,
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated bitstream: {0}")]
    Truncated(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("malformed blob: {0}")]
    MalformedBlob(String),
    #[error("quality {0} outside [1, 100]")]
    QualityOutOfRange(u8),
    #[error("expected {expected:?} blob, got {actual:?}")]
    WrongCodec { expected: CodecId, actual: CodecId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecId {
    Huffman = 0,
    Predictive = 1,
    Dct = 2,
    AeEmbedding = 3,
}

impl CodecId {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(CodecId::Huffman),
            1 => Some(CodecId::Predictive),
            2 => Some(CodecId::Dct),
            3 => Some(CodecId::AeEmbedding),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Huffman => "huffman",
            CodecId::Predictive => "predictive",
            CodecId::Dct => "dct",
            CodecId::AeEmbedding => "ae_embedding",
        }
    }
}

impl std::str::FromStr for CodecId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "huffman" => Ok(CodecId::Huffman),
            "predictive" => Ok(CodecId::Predictive),
            "dct" => Ok(CodecId::Dct),
            "ae_embedding" | "ae" => Ok(CodecId::AeEmbedding),
            other => Err(format!("unknown codec '{other}'")),
        }
    }
}

/// Self-describing compressed image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBlob {
    pub codec: CodecId,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub quality: u8,
    pub payload: Vec<u8>,
}

impl EncodedBlob {
    pub fn encoded_len(&self) -> usize {
        BLOB_HEADER_LEN + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(BLOB_MAGIC);
        out.push(BLOB_VERSION);
        out.push(self.codec as u8);
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.height.to_be_bytes());
        out.push(self.channels);
        out.push(self.quality);
        out.extend_from_slice(&(self.payload.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let bad = |m: &str| CodecError::MalformedBlob(m.to_string());
        if bytes.len() < BLOB_HEADER_LEN {
            return Err(bad("shorter than container header"));
        }
        if &bytes[..4] != BLOB_MAGIC {
            return Err(bad("bad magic"));
        }
        if bytes[4] != BLOB_VERSION {
            return Err(CodecError::MalformedBlob(format!("unsupported version {}", bytes[4])));
        }
        let codec = CodecId::from_u8(bytes[5]).ok_or_else(|| CodecError::MalformedBlob(format!("unknown codec id {}", bytes[5])))?;
        let width = u32::from_be_bytes(bytes[6..10].try_into().unwrap());
        let height = u32::from_be_bytes(bytes[10..14].try_into().unwrap());
        let channels = bytes[14];
        let quality = bytes[15];
        let payload_len = u64::from_be_bytes(bytes[16..24].try_into().unwrap());
        if width == 0 || height == 0 || !matches!(channels, 1 | 3) {
            return Err(CodecError::MalformedBlob(format!("invalid dimensions {width}x{height}x{channels}")));
        }
        let rest = &bytes[BLOB_HEADER_LEN..];
        if rest.len() as u64 != payload_len {
            return Err(CodecError::MalformedBlob(format!(
                "payload length field {payload_len} but {} bytes present",
                rest.len()
            )));
        }
        Ok(Self { codec, width, height, channels, quality, payload: rest.to_vec() })
    }

    pub(crate) fn expect_codec(&self, expected: CodecId) -> Result<(), CodecError> {
        if self.codec == expected {
            Ok(())
        } else {
            Err(CodecError::WrongCodec { expected, actual: self.codec })
        }
    }

    pub(crate) fn sample_count(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }
}

/// Entropy-codes the raw samples with no prediction.
pub fn huffman_image_encode(image: &Image) -> Result<EncodedBlob, CodecError> {
    Ok(EncodedBlob {
        codec: CodecId::Huffman,
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        quality: 0,
        payload: huffman_encode(image.samples())?,
    })
}

pub fn huffman_image_decode(blob: &EncodedBlob) -> Result<Image, CodecError> {
    blob.expect_codec(CodecId::Huffman)?;
    let samples = huffman_decode(&blob.payload)?;
    if samples.len() != blob.sample_count() {
        return Err(CodecError::LengthMismatch(format!("{} samples for {} expected", samples.len(), blob.sample_count())));
    }
    Image::new(blob.width, blob.height, blob.channels, samples).map_err(|e| CodecError::MalformedBlob(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_layout() {
        let blob = EncodedBlob { codec: CodecId::Dct, width: 258, height: 3, channels: 3, quality: 75, payload: vec![9, 8] };
        let bytes = blob.to_bytes();
        assert_eq!(
            bytes,
            [b'I', b'M', b'C', b'P', 1, 2, 0, 0, 1, 2, 0, 0, 0, 3, 3, 75, 0, 0, 0, 0, 0, 0, 0, 2, 9, 8]
        );
        assert_eq!(EncodedBlob::from_bytes(&bytes).unwrap(), blob);
    }

    #[test]
    fn container_rejects_garbage() {
        let blob = EncodedBlob { codec: CodecId::Huffman, width: 1, height: 1, channels: 1, quality: 0, payload: vec![1] };
        let bytes = blob.to_bytes();
        assert!(EncodedBlob::from_bytes(&bytes[..10]).is_err());
        assert!(EncodedBlob::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[5] = 9;
        assert!(EncodedBlob::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(EncodedBlob::from_bytes(&bad).is_err());
    }

    #[test]
    fn huffman_image_roundtrip() {
        let img = Image::new(3, 2, 3, (0..18).map(|i| (i % 4) as u8).collect()).unwrap();
        let blob = huffman_image_encode(&img).unwrap();
        assert_eq!(huffman_image_decode(&blob).unwrap(), img);
        assert!(matches!(predictive_decode(&blob), Err(CodecError::WrongCodec { .. })));
    }
}
