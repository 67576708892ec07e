//! The autoencoder as a transmission codec.
//!
//! Blob payload: min and max of the embedding as f32 BE, then one byte per
//! embedding sample, laid out like an 8-bit image (row-major, interleaved
//! channels) of side `input_side / 2^blocks`.

use super::model::Model;
use super::tensor::{image_to_planar, planar_to_image};
use super::ModelError;
use crate::codecs::{CodecId, EncodedBlob};
use crate::raster::Image;

pub const EMBEDDING_RANGE_BYTES: usize = 8;

fn check_image(model: &Model, image: &Image) -> Result<(), ModelError> {
    let c = &model.config;
    if image.width() != c.input_side || image.height() != c.input_side || image.channels() != c.image_channels {
        return Err(ModelError::ShapeMismatch(format!(
            "image {}x{}x{} vs model input {s}x{s}x{}",
            image.width(),
            image.height(),
            image.channels(),
            c.image_channels,
            s = c.input_side
        )));
    }
    Ok(())
}

pub fn encode_embedding(model: &Model, image: &Image) -> Result<EncodedBlob, ModelError> {
    check_image(model, image)?;
    let z = model.encode_sample(&image_to_planar(image));
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min) as f32;
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max) as f32;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(ModelError::NonFiniteLoss { step: 0, loss: f64::NAN });
    }
    let (lo64, span) = (lo as f64, hi as f64 - lo as f64);
    let c = model.config.image_channels as usize;
    let s = model.embedding_side() as usize;
    let mut payload = Vec::with_capacity(EMBEDDING_RANGE_BYTES + c * s * s);
    payload.extend_from_slice(&lo.to_be_bytes());
    payload.extend_from_slice(&hi.to_be_bytes());
    for p in 0..s * s {
        for ch in 0..c {
            let v = z[ch * s * s + p];
            let q = if span > 0.0 { ((v - lo64) / span * 255.0).round().clamp(0.0, 255.0) } else { 0.0 };
            payload.push(q as u8);
        }
    }
    Ok(EncodedBlob {
        codec: CodecId::AeEmbedding,
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        quality: 0,
        payload,
    })
}

/// Dequantizes the embedding and runs the decoder half.
pub fn decode_embedding(model: &Model, blob: &EncodedBlob) -> Result<Image, ModelError> {
    if blob.codec != CodecId::AeEmbedding {
        return Err(ModelError::BlobMismatch(format!("expected ae_embedding blob, got {}", blob.codec.name())));
    }
    if model.config.has_skips() {
        return Err(ModelError::SkipsUnsupported);
    }
    let c = model.config.image_channels as usize;
    if blob.width != model.config.input_side || blob.height != model.config.input_side || blob.channels as usize != c {
        return Err(ModelError::BlobMismatch(format!(
            "blob {}x{}x{} vs model input side {}",
            blob.width, blob.height, blob.channels, model.config.input_side
        )));
    }
    let body = blob
        .payload
        .len()
        .checked_sub(EMBEDDING_RANGE_BYTES)
        .ok_or_else(|| ModelError::BlobMismatch("payload shorter than range header".into()))?;
    let s = model.embedding_side() as usize;
    if body != c * s * s {
        let side = ((body / c.max(1)) as f64).sqrt();
        return Err(ModelError::BlobMismatch(format!(
            "embedding side {side} does not match model embedding side {s} ({} blocks)",
            model.config.blocks
        )));
    }
    let lo = f32::from_be_bytes(blob.payload[0..4].try_into().unwrap()) as f64;
    let hi = f32::from_be_bytes(blob.payload[4..8].try_into().unwrap()) as f64;
    let span = hi - lo;
    let q = &blob.payload[EMBEDDING_RANGE_BYTES..];
    let mut z = vec![0.0; c * s * s];
    for p in 0..s * s {
        for ch in 0..c {
            z[ch * s * s + p] = lo + q[p * c + ch] as f64 / 255.0 * span;
        }
    }
    let out = model.decode_sample(&z);
    let side = model.config.input_side as usize;
    Ok(planar_to_image(&out, c, side, side))
}

/// Reconstruction without embedding quantization.
pub fn reconstruct(model: &Model, image: &Image) -> Result<Image, ModelError> {
    check_image(model, image)?;
    let x = image_to_planar(image);
    let out = if model.config.has_skips() {
        model.forward_cached(&x).output
    } else {
        model.decode_sample(&model.encode_sample(&x))
    };
    let side = model.config.input_side as usize;
    Ok(planar_to_image(&out, model.config.image_channels as usize, side, side))
}

/// The quantized embedding viewed as a small image.
pub fn embedding_preview(blob: &EncodedBlob, model: &Model) -> Result<Image, ModelError> {
    let s = model.embedding_side();
    let c = model.config.image_channels;
    Image::new(s, s, c, blob.payload.get(EMBEDDING_RANGE_BYTES..).unwrap_or_default().to_vec())
        .map_err(|e| ModelError::BlobMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{build_model, ModelConfig, SkipMode};
    use crate::raster::{generate_scene, SceneSpec};

    fn scene(side: u32) -> Image {
        generate_scene(&SceneSpec::new(21, side, side)).unwrap().0
    }

    #[test]
    fn payload_size_matches_embedding() {
        for blocks in 0..=3 {
            let model = build_model(&ModelConfig { blocks, input_side: 32, ..Default::default() }).unwrap();
            let blob = encode_embedding(&model, &scene(32)).unwrap();
            let s = 32usize >> blocks;
            assert_eq!(blob.payload.len(), 3 * s * s + 8);
            assert_eq!(blob.codec, CodecId::AeEmbedding);
        }
    }

    #[test]
    fn decode_checks_block_count() {
        let one = build_model(&ModelConfig { blocks: 1, input_side: 32, ..Default::default() }).unwrap();
        let two = build_model(&ModelConfig { blocks: 2, input_side: 32, ..Default::default() }).unwrap();
        let blob = encode_embedding(&one, &scene(32)).unwrap();
        assert!(matches!(decode_embedding(&two, &blob), Err(ModelError::BlobMismatch(_))));
        assert!(decode_embedding(&one, &blob).is_ok());
    }

    #[test]
    fn decode_ignores_encoder_weights() {
        let mut model = build_model(&ModelConfig { blocks: 2, input_side: 16, ..Default::default() }).unwrap();
        let blob = encode_embedding(&model, &scene(16)).unwrap();
        let before = decode_embedding(&model, &blob).unwrap();
        for conv in &mut model.encoder {
            conv.weight.iter_mut().for_each(|w| *w = 0.0);
            conv.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        model.bottleneck.weight.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(decode_embedding(&model, &blob).unwrap(), before);
    }

    #[test]
    fn decoder_skips_block_embedding_decode() {
        let model = build_model(&ModelConfig { blocks: 2, input_side: 16, skip_mode: SkipMode::Paper, ..Default::default() }).unwrap();
        let blob = encode_embedding(&model, &scene(16)).unwrap();
        assert_eq!(decode_embedding(&model, &blob), Err(ModelError::SkipsUnsupported));
    }

    #[test]
    fn rejects_wrong_image_size() {
        let model = build_model(&ModelConfig { blocks: 1, input_side: 16, ..Default::default() }).unwrap();
        assert!(encode_embedding(&model, &scene(32)).is_err());
    }
}
