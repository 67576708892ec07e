//! Lossless predictive coding: left-neighbour prediction per channel
//! (first column predicts from the pixel above), residuals mod 256, then
//! Huffman.

use super::{huffman_decode, huffman_encode, CodecError, CodecId, EncodedBlob};
use crate::raster::Image;

/// Residual stream in sample order; the origin sample passes through verbatim.
pub fn predictive_residuals(image: &Image) -> Vec<u8> {
    let ch = image.channels() as usize;
    let row = image.width() as usize * ch;
    let s = image.samples();
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let prediction = if i % row >= ch {
                s[i - ch]
            } else if i >= row {
                s[i - row]
            } else {
                0
            };
            v.wrapping_sub(prediction)
        })
        .collect()
}

fn reconstruct(residuals: &[u8], width: usize, channels: usize) -> Vec<u8> {
    let row = width * channels;
    let mut s = Vec::with_capacity(residuals.len());
    for (i, &r) in residuals.iter().enumerate() {
        let prediction = if i % row >= channels {
            s[i - channels]
        } else if i >= row {
            s[i - row]
        } else {
            0
        };
        s.push(r.wrapping_add(prediction));
    }
    s
}

pub fn predictive_encode(image: &Image) -> Result<EncodedBlob, CodecError> {
    Ok(EncodedBlob {
        codec: CodecId::Predictive,
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        quality: 0,
        payload: huffman_encode(&predictive_residuals(image))?,
    })
}

pub fn predictive_decode(blob: &EncodedBlob) -> Result<Image, CodecError> {
    blob.expect_codec(CodecId::Predictive)?;
    let residuals = huffman_decode(&blob.payload)?;
    if residuals.len() != blob.sample_count() {
        return Err(CodecError::LengthMismatch(format!(
            "{} residuals for {} samples",
            residuals.len(),
            blob.sample_count()
        )));
    }
    let samples = reconstruct(&residuals, blob.width as usize, blob.channels as usize);
    Image::new(blob.width, blob.height, blob.channels, samples).map_err(|e| CodecError::MalformedBlob(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::write_pnm;
    use proptest::prelude::*;

    #[test]
    fn residual_rule() {
        let img = Image::new(4, 1, 1, vec![10, 12, 11, 11]).unwrap();
        assert_eq!(predictive_residuals(&img), vec![10, 2, 255, 0]);
        // second row's first column predicts from above
        let img = Image::new(2, 2, 1, vec![5, 6, 9, 9]).unwrap();
        assert_eq!(predictive_residuals(&img), vec![5, 1, 4, 0]);
    }

    #[test]
    fn rgb_predicts_within_channel() {
        let img = Image::new(2, 1, 3, vec![10, 20, 30, 11, 19, 30]).unwrap();
        assert_eq!(predictive_residuals(&img), vec![10, 20, 30, 1, 255, 0]);
    }

    #[test]
    fn constant_image_compresses() {
        let img = Image::filled(64, 64, 3, 128).unwrap();
        let res = predictive_residuals(&img);
        assert_eq!(&res[..3], &[128, 128, 128]);
        assert!(res[3..].iter().all(|&r| r == 0));
        let blob = predictive_encode(&img).unwrap();
        // Huffman cannot go below one bit per sample.
        assert!(blob.encoded_len() * 7 < write_pnm(&img).len());
        assert_eq!(predictive_decode(&blob).unwrap(), img);
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1u32..40, h in 1u32..40, rgb in any::<bool>(), seed in any::<u32>()) {
            let c = if rgb { 3u8 } else { 1 };
            let n = (w * h) as usize * c as usize;
            let mut state = seed as u64 | 1;
            let samples = (0..n).map(|_| { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state as u8 }).collect();
            let img = Image::new(w, h, c, samples).unwrap();
            let blob = EncodedBlob::from_bytes(&predictive_encode(&img).unwrap().to_bytes()).unwrap();
            prop_assert_eq!(predictive_decode(&blob).unwrap(), img);
        }
    }
}
