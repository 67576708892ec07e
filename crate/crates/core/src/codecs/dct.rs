//! DCT transform codec, the lossy baseline.
//!
//! Each channel is edge-padded to a multiple of 8 and split into 8×8 blocks
//! (raster order, channel after channel). Blocks go through an orthonormal
//! 2-D DCT-II, are divided by the quality-scaled quantization table with
//! round-half-away-from-zero and scanned in zig-zag order.
//!
//! Each block is written as its nonzero count, then per nonzero coefficient
//! the run of zeros before it, its magnitude minus one and a sign bit. Every
//! integer `n` is coded as its category `floor(log2(n + 1))` under a fixed
//! canonical Huffman table followed by `category` raw bits, as in baseline
//! JPEG. The table is static so a finer quantizer can never shrink the
//! stream: magnitudes only grow, and splitting a run always costs more bits
//! than it saves (checked exhaustively in the tests). Encoded size is
//! therefore non-decreasing in quality.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::huffman::BitWriter;
use super::{code_lengths, CanonicalCode, CodecError, CodecId, EncodedBlob};
use crate::metrics::{self, MetricsError};
use crate::raster::Image;

/// JPEG Annex K luminance table, natural (row-major) order.
pub const BASE_LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Zig-zag scan position -> natural index.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61,
    54, 47, 55, 62, 63,
];

/// Quantization divisors for `quality` in [1, 100], natural order.
pub fn quant_table(quality: u8) -> Result<[u16; 64], CodecError> {
    if !(1..=100).contains(&quality) {
        return Err(CodecError::QualityOutOfRange(quality));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    Ok(BASE_LUMA_TABLE.map(|b| ((b as u32 * scale) / 100).max(1) as u16))
}

fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        std::array::from_fn(|u| {
            let alpha = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            std::array::from_fn(|x| alpha * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos())
        })
    })
}

/// Orthonormal 2-D DCT-II of a row-major 8×8 block.
pub fn forward_dct_8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x c[u][x] * block[y][x]
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn inverse_dct_8x8(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| c[u][x] * coeffs[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| c[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

fn padded(side: u32) -> usize {
    (side as usize).div_ceil(8) * 8
}

/// Category weights for the static integer code; strictly decreasing so
/// longer categories never get shorter codes.
const CATEGORY_WEIGHTS: [u64; CATEGORIES] = [2048, 1024, 512, 256, 128, 64, 32, 16, 8, 4, 2, 1];
/// Integers up to `2^CATEGORIES - 2`, enough for 8-bit samples at step 1.
const CATEGORIES: usize = 12;

fn category_code() -> &'static CanonicalCode {
    static CODE: OnceLock<CanonicalCode> = OnceLock::new();
    CODE.get_or_init(|| {
        let mut freqs = [0u64; 256];
        freqs[..CATEGORIES].copy_from_slice(&CATEGORY_WEIGHTS);
        CanonicalCode::from_lengths(&code_lengths(&freqs))
    })
}

fn category(n: u32) -> u32 {
    31 - (n + 1).leading_zeros()
}

/// Bits spent on `n` by `put_integer`.
#[cfg(test)]
fn integer_bits(n: u32) -> u32 {
    let c = category(n);
    category_code().lengths[c as usize] as u32 + c
}

fn put_integer(writer: &mut BitWriter, n: u32) {
    let c = category(n);
    debug_assert!((c as usize) < CATEGORIES, "integer {n} outside the category table");
    let code = category_code();
    writer.push(code.codes[c as usize], code.lengths[c as usize]);
    writer.push(((n + 1) - (1 << c)) as u64, c as u8);
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn bits(&mut self, n: u32) -> Result<u32, CodecError> {
        let mut v = 0u32;
        for _ in 0..n {
            let byte = self.bytes.get(self.pos / 8).ok_or_else(|| CodecError::Truncated("coefficient stream ended early".into()))?;
            v = (v << 1) | ((byte >> (7 - self.pos % 8)) & 1) as u32;
            self.pos += 1;
        }
        Ok(v)
    }

    fn integer(&mut self) -> Result<u32, CodecError> {
        let code = category_code();
        let (mut acc, mut len) = (0u64, 0u8);
        let c = loop {
            acc = (acc << 1) | self.bits(1)? as u64;
            len += 1;
            if let Some(&(s, _)) = code.order.iter().find(|&&(s, l)| l == len && code.codes[s as usize] == acc) {
                break s as u32;
            }
            if len as usize > CATEGORIES {
                return Err(CodecError::MalformedBlob("invalid category code".into()));
            }
        };
        Ok((1 << c) + self.bits(c)? - 1)
    }
}

pub fn dct_encode(image: &Image, quality: u8) -> Result<EncodedBlob, CodecError> {
    let table = quant_table(quality)?;
    let (w, h, ch) = (image.width() as usize, image.height() as usize, image.channels() as usize);
    let (pw, ph) = (padded(image.width()), padded(image.height()));
    let mut writer = BitWriter::new(Vec::new());
    for c in 0..ch {
        for by in (0..ph).step_by(8) {
            for bx in (0..pw).step_by(8) {
                let block: [f64; 64] = std::array::from_fn(|i| {
                    let x = (bx + i % 8).min(w - 1);
                    let y = (by + i / 8).min(h - 1);
                    image.samples()[(y * w + x) * ch + c] as f64
                });
                let coeffs = forward_dct_8x8(&block);
                let quantized: Vec<(u32, i32)> = ZIGZAG
                    .iter()
                    .enumerate()
                    .map(|(pos, &natural)| (pos as u32, (coeffs[natural] / table[natural] as f64).round() as i32))
                    .filter(|&(_, q)| q != 0)
                    .collect();
                put_integer(&mut writer, quantized.len() as u32);
                let mut next = 0u32;
                for (pos, q) in quantized {
                    put_integer(&mut writer, pos - next);
                    put_integer(&mut writer, q.unsigned_abs() - 1);
                    writer.push((q < 0) as u64, 1);
                    next = pos + 1;
                }
            }
        }
    }
    Ok(EncodedBlob {
        codec: CodecId::Dct,
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        quality,
        payload: {
            // no complete code fits in seven 1-bits, so padding never parses as a block
            writer.pad_with_ones();
            writer.finish()
        },
    })
}

pub fn dct_decode(blob: &EncodedBlob) -> Result<Image, CodecError> {
    blob.expect_codec(CodecId::Dct)?;
    let table = quant_table(blob.quality).map_err(|_| CodecError::MalformedBlob(format!("quality {}", blob.quality)))?;
    let (w, h, ch) = (blob.width as usize, blob.height as usize, blob.channels as usize);
    let (pw, ph) = (padded(blob.width), padded(blob.height));
    let mut samples = vec![0u8; w * h * ch];
    let mut reader = BitReader { bytes: &blob.payload, pos: 0 };
    for c in 0..ch {
        for by in (0..ph).step_by(8) {
            for bx in (0..pw).step_by(8) {
                let mut coeffs = [0.0; 64];
                let count = reader.integer()? as usize;
                if count > 64 {
                    return Err(CodecError::MalformedBlob(format!("{count} coefficients in one block")));
                }
                let mut pos = 0usize;
                for _ in 0..count {
                    pos += reader.integer()? as usize;
                    let magnitude = reader.integer()? as f64 + 1.0;
                    let negative = reader.bits(1)? == 1;
                    if pos >= 64 {
                        return Err(CodecError::MalformedBlob("run past end of block".into()));
                    }
                    let natural = ZIGZAG[pos];
                    coeffs[natural] = if negative { -magnitude } else { magnitude } * table[natural] as f64;
                    pos += 1;
                }
                let block = inverse_dct_8x8(&coeffs);
                for (i, v) in block.iter().enumerate() {
                    let (x, y) = (bx + i % 8, by + i / 8);
                    if x < w && y < h {
                        samples[(y * w + x) * ch + c] = v.round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    let padding = (8 - reader.pos % 8) % 8;
    if blob.payload.len() != reader.pos.div_ceil(8) || reader.bits(padding as u32)? != (1 << padding) - 1 {
        return Err(CodecError::MalformedBlob("trailing coefficient data".into()));
    }
    Image::new(blob.width, blob.height, blob.channels, samples).map_err(|e| CodecError::MalformedBlob(e.to_string()))
}

/// One point on a rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub quality: u8,
    pub bytes: u64,
    pub bitrate_bpp: f64,
    #[serde(with = "crate::metrics::psnr_serde")]
    pub psnr_db: f64,
}

/// Encodes at each quality and measures container bitrate and PSNR (peak 255).
pub fn rate_distortion_sweep(image: &Image, qualities: &[u8]) -> Result<Vec<RdPoint>, crate::Error> {
    if qualities.is_empty() {
        return Err(MetricsError::Zero("quality list length").into());
    }
    qualities
        .iter()
        .map(|&quality| {
            let blob = dct_encode(image, quality)?;
            let decoded = dct_decode(&blob)?;
            let bytes = blob.encoded_len() as u64;
            Ok(RdPoint {
                quality,
                bytes,
                bitrate_bpp: metrics::bitrate_bpp(bytes, image.pixel_count() as u64)?,
                psnr_db: metrics::psnr(image, &decoded, 255.0)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{generate_scene, SceneSpec};

    #[test]
    fn quant_table_scaling() {
        assert_eq!(quant_table(50).unwrap(), BASE_LUMA_TABLE);
        assert!(quant_table(100).unwrap().iter().all(|&q| q == 1));
        let q1 = quant_table(1).unwrap();
        assert_eq!(q1[0], 16 * 50);
        let q75 = quant_table(75).unwrap();
        assert_eq!(q75[0], 8);
        assert_eq!(q75[1], 5);
        let q10 = quant_table(10).unwrap();
        assert_eq!(q10[2], 50);
        assert!(quant_table(0).is_err());
        assert!(quant_table(101).is_err());
    }

    #[test]
    fn zigzag_is_permutation() {
        let mut seen = ZIGZAG;
        seen.sort();
        assert_eq!(seen, std::array::from_fn::<usize, 64, _>(|i| i));
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = 93.0;
        let coeffs = forward_dct_8x8(&[c; 64]);
        assert!((coeffs[0] - 8.0 * c).abs() < 1e-9);
        assert!(coeffs[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn transform_is_orthonormal() {
        let block: [f64; 64] = std::array::from_fn(|i| ((i * 37) % 256) as f64);
        let back = inverse_dct_8x8(&forward_dct_8x8(&block));
        for (a, b) in block.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        let energy_in: f64 = block.iter().map(|v| v * v).sum();
        let energy_out: f64 = forward_dct_8x8(&block).iter().map(|v| v * v).sum();
        assert!((energy_in - energy_out).abs() / energy_in < 1e-12);
    }

    #[test]
    fn odd_sizes_roundtrip_near_lossless_at_q100() {
        let (img, _) = generate_scene(&SceneSpec::new(5, 21, 13)).unwrap();
        let blob = dct_encode(&img, 100).unwrap();
        let out = dct_decode(&EncodedBlob::from_bytes(&blob.to_bytes()).unwrap()).unwrap();
        assert_eq!((out.width(), out.height()), (21, 13));
        assert!(metrics::psnr(&img, &out, 255.0).unwrap() > 40.0);
    }

    #[test]
    fn malformed_streams() {
        let img = Image::filled(8, 8, 1, 10).unwrap();
        let mut blob = dct_encode(&img, 50).unwrap();
        blob.quality = 0;
        assert!(dct_decode(&blob).is_err());
        let mut blob = dct_encode(&img, 50).unwrap();
        blob.width = 16;
        assert!(dct_decode(&blob).is_err());
        let mut blob = dct_encode(&img, 50).unwrap();
        blob.payload.push(0);
        assert!(dct_decode(&blob).is_err());
        let mut blob = dct_encode(&img, 50).unwrap();
        blob.payload.clear();
        assert!(matches!(dct_decode(&blob), Err(CodecError::Truncated(_))));
        assert!(matches!(dct_encode(&img, 0), Err(CodecError::QualityOutOfRange(0))));
    }

    #[test]
    fn integer_code_never_rewards_a_finer_quantizer() {
        let lengths: Vec<u8> = (0..CATEGORIES).map(|c| category_code().lengths[c]).collect();
        assert!(lengths.windows(2).all(|w| w[0] <= w[1]), "{lengths:?}");
        // byte padding relies on every all-ones prefix of 7 bits being incomplete
        assert!(lengths[CATEGORIES - 1] > 7);
        for n in 1..4094 {
            assert!(integer_bits(n) >= integer_bits(n - 1));
        }
        // a new nonzero splits a run r into r1 + 1 + r2 and costs at least
        // the cheapest magnitude plus a sign bit
        let cheapest = integer_bits(0) + 1;
        for r1 in 0..64 {
            for r2 in 0..64 - r1 {
                let r = r1 + r2 + 1;
                if r < 64 {
                    assert!(integer_bits(r1) + integer_bits(r2) + cheapest > integer_bits(r), "{r1} + {r2}");
                }
            }
        }
    }

    #[test]
    fn integer_code_round_trips() {
        let values = [0u32, 1, 2, 3, 6, 7, 63, 64, 2039, 4094];
        let mut writer = BitWriter::new(Vec::new());
        values.iter().for_each(|&n| put_integer(&mut writer, n));
        let bytes = writer.finish();
        let mut reader = BitReader { bytes: &bytes, pos: 0 };
        for &n in &values {
            assert_eq!(reader.integer().unwrap(), n);
        }
    }

    #[test]
    fn size_never_shrinks_with_quality() {
        for seed in 0..3 {
            let (img, _) = generate_scene(&SceneSpec::new(seed, 48, 40)).unwrap();
            let sizes: Vec<usize> = (1..=100).map(|q| dct_encode(&img, q).unwrap().encoded_len()).collect();
            assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {sizes:?}");
        }
    }

    #[test]
    fn sweep_single_quality() {
        let (img, _) = generate_scene(&SceneSpec::new(2, 32, 32)).unwrap();
        let pts = rate_distortion_sweep(&img, &[50]).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].bitrate_bpp > 0.0);
        assert!(rate_distortion_sweep(&img, &[]).is_err());
    }
}
