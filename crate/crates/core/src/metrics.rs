//! Quality and size metrics shared by every compression method.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Image;

/// SSIM window side (uniform weights, stride 1).
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32, u8), (u32, u32, u8)),
    #[error("image {width}x{height} smaller than the {window}x{window} SSIM window")]
    TooSmall { width: u32, height: u32, window: usize },
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("output side {output} exceeds input side {input}")]
    OutputLarger { input: u32, output: u32 },
}

fn check_shapes(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch(
            (a.width(), a.height(), a.channels()),
            (b.width(), b.height(), b.channels()),
        ))
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let sum: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.samples().len() as f64)
}

/// PSNR in dB for a given MSE; `f64::INFINITY` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / mse).log10()
    }
}

pub fn psnr(a: &Image, b: &Image, max_value: f64) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(mse(a, b)?, max_value))
}

/// Summed-area table with one row/column of zero padding.
struct Integral {
    stride: usize,
    data: Vec<f64>,
}

impl Integral {
    fn build(w: usize, h: usize, value: impl Fn(usize, usize) -> f64) -> Self {
        let stride = w + 1;
        let mut data = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += value(x, y);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Self { stride, data }
    }

    fn window(&self, x: usize, y: usize, n: usize) -> f64 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] - self.data[y * s + x + n] - self.data[(y + n) * s + x] + self.data[y * s + x]
    }
}

/// Mean SSIM over all 8×8 windows, averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall { width: a.width(), height: a.height(), window: SSIM_WINDOW });
    }
    let ch = a.channels() as usize;
    let n = SSIM_WINDOW;
    let area = (n * n) as f64;
    let windows = (w - n + 1) * (h - n + 1);
    let mut total = 0.0;
    for c in 0..ch {
        let pa = |x: usize, y: usize| a.samples()[(y * w + x) * ch + c] as f64;
        let pb = |x: usize, y: usize| b.samples()[(y * w + x) * ch + c] as f64;
        // integer-valued sums, exact in f64 for any realistic image size
        let sa = Integral::build(w, h, pa);
        let sb = Integral::build(w, h, pb);
        let saa = Integral::build(w, h, |x, y| pa(x, y) * pa(x, y));
        let sbb = Integral::build(w, h, |x, y| pb(x, y) * pb(x, y));
        let sab = Integral::build(w, h, |x, y| pa(x, y) * pb(x, y));
        let mut channel_sum = 0.0;
        for y in 0..=h - n {
            for x in 0..=w - n {
                let mu_a = sa.window(x, y, n) / area;
                let mu_b = sb.window(x, y, n) / area;
                let var_a = saa.window(x, y, n) / area - mu_a * mu_a;
                let var_b = sbb.window(x, y, n) / area - mu_b * mu_b;
                let cov = sab.window(x, y, n) / area - mu_a * mu_b;
                channel_sum += ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
            }
        }
        total += channel_sum / windows as f64;
    }
    Ok(total / ch as f64)
}

/// Spatial compression ratio in percent: `100 * (output / input)^2`.
pub fn compression_ratio_spatial(input_side: u32, output_side: u32) -> Result<f64, MetricsError> {
    if input_side == 0 {
        return Err(MetricsError::Zero("input side"));
    }
    if output_side == 0 {
        return Err(MetricsError::Zero("output side"));
    }
    if output_side > input_side {
        return Err(MetricsError::OutputLarger { input: input_side, output: output_side });
    }
    let r = output_side as f64 / input_side as f64;
    Ok(100.0 * r * r)
}

/// Byte compression ratio in percent: `100 * encoded / original`.
pub fn compression_ratio_bytes(original: u64, encoded: u64) -> Result<f64, MetricsError> {
    if original == 0 {
        return Err(MetricsError::Zero("original byte count"));
    }
    Ok(100.0 * encoded as f64 / original as f64)
}

/// Average bits per pixel.
pub fn bitrate_bpp(encoded_bytes: u64, pixel_count: u64) -> Result<f64, MetricsError> {
    if pixel_count == 0 {
        return Err(MetricsError::Zero("pixel count"));
    }
    Ok(8.0 * encoded_bytes as f64 / pixel_count as f64)
}

/// Two-decimal percentage as printed in reports. Ties round to even, so
/// 1.5625 prints as 1.56.
pub fn format_pct(pct: f64) -> String {
    format!("{pct:.2}")
}

/// Renders a dB value, with `inf` for the lossless sentinel.
pub fn format_db(db: f64) -> String {
    if db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{db:.4}")
    }
}

/// PSNR that serializes infinity as the string `"inf"`.
pub mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid PSNR '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mse: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub bytes_original: u64,
    pub bytes_encoded: u64,
    pub compression_ratio_pct: f64,
    pub bitrate_bpp: f64,
}

impl QualityReport {
    /// Compares `reference` with `reconstruction` and attaches byte accounting.
    pub fn measure(
        reference: &Image,
        reconstruction: &Image,
        bytes_original: u64,
        bytes_encoded: u64,
        psnr_max: f64,
    ) -> Result<Self, MetricsError> {
        let mse = mse(reference, reconstruction)?;
        Ok(Self {
            mse,
            psnr_db: psnr_from_mse(mse, psnr_max),
            ssim: ssim(reference, reconstruction)?,
            bytes_original,
            bytes_encoded,
            compression_ratio_pct: compression_ratio_bytes(bytes_original, bytes_encoded)?,
            bitrate_bpp: bitrate_bpp(bytes_encoded, reference.pixel_count() as u64)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

/// Mean of the finite PSNR values; infinity only when every value is infinite.
pub fn mean_finite_psnr(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        if values.is_empty() { f64::NAN } else { f64::INFINITY }
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

/// Column names of the block-count ablation table, in reporting order.
pub const ABLATION_HEADER: [&str; 7] =
    ["Blocks", "PSNR Train", "SSIM Train", "PSNR Test", "SSIM Test", "Output Size", "Compression"];

/// Machine-friendly spelling of [`ABLATION_HEADER`].
pub const ABLATION_HEADER_SNAKE: [&str; 7] =
    ["blocks", "psnr_train", "ssim_train", "psnr_test", "ssim_test", "output_size", "compression_pct"];

/// One row of the ablation table: train/test quality at a given bottleneck size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub blocks: u32,
    #[serde(with = "psnr_serde")]
    pub psnr_train: f64,
    pub ssim_train: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_test: f64,
    pub ssim_test: f64,
    pub output_size: u32,
    pub compression_pct: f64,
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn parse_cell(s: &str) -> Result<f64, String> {
    match s.trim() {
        "" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        t => t.trim_end_matches('%').parse().map_err(|_| format!("bad number '{t}'")),
    }
}

impl AblationRow {
    /// Cells as written to CSV; metric columns are blank when not measured (NaN).
    pub fn cells(&self) -> [String; 7] {
        [
            self.blocks.to_string(),
            cell(self.psnr_train),
            cell(self.ssim_train),
            cell(self.psnr_test),
            cell(self.ssim_test),
            self.output_size.to_string(),
            format_pct(self.compression_pct),
        ]
    }
}

/// Writes rows as CSV with either the titled or the snake_case header.
pub fn write_ablation_csv(rows: &[AblationRow], snake_header: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = if snake_header { ABLATION_HEADER_SNAKE } else { ABLATION_HEADER };
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.cells()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

/// Parses CSV written by [`write_ablation_csv`] (either header style).
pub fn read_ablation_csv(text: &str) -> Result<Vec<AblationRow>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != ABLATION_HEADER && header != ABLATION_HEADER_SNAKE {
        return Err(format!("unexpected header {header:?}"));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != 7 {
                return Err(format!("expected 7 columns, got {}", rec.len()));
            }
            Ok(AblationRow {
                blocks: rec[0].parse().map_err(|_| format!("bad block count '{}'", &rec[0]))?,
                psnr_train: parse_cell(&rec[1])?,
                ssim_train: parse_cell(&rec[2])?,
                psnr_test: parse_cell(&rec[3])?,
                ssim_test: parse_cell(&rec[4])?,
                output_size: rec[5].parse().map_err(|_| format!("bad size '{}'", &rec[5]))?,
                compression_pct: parse_cell(&rec[6])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: u32, h: u32, c: u8, v: u8) -> Image {
        Image::filled(w, h, c, v).unwrap()
    }

    #[test]
    fn mse_basics() {
        let a = img(5, 3, 3, 0);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &img(5, 3, 3, 1)).unwrap(), 1.0);
        assert!(matches!(mse(&a, &img(3, 5, 3, 0)), Err(MetricsError::DimensionMismatch(..))));
    }

    #[test]
    fn psnr_values() {
        let a = img(4, 4, 1, 0);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&a, &img(4, 4, 1, 255), 255.0).unwrap(), 0.0);
        assert!((psnr_from_mse(1.0, 255.0) - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = img(9, 8, 3, 40);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let s = ssim(&img(8, 8, 1, 0), &img(8, 8, 1, 255)).unwrap();
        let expected = SSIM_C1 / (255.0 * 255.0 + SSIM_C1);
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 1.0e-4).abs() < 1e-6);
        let (c1, c2) = (30.0, 200.0);
        let s = ssim(&img(10, 10, 1, 30), &img(10, 10, 1, 200)).unwrap();
        assert!((s - (2.0 * c1 * c2 + SSIM_C1) / (c1 * c1 + c2 * c2 + SSIM_C1)).abs() < 1e-12);
    }

    #[test]
    fn ssim_window_too_large() {
        let a = img(7, 20, 1, 0);
        assert!(matches!(ssim(&a, &a), Err(MetricsError::TooSmall { .. })));
    }

    #[test]
    fn spatial_ratios_and_formatting() {
        let rows: Vec<String> = [256, 128, 64, 32, 16, 8]
            .iter()
            .map(|&s| format_pct(compression_ratio_spatial(256, s).unwrap()))
            .collect();
        assert_eq!(rows, ["100.00", "25.00", "6.25", "1.56", "0.39", "0.10"]);
        assert_eq!(compression_ratio_spatial(256, 8).unwrap(), 0.09765625);
        assert!(compression_ratio_spatial(0, 1).is_err());
        assert!(compression_ratio_spatial(8, 16).is_err());
    }

    #[test]
    fn byte_ratio_and_bitrate() {
        assert!((compression_ratio_bytes(196_608, 98).unwrap() - 0.0498).abs() < 1e-4);
        assert_eq!(compression_ratio_bytes(1000, 1000).unwrap(), 100.0);
        assert_eq!(compression_ratio_bytes(1000, 250).unwrap(), 25.0);
        assert!(compression_ratio_bytes(0, 1).is_err());
        assert_eq!(bitrate_bpp(64 * 64, 64 * 64).unwrap(), 8.0);
        assert_eq!(bitrate_bpp(3 * 64 * 64, 64 * 64).unwrap(), 24.0);
        assert_eq!(bitrate_bpp(49_152, 256 * 256).unwrap(), 6.0);
        assert!(bitrate_bpp(1, 0).is_err());
    }

    #[test]
    fn report_json_uses_inf_sentinel() {
        let a = img(8, 8, 1, 9);
        let r = QualityReport::measure(&a, &a, 100, 25, 255.0).unwrap();
        let json = r.to_json();
        assert!(json.contains("\"psnr_db\":\"inf\""));
        let back: QualityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.compression_ratio_pct, 25.0);
    }

    #[test]
    fn table_csv_roundtrip() {
        let rows = vec![
            AblationRow { blocks: 1, psnr_train: 31.25, ssim_train: 0.9, psnr_test: 30.5, ssim_test: 0.875, output_size: 128, compression_pct: 25.0 },
            AblationRow { blocks: 0, psnr_train: f64::INFINITY, ssim_train: 1.0, psnr_test: f64::NAN, ssim_test: f64::NAN, output_size: 256, compression_pct: 100.0 },
        ];
        for snake in [false, true] {
            let text = write_ablation_csv(&rows, snake);
            let back = read_ablation_csv(&text).unwrap();
            assert_eq!(write_ablation_csv(&back, snake), text);
            assert_eq!(back[0], rows[0]);
            assert!(back[1].psnr_test.is_nan());
        }
        let text = write_ablation_csv(&rows, false);
        assert!(text.starts_with("Blocks,PSNR Train,SSIM Train,PSNR Test,SSIM Test,Output Size,Compression\n"));
    }

    #[test]
    fn mean_psnr_skips_infinite() {
        assert_eq!(mean_finite_psnr(&[f64::INFINITY, 30.0, 40.0]), 35.0);
        assert_eq!(mean_finite_psnr(&[f64::INFINITY]), f64::INFINITY);
    }
}
