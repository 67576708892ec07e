//! Raster images, bounding boxes and the file formats used to move them around.

mod annotations;
mod pnm;
mod scene;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotations::{read_annotations, write_annotations};
pub use pnm::{read_pnm, write_pnm};
pub use scene::{generate_corpus, generate_scene, Background, SceneSpec, CLASS_NAMES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("invalid image dimensions {width}x{height}x{channels}")]
    InvalidDimensions { width: u32, height: u32, channels: u8 },
    #[error("sample buffer holds {actual} values, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("pnm: {reason} at byte offset {offset}")]
    Pnm { offset: usize, reason: String },
    #[error("empty intersection between box and image")]
    EmptyIntersection,
    #[error("zero-area box ({x_min},{y_min})-({x_max},{y_max})")]
    InvalidBox { x_min: i64, y_min: i64, x_max: i64, y_max: i64 },
    #[error("annotations line {line}: {reason}")]
    Annotation { line: usize, reason: String },
    #[error("could only place {placed} of {requested} objects without overlap")]
    ScenePlacement { placed: usize, requested: usize },
}

/// 8-bit raster, row-major with interleaved channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    samples: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .field("samples", &format_args!("[{} bytes]", self.samples.len()))
            .finish()
    }
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, samples: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || !matches!(channels, 1 | 3) {
            return Err(RasterError::InvalidDimensions { width, height, channels });
        }
        let expected = width as usize * height as usize * channels as usize;
        if samples.len() != expected {
            return Err(RasterError::SampleCount { expected, actual: samples.len() });
        }
        Ok(Self { width, height, channels, samples })
    }

    /// Image with every sample set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, RasterError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.samples[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let i = self.index(x, y, c);
        self.samples[i] = value;
    }

    /// Copy of a single channel as a grayscale image.
    pub fn channel(&self, c: u8) -> Image {
        let samples = self
            .samples
            .iter()
            .skip(c as usize)
            .step_by(self.channels as usize)
            .copied()
            .collect();
        Image { width: self.width, height: self.height, channels: 1, samples }
    }
}

/// Axis-aligned box in pixel coordinates; min corner inclusive, max corner exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl BoundingBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Result<Self, RasterError> {
        if x_min >= x_max || y_min >= y_max {
            return Err(RasterError::InvalidBox { x_min, y_min, x_max, y_max });
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    /// Intersection with the `width`×`height` image frame, `None` when empty.
    pub fn clip(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let x_min = self.x_min.max(0);
        let y_min = self.y_min.max(0);
        let x_max = self.x_max.min(width as i64);
        let y_max = self.y_max.min(height as i64);
        BoundingBox::new(x_min, y_min, x_max, y_max).ok()
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x_min < other.x_max && other.x_min < self.x_max && self.y_min < other.y_max && other.y_min < self.y_max
    }

    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }
}

/// One detection attached to an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image_id: String,
    pub bbox: BoundingBox,
    pub class_name: String,
    pub confidence: f64,
}

/// Copies the region of `image` covered by `bbox`, clipping the box to the frame.
pub fn crop(image: &Image, bbox: &BoundingBox) -> Result<Image, RasterError> {
    let clipped = bbox.clip(image.width, image.height).ok_or(RasterError::EmptyIntersection)?;
    let (x0, y0) = (clipped.x_min as usize, clipped.y_min as usize);
    let (w, h) = (clipped.width() as usize, clipped.height() as usize);
    let ch = image.channels as usize;
    let stride = image.width as usize * ch;
    let mut samples = Vec::with_capacity(w * h * ch);
    for y in y0..y0 + h {
        let start = y * stride + x0 * ch;
        samples.extend_from_slice(&image.samples[start..start + w * ch]);
    }
    Image::new(w as u32, h as u32, image.channels, samples)
}

/// Nearest-neighbour resampling; source index is `floor(i * src / new)`.
pub fn resize_nearest(image: &Image, new_width: u32, new_height: u32) -> Result<Image, RasterError> {
    if new_width == 0 || new_height == 0 {
        return Err(RasterError::InvalidDimensions {
            width: new_width,
            height: new_height,
            channels: image.channels,
        });
    }
    let ch = image.channels as usize;
    let xs: Vec<usize> = (0..new_width as u64)
        .map(|i| (i * image.width as u64 / new_width as u64) as usize)
        .collect();
    let mut samples = Vec::with_capacity(new_width as usize * new_height as usize * ch);
    for j in 0..new_height as u64 {
        let sy = (j * image.height as u64 / new_height as u64) as usize;
        let row = &image.samples[sy * image.width as usize * ch..(sy + 1) * image.width as usize * ch];
        for &sx in &xs {
            samples.extend_from_slice(&row[sx * ch..sx * ch + ch]);
        }
    }
    Image::new(new_width, new_height, image.channels, samples)
}
