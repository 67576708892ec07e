use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::raster::Image;

/// Dense `(n, c, h, w)` tensor of doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self, ModelError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(ModelError::ShapeMismatch(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Stacks images (same shape) into a batch scaled to [0, 1], planar layout.
    pub fn from_images(images: &[&Image]) -> Result<Self, ModelError> {
        let first = images.first().ok_or_else(|| ModelError::ShapeMismatch("empty batch".into()))?;
        let (w, h, c) = (first.width() as usize, first.height() as usize, first.channels() as usize);
        let mut data = Vec::with_capacity(images.len() * c * h * w);
        for img in images {
            if !img.same_shape(first) {
                return Err(ModelError::ShapeMismatch("images in a batch differ in shape".into()));
            }
            data.extend(image_to_planar(img));
        }
        Self::new([images.len(), c, h, w], data)
    }

    /// Converts every sample back to an 8-bit image (clamp, scale by 255, round).
    pub fn to_images(&self) -> Vec<Image> {
        (0..self.shape[0]).map(|i| planar_to_image(self.sample(i), self.shape[1], self.shape[2], self.shape[3])).collect()
    }
}

pub(crate) fn image_to_planar(img: &Image) -> Vec<f64> {
    let (w, h, c) = (img.width() as usize, img.height() as usize, img.channels() as usize);
    let s = img.samples();
    let mut out = vec![0.0; c * h * w];
    for (i, &v) in s.iter().enumerate() {
        let (p, ch) = (i / c, i % c);
        out[ch * h * w + p] = v as f64 / 255.0;
    }
    out
}

pub(crate) fn planar_to_image(data: &[f64], c: usize, h: usize, w: usize) -> Image {
    let mut samples = vec![0u8; c * h * w];
    for ch in 0..c {
        for p in 0..h * w {
            samples[p * c + ch] = (data[ch * h * w + p].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    Image::new(w as u32, h as u32, c as u8, samples).expect("shape checked by caller")
}

/// Mean squared difference over all elements.
pub fn loss_mse(reconstruction: &Tensor, target: &Tensor) -> Result<f64, ModelError> {
    if reconstruction.shape != target.shape {
        return Err(ModelError::ShapeMismatch(format!("{:?} vs {:?}", reconstruction.shape, target.shape)));
    }
    let sum: f64 = reconstruction.data.iter().zip(&target.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / reconstruction.data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let a = Tensor::new([1, 1, 2, 2], vec![0.5; 4]).unwrap();
        let b = Tensor::zeros([1, 1, 2, 2]);
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_mse(&a, &b).unwrap(), 0.25);
        assert!(loss_mse(&a, &Tensor::zeros([1, 1, 4, 1])).is_err());
        assert!(Tensor::new([1, 1, 2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn image_conversion_roundtrip() {
        let img = Image::new(2, 2, 3, (0..12).map(|i| (i * 20) as u8).collect()).unwrap();
        let t = Tensor::from_images(&[&img, &img]).unwrap();
        assert_eq!(t.shape(), [2, 3, 2, 2]);
        assert_eq!(t.sample(0)[4], 20.0 / 255.0);
        assert_eq!(t.to_images(), vec![img.clone(), img]);
    }
}
