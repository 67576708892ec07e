//! Residual convolutional autoencoder.
//!
//! ```text
//! input (C, S) ─ down_0 ─ down_1 ─ … ─ down_{B-1} ─ 1×1 projection ─ embedding (C, S/2^B)
//!                  │        │                                            │
//!                  │        └──────────────(paper mode)───────────┐   up_{B-1}
//!                  └─────────────(paper mode)──────────────┐      └─▶  …
//!                                                          └────────▶ up_0 ─ 3×3 conv ─ sigmoid
//! ```
//!
//! Down blocks are stride-2 3×3 convolutions with ReLU; up blocks are
//! nearest ×2 upsampling followed by a 3×3 convolution with ReLU. Level `k`
//! uses `min(base_width · 2^k, 64)` channels. In paper mode the output of
//! down block `k` is added to the input of up block `k` for every `k` below
//! the bottleneck level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu_backward, relu_in_place, sigmoid, upsample2, upsample2_backward, Conv2d, ConvGrad};
use super::tensor::Tensor;
use super::ModelError;

pub const MAX_BLOCKS: u32 = 5;
pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// Encoder-to-decoder additive skips, as drawn in the reference architecture.
    Paper,
    /// No skips: the embedding is the only path to the decoder.
    CodecHonest,
}

impl std::str::FromStr for SkipMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(SkipMode::Paper),
            "codec_honest" | "codec-honest" => Ok(SkipMode::CodecHonest),
            other => Err(format!("unknown skip mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub blocks: u32,
    pub input_side: u32,
    pub image_channels: u8,
    pub base_width: u32,
    pub seed: u64,
    pub skip_mode: SkipMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { blocks: 1, input_side: 256, image_channels: 3, base_width: 16, seed: 0, skip_mode: SkipMode::CodecHonest }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.blocks > MAX_BLOCKS {
            return Err(ModelError::InvalidConfig(format!("blocks {} outside [0, {MAX_BLOCKS}]", self.blocks)));
        }
        if !matches!(self.image_channels, 1 | 3) {
            return Err(ModelError::InvalidConfig(format!("image_channels {}", self.image_channels)));
        }
        if self.base_width == 0 {
            return Err(ModelError::InvalidConfig("base_width must be positive".into()));
        }
        let factor = 1u32 << self.blocks;
        if self.input_side == 0 || !self.input_side.is_multiple_of(factor) {
            return Err(ModelError::InvalidConfig(format!(
                "input side {} not divisible by 2^{} = {factor}",
                self.input_side, self.blocks
            )));
        }
        Ok(())
    }

    pub fn embedding_side(&self) -> u32 {
        self.input_side >> self.blocks
    }

    /// Channel width at level `k`.
    pub fn width(&self, k: u32) -> usize {
        ((self.base_width as usize) << k).min(MAX_WIDTH)
    }

    pub fn has_skips(&self) -> bool {
        self.skip_mode == SkipMode::Paper && self.blocks >= 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    /// Down blocks, level 0 first.
    pub encoder: Vec<Conv2d>,
    pub bottleneck: Conv2d,
    /// Up blocks in execution order: level `B-1` first, level 0 last.
    pub decoder: Vec<Conv2d>,
    pub output: Conv2d,
}

/// Builds a freshly initialized model.
pub fn build_model(config: &ModelConfig) -> Result<Model, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.image_channels as usize;
    let b = config.blocks;
    let mut encoder = Vec::with_capacity(b as usize);
    let mut in_ch = c;
    for k in 0..b {
        let out = config.width(k);
        encoder.push(Conv2d::new(in_ch, out, 3, 2, &mut rng));
        in_ch = out;
    }
    let bottleneck = Conv2d::new(in_ch, c, 1, 1, &mut rng);
    let mut decoder = Vec::with_capacity(b as usize);
    for k in (0..b).rev() {
        let input = if k == b - 1 { c } else { config.width(k) };
        let out = config.width(k.saturating_sub(1));
        decoder.push(Conv2d::new(input, out, 3, 1, &mut rng));
    }
    let final_in = if b == 0 { c } else { config.width(0) };
    let output = Conv2d::new(final_in, c, 3, 1, &mut rng);
    Ok(Model { config: *config, encoder, bottleneck, decoder, output })
}

/// Per-sample activations kept for the backward pass.
pub(crate) struct Cache {
    enc_cols: Vec<Vec<f64>>,
    enc_out: Vec<Vec<f64>>,
    bottleneck_cols: Vec<f64>,
    dec_cols: Vec<Vec<f64>>,
    dec_out: Vec<Vec<f64>>,
    out_cols: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

/// Parameter gradients laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<ConvGrad>,
    pub bottleneck: ConvGrad,
    pub decoder: Vec<ConvGrad>,
    pub output: ConvGrad,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for g in self.encoder.iter().chain([&self.bottleneck]).chain(&self.decoder).chain([&self.output]) {
            out.push(&g.weight);
            out.push(&g.bias);
        }
        out
    }
}

impl Model {
    fn side(&self) -> usize {
        self.config.input_side as usize
    }

    fn channels(&self) -> usize {
        self.config.image_channels as usize
    }

    pub fn embedding_side(&self) -> u32 {
        self.config.embedding_side()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Conv2d> {
        self.encoder.iter().chain([&self.bottleneck]).chain(&self.decoder).chain([&self.output])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Conv2d> {
        self.encoder
            .iter_mut()
            .chain([&mut self.bottleneck])
            .chain(self.decoder.iter_mut())
            .chain([&mut self.output])
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(Conv2d::parameter_count).sum()
    }

    /// Weight and bias buffers in declaration order.
    pub fn parameters(&self) -> Vec<&Vec<f64>> {
        self.layers().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn zero_grad(&self) -> Gradients {
        Gradients {
            encoder: self.encoder.iter().map(Conv2d::zero_grad).collect(),
            bottleneck: self.bottleneck.zero_grad(),
            decoder: self.decoder.iter().map(Conv2d::zero_grad).collect(),
            output: self.output.zero_grad(),
        }
    }

    /// Level of the `j`-th decoder block in execution order.
    fn decoder_level(&self, j: usize) -> usize {
        self.config.blocks as usize - 1 - j
    }

    fn skip_into(&self, level: usize) -> bool {
        self.config.has_skips() && level + 1 < self.config.blocks as usize
    }

    /// Runs the encoder half on one planar sample; returns the embedding.
    pub(crate) fn encode_sample(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let mut side = self.side();
        for conv in &self.encoder {
            x = conv.forward(&x, side, side);
            relu_in_place(&mut x);
            side /= 2;
        }
        self.bottleneck.forward(&x, side, side)
    }

    /// Runs the decoder half from an embedding. Skip connections see zeros,
    /// which is exact for models without skips.
    pub(crate) fn decode_sample(&self, embedding: &[f64]) -> Vec<f64> {
        let mut d = embedding.to_vec();
        let mut side = self.embedding_side() as usize;
        for (j, conv) in self.decoder.iter().enumerate() {
            let level = self.decoder_level(j);
            let ch = if j == 0 { self.channels() } else { self.config.width(level as u32) };
            let up = upsample2(&d, ch, side, side);
            side *= 2;
            d = conv.forward(&up, side, side);
            relu_in_place(&mut d);
        }
        let mut out = self.output.forward(&d, side, side);
        out.iter_mut().for_each(|v| *v = sigmoid(*v));
        out
    }

    /// Forward pass for one planar sample, keeping what backward needs.
    pub(crate) fn forward_cached(&self, input: &[f64]) -> Cache {
        let b = self.config.blocks as usize;
        let mut side = self.side();
        let mut enc_cols = Vec::with_capacity(b);
        let mut enc_out: Vec<Vec<f64>> = Vec::with_capacity(b);
        for conv in &self.encoder {
            let x = enc_out.last().map_or(input, Vec::as_slice);
            let cols = conv.im2col(x, side, side);
            side /= 2;
            let mut y = conv.forward_cols(&cols, side * side);
            relu_in_place(&mut y);
            enc_cols.push(cols);
            enc_out.push(y);
        }
        let x = enc_out.last().map_or(input, Vec::as_slice);
        let bottleneck_cols = self.bottleneck.im2col(x, side, side);
        let mut d = self.bottleneck.forward_cols(&bottleneck_cols, side * side);

        let mut dec_cols = Vec::with_capacity(b);
        let mut dec_out = Vec::with_capacity(b);
        for (j, conv) in self.decoder.iter().enumerate() {
            let level = self.decoder_level(j);
            if self.skip_into(level) {
                for (v, e) in d.iter_mut().zip(&enc_out[level]) {
                    *v += e;
                }
            }
            let up = upsample2(&d, conv.in_channels, side, side);
            side *= 2;
            let cols = conv.im2col(&up, side, side);
            let mut y = conv.forward_cols(&cols, side * side);
            relu_in_place(&mut y);
            dec_cols.push(cols);
            dec_out.push(y.clone());
            d = y;
        }
        let out_cols = self.output.im2col(&d, side, side);
        let mut output = self.output.forward_cols(&out_cols, side * side);
        output.iter_mut().for_each(|v| *v = sigmoid(*v));
        Cache { enc_cols, enc_out, bottleneck_cols, dec_cols, dec_out, out_cols, output }
    }

    /// Backpropagates `grad_output` (dL/d reconstruction) through one sample.
    pub(crate) fn backward_sample(&self, cache: &Cache, grad_output: &[f64], grads: &mut Gradients) {
        let b = self.config.blocks as usize;
        let full = self.side();
        let mut g: Vec<f64> = grad_output.iter().zip(&cache.output).map(|(g, s)| g * s * (1.0 - s)).collect();
        g = self
            .output
            .backward(&cache.out_cols, &g, full, full, &mut grads.output, true)
            .expect("input grad requested");

        let mut skip_grads: Vec<Option<Vec<f64>>> = vec![None; b];
        let mut side = full;
        for j in (0..b).rev() {
            let level = self.decoder_level(j);
            let conv = &self.decoder[j];
            relu_backward(&mut g, &cache.dec_out[j]);
            let g_up = conv
                .backward(&cache.dec_cols[j], &g, side, side, &mut grads.decoder[j], true)
                .expect("input grad requested");
            side /= 2;
            g = upsample2_backward(&g_up, conv.in_channels, side, side);
            if self.skip_into(level) {
                skip_grads[level] = Some(g.clone());
            }
        }

        // g is now dL/d embedding
        let bottleneck_in_grad = self
            .bottleneck
            .backward(&cache.bottleneck_cols, &g, side, side, &mut grads.bottleneck, b > 0);
        let Some(mut g) = bottleneck_in_grad else { return };
        for k in (0..b).rev() {
            if let Some(s) = &skip_grads[k] {
                for (a, v) in g.iter_mut().zip(s) {
                    *a += v;
                }
            }
            relu_backward(&mut g, &cache.enc_out[k]);
            let in_side = side * 2;
            match self.encoder[k].backward(&cache.enc_cols[k], &g, in_side, in_side, &mut grads.encoder[k], k > 0) {
                Some(next) => g = next,
                None => break,
            }
            side = in_side;
        }
    }

    fn check_batch(&self, batch: &Tensor) -> Result<(), ModelError> {
        let [_, c, h, w] = batch.shape();
        if c != self.channels() || h != self.side() || w != self.side() {
            return Err(ModelError::ShapeMismatch(format!(
                "batch {:?} does not match model input ({}, {s}, {s})",
                batch.shape(),
                self.channels(),
                s = self.side()
            )));
        }
        Ok(())
    }

    /// Reconstruction and bottleneck embedding for every sample of `batch`.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Tensor), ModelError> {
        self.check_batch(batch)?;
        let n = batch.shape()[0];
        let (c, s, e) = (self.channels(), self.side(), self.embedding_side() as usize);
        let mut recon = Vec::with_capacity(batch.data().len());
        let mut emb = Vec::with_capacity(n * c * e * e);
        for i in 0..n {
            let z = self.encode_sample(batch.sample(i));
            let out = if self.config.has_skips() {
                self.forward_cached(batch.sample(i)).output
            } else {
                self.decode_sample(&z)
            };
            recon.extend(out);
            emb.extend(z);
        }
        Ok((Tensor::new([n, c, s, s], recon)?, Tensor::new([n, c, e, e], emb)?))
    }

    /// Mean-squared-error loss over the batch and its parameter gradients.
    pub fn loss_and_gradients(&self, batch: &Tensor) -> Result<(f64, Gradients), ModelError> {
        self.check_batch(batch)?;
        let n = batch.shape()[0];
        let total = batch.data().len() as f64;
        let mut grads = self.zero_grad();
        let mut sum = 0.0;
        for i in 0..n {
            let target = batch.sample(i);
            let cache = self.forward_cached(target);
            let grad: Vec<f64> = cache.output.iter().zip(target).map(|(o, t)| 2.0 * (o - t) / total).collect();
            sum += cache.output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
            self.backward_sample(&cache, &grad, &mut grads);
        }
        Ok((sum / total, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(blocks: u32, side: u32) -> ModelConfig {
        ModelConfig { blocks, input_side: side, ..ModelConfig::default() }
    }

    #[test]
    fn embedding_sides_at_256() {
        let sides: Vec<u32> = (0..=5).map(|b| cfg(b, 256).embedding_side()).collect();
        assert_eq!(sides, vec![256, 128, 64, 32, 16, 8]);
    }

    #[test]
    fn parameter_counts() {
        // conv(in, out, k) = in*out*k*k + out
        let counts: Vec<usize> = (0..=5).map(|b| build_model(&cfg(b, 256)).unwrap().parameter_count()).collect();
        assert_eq!(counts[0], 12 + 84);
        assert_eq!(counts[1], 448 + 51 + 448 + 435);
        assert_eq!(counts[2], 448 + 4640 + 99 + 448 + 2320 + 435);
        assert_eq!(counts[5], 162_198);
        assert!(counts.iter().all(|&c| c < 1_000_000));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_model(&cfg(3, 36)).is_err());
        assert!(build_model(&cfg(6, 256)).is_err());
        assert!(build_model(&ModelConfig { image_channels: 2, ..cfg(1, 8) }).is_err());
    }

    #[test]
    fn shapes_preserved_for_every_depth() {
        for skip_mode in [SkipMode::Paper, SkipMode::CodecHonest] {
            for b in 0..=5 {
                let model = build_model(&ModelConfig { skip_mode, ..cfg(b, 32) }).unwrap();
                let batch = Tensor::new([2, 3, 32, 32], (0..2 * 3 * 32 * 32).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
                let (recon, emb) = model.forward(&batch).unwrap();
                assert_eq!(recon.shape(), batch.shape());
                let s = 32 >> b;
                assert_eq!(emb.shape(), [2, 3, s, s]);
                assert!(recon.data().iter().all(|v| *v > 0.0 && *v < 1.0));
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let model = build_model(&cfg(1, 16)).unwrap();
        assert!(model.forward(&Tensor::zeros([1, 3, 8, 8])).is_err());
        assert!(model.forward(&Tensor::zeros([1, 1, 16, 16])).is_err());
    }

    #[test]
    fn cached_and_plain_forward_agree() {
        let model = build_model(&ModelConfig { skip_mode: SkipMode::CodecHonest, ..cfg(3, 16) }).unwrap();
        let x: Vec<f64> = (0..3 * 16 * 16).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
        let a = model.decode_sample(&model.encode_sample(&x));
        let b = model.forward_cached(&x).output;
        assert_eq!(a, b);
    }

    #[test]
    fn encoder_skips_change_output() {
        let honest = build_model(&ModelConfig { skip_mode: SkipMode::CodecHonest, ..cfg(2, 16) }).unwrap();
        let paper = Model { config: ModelConfig { skip_mode: SkipMode::Paper, ..honest.config }, ..honest.clone() };
        let x: Vec<f64> = (0..3 * 16 * 16).map(|i| ((i * 13) % 11) as f64 / 11.0).collect();
        assert_ne!(honest.forward_cached(&x).output, paper.forward_cached(&x).output);
    }
}
