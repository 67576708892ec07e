use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::reconstruct;
use super::model::{build_model, Model, ModelConfig};
use super::optim::{backward_and_step, AdamState};
use super::tensor::{loss_mse, Tensor};
use super::ModelError;
use crate::metrics::{self, QualityReport, AblationRow};
use crate::raster::{resize_nearest, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub val_split: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Peak value used when reporting PSNR.
    #[serde(default = "default_psnr_max")]
    pub psnr_max: f64,
}

fn default_psnr_max() -> f64 {
    255.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 25, val_split: 0.20, learning_rate: 1e-3, seed: 0, psnr_max: 255.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.val_split > 0.0 && self.val_split < 1.0) {
            return Err(ModelError::InvalidConfig(format!("val_split {} outside (0, 1)", self.val_split)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(ModelError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Loss after one epoch, in normalized [0, 1] pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub curve: Vec<EpochStats>,
    pub train_quality: QualityReport,
    pub test_quality: QualityReport,
    pub train_count: usize,
    pub val_count: usize,
    pub parameter_count: usize,
    pub embedding_side: u32,
    pub compression_ratio_pct: f64,
    /// Final validation MSE is at most half of the epoch-1 value.
    pub converged: bool,
}

pub const CURVE_CSV_HEADER: &str = "epoch,train_mse,val_mse";

impl TrainingReport {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        for e in &self.curve {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, e.val_mse));
        }
        out
    }

    pub fn ablation_row(&self) -> AblationRow {
        AblationRow {
            blocks: self.model_config.blocks,
            psnr_train: self.train_quality.psnr_db,
            ssim_train: self.train_quality.ssim,
            psnr_test: self.test_quality.psnr_db,
            ssim_test: self.test_quality.ssim,
            output_size: self.embedding_side,
            compression_pct: self.compression_ratio_pct,
        }
    }
}

fn prepare(dataset: &[Image], config: &ModelConfig) -> Result<Vec<Image>, ModelError> {
    let side = config.input_side;
    dataset
        .iter()
        .map(|img| {
            if img.channels() != config.image_channels {
                return Err(ModelError::ShapeMismatch(format!(
                    "dataset image has {} channels, model expects {}",
                    img.channels(),
                    config.image_channels
                )));
            }
            if img.width() == side && img.height() == side {
                Ok(img.clone())
            } else {
                Ok(resize_nearest(img, side, side).expect("positive side"))
            }
        })
        .collect()
}

/// Mean quality over a split, with per-image byte accounting for the
/// unquantized embedding (one byte per embedding sample).
pub fn evaluate(model: &Model, images: &[&Image], psnr_max: f64) -> Result<QualityReport, ModelError> {
    let c = model.config.image_channels as u64;
    let side = model.config.input_side as u64;
    let e = model.embedding_side() as u64;
    let (bytes_original, bytes_encoded) = (c * side * side, c * e * e);
    let mut mse_sum = 0.0;
    let mut psnrs = Vec::with_capacity(images.len());
    let mut ssim_sum = 0.0;
    let ssim_ok = side as usize >= metrics::SSIM_WINDOW;
    for img in images {
        let recon = reconstruct(model, img)?;
        let m = metrics::mse(img, &recon)?;
        mse_sum += m;
        psnrs.push(metrics::psnr_from_mse(m, psnr_max));
        if ssim_ok {
            ssim_sum += metrics::ssim(img, &recon)?;
        }
    }
    let n = images.len().max(1) as f64;
    Ok(QualityReport {
        mse: mse_sum / n,
        psnr_db: metrics::mean_finite_psnr(&psnrs),
        ssim: if ssim_ok { ssim_sum / n } else { f64::NAN },
        bytes_original,
        bytes_encoded,
        compression_ratio_pct: metrics::compression_ratio_bytes(bytes_original, bytes_encoded)?,
        bitrate_bpp: metrics::bitrate_bpp(bytes_encoded, side * side)?,
    })
}

fn mean_loss(model: &Model, images: &[&Image]) -> Result<f64, ModelError> {
    let mut sum = 0.0;
    for chunk in images.chunks(32) {
        let batch = Tensor::from_images(chunk)?;
        let (recon, _) = model.forward(&batch)?;
        sum += loss_mse(&recon, &batch)? * chunk.len() as f64;
    }
    Ok(sum / images.len() as f64)
}

/// Trains a model on `dataset` and reports curves and split quality.
pub fn train(model_config: &ModelConfig, train_config: &TrainConfig, dataset: &[Image]) -> Result<(Model, TrainingReport), ModelError> {
    train_with_progress(model_config, train_config, dataset, |_| {})
}

pub fn train_with_progress(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    dataset: &[Image],
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Model, TrainingReport), ModelError> {
    train_config.validate()?;
    let mut model = build_model(model_config)?;
    if dataset.len() < 2 * train_config.batch_size {
        return Err(ModelError::DatasetTooSmall { have: dataset.len(), need: 2 * train_config.batch_size });
    }
    let images = prepare(dataset, model_config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((images.len() as f64 * train_config.val_split).round() as usize).clamp(1, images.len() - 1);
    let val: Vec<&Image> = order[..n_val].iter().map(|&i| &images[i]).collect();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();

    let mut state = AdamState::new(&model, train_config.learning_rate);
    let mut curve = Vec::with_capacity(train_config.epochs);
    for epoch in 1..=train_config.epochs {
        train_idx.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in train_idx.chunks(train_config.batch_size) {
            let batch_images: Vec<&Image> = chunk.iter().map(|&i| &images[i]).collect();
            let batch = Tensor::from_images(&batch_images)?;
            weighted += backward_and_step(&mut model, &batch, &mut state)? * chunk.len() as f64;
        }
        let stats = EpochStats { epoch, train_mse: weighted / train_idx.len() as f64, val_mse: mean_loss(&model, &val)? };
        if !stats.val_mse.is_finite() {
            return Err(ModelError::NonFiniteLoss { step: state.step, loss: stats.val_mse });
        }
        on_epoch(&stats);
        curve.push(stats);
    }

    let train_images: Vec<&Image> = train_idx.iter().map(|&i| &images[i]).collect();
    let converged = match (curve.first(), curve.last()) {
        (Some(first), Some(last)) if curve.len() > 1 => last.val_mse <= 0.5 * first.val_mse,
        _ => false,
    };
    let report = TrainingReport {
        model_config: *model_config,
        train_config: *train_config,
        train_quality: evaluate(&model, &train_images, train_config.psnr_max)?,
        test_quality: evaluate(&model, &val, train_config.psnr_max)?,
        train_count: train_images.len(),
        val_count: val.len(),
        parameter_count: model.parameter_count(),
        embedding_side: model.embedding_side(),
        compression_ratio_pct: metrics::compression_ratio_spatial(model_config.input_side, model.embedding_side())?,
        converged,
        curve,
    };
    Ok((model, report))
}

/// Ablation result: one row (and full report) per block count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub rows: Vec<AblationRow>,
    pub reports: Vec<TrainingReport>,
}

/// Architecture-only rows (output size and compression) with metric columns
/// left unmeasured.
pub fn ablation_plan(blocks: &[u32], input_side: u32) -> Result<Vec<AblationRow>, ModelError> {
    blocks
        .iter()
        .map(|&b| {
            let cfg = ModelConfig { blocks: b, input_side, ..ModelConfig::default() };
            cfg.validate()?;
            Ok(AblationRow {
                blocks: b,
                psnr_train: f64::NAN,
                ssim_train: f64::NAN,
                psnr_test: f64::NAN,
                ssim_test: f64::NAN,
                output_size: cfg.embedding_side(),
                compression_pct: metrics::compression_ratio_spatial(input_side, cfg.embedding_side())?,
            })
        })
        .collect()
}

/// Trains one model per block count with otherwise identical settings.
pub fn run_ablation(
    blocks: &[u32],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    dataset: &[Image],
    mut on_epoch: impl FnMut(u32, &EpochStats),
) -> Result<Ablation, ModelError> {
    if blocks.is_empty() {
        return Err(ModelError::InvalidConfig("empty block list".into()));
    }
    let mut rows = Vec::with_capacity(blocks.len());
    let mut reports = Vec::with_capacity(blocks.len());
    for &b in blocks {
        let cfg = ModelConfig { blocks: b, ..*model_config };
        let (_, report) = train_with_progress(&cfg, train_config, dataset, |s| on_epoch(b, s))?;
        rows.push(report.ablation_row());
        reports.push(report);
    }
    Ok(Ablation { rows, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::generate_corpus;

    #[test]
    fn plan_rows() {
        let rows = ablation_plan(&[0, 1, 2, 3, 4, 5], 256).unwrap();
        let pct: Vec<String> = rows.iter().map(|r| metrics::format_pct(r.compression_pct)).collect();
        assert_eq!(pct, ["100.00", "25.00", "6.25", "1.56", "0.39", "0.10"]);
        assert_eq!(rows.iter().map(|r| r.output_size).collect::<Vec<_>>(), [256, 128, 64, 32, 16, 8]);
        assert_eq!(ablation_plan(&[2], 64).unwrap().len(), 1);
        assert!(ablation_plan(&[3], 12).is_err());
    }

    #[test]
    fn dataset_too_small() {
        let data = generate_corpus(9, 16, 3, 1).unwrap();
        let tc = TrainConfig { batch_size: 5, epochs: 1, ..Default::default() };
        let mc = ModelConfig { blocks: 1, input_side: 16, base_width: 4, ..Default::default() };
        assert!(matches!(train(&mc, &tc, &data), Err(ModelError::DatasetTooSmall { have: 9, need: 10 })));
    }

    #[test]
    fn bad_train_config() {
        let data = generate_corpus(10, 16, 3, 1).unwrap();
        let mc = ModelConfig { blocks: 1, input_side: 16, base_width: 4, ..Default::default() };
        for tc in [
            TrainConfig { val_split: 0.0, ..Default::default() },
            TrainConfig { val_split: 1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(matches!(train(&mc, &tc, &data), Err(ModelError::InvalidConfig(_))));
        }
    }

    #[test]
    fn small_run_is_deterministic_and_well_formed() {
        let data = generate_corpus(12, 16, 3, 5).unwrap();
        let tc = TrainConfig { epochs: 3, batch_size: 4, seed: 3, ..Default::default() };
        let mc = ModelConfig { blocks: 1, input_side: 16, base_width: 4, seed: 2, ..Default::default() };
        let (model_a, a) = train(&mc, &tc, &data).unwrap();
        let (model_b, b) = train(&mc, &tc, &data).unwrap();
        assert_eq!(model_a, model_b);
        assert_eq!(a, b);
        assert_eq!(a.curve.len(), 3);
        assert_eq!((a.train_count, a.val_count), (10, 2));
        assert_eq!(a.compression_ratio_pct, 25.0);
        assert_eq!(a.embedding_side, 8);
        let csv = a.curve_csv();
        assert!(csv.starts_with("epoch,train_mse,val_mse\n1,"));
        assert_eq!(csv.lines().count(), 4);
        for line in csv.lines().skip(1) {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells.len(), 3);
        }
    }

    #[test]
    fn resizes_off_size_inputs() {
        let data = generate_corpus(4, 24, 3, 5).unwrap();
        let tc = TrainConfig { epochs: 1, batch_size: 2, ..Default::default() };
        let mc = ModelConfig { blocks: 1, input_side: 16, base_width: 2, ..Default::default() };
        assert!(train(&mc, &tc, &data).is_ok());
        let gray = generate_corpus(4, 16, 1, 5).unwrap();
        assert!(matches!(train(&mc, &tc, &gray), Err(ModelError::ShapeMismatch(_))));
    }
}
