//! Typed transmission units: captions, detection cutouts and packaged images.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{encode_embedding, Model};
use crate::codecs::{dct_encode, huffman_image_decode, predictive_encode, CodecError, EncodedBlob};
use crate::metrics::{compression_ratio_bytes, MetricsError};
use crate::raster::{crop, write_pnm, Annotation, Image};

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Caption,
    Cutout,
    AeEmbedding,
    LossyImage,
    LosslessImage,
    RawImage,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 6] = [
        PayloadKind::Caption,
        PayloadKind::Cutout,
        PayloadKind::AeEmbedding,
        PayloadKind::LossyImage,
        PayloadKind::LosslessImage,
        PayloadKind::RawImage,
    ];

    /// Tie-break rank used by the hierarchical planner.
    pub fn rank(self) -> u8 {
        self as u8
    }

    /// Captions, cutouts, embeddings and lossy images carry actionable content
    /// in their own right; lossless and raw images are the full-fidelity tail.
    pub fn is_intelligence(self) -> bool {
        matches!(self, PayloadKind::Caption | PayloadKind::Cutout | PayloadKind::AeEmbedding | PayloadKind::LossyImage)
    }

    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Caption => "caption",
            PayloadKind::Cutout => "cutout",
            PayloadKind::AeEmbedding => "ae_embedding",
            PayloadKind::LossyImage => "lossy_image",
            PayloadKind::LosslessImage => "lossless_image",
            PayloadKind::RawImage => "raw_image",
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PayloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PayloadKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown payload kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub kind: PayloadKind,
    pub bytes: Vec<u8>,
    pub source_image_id: String,
    pub meta: BTreeMap<String, String>,
}

impl Payload {
    pub fn new(kind: PayloadKind, bytes: Vec<u8>, source_image_id: impl Into<String>) -> Self {
        Self { kind, bytes, source_image_id: source_image_id.into(), meta: BTreeMap::new() }
    }

    pub fn byte_size(&self) -> usize {
        self.bytes.len()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cutouts {
    pub payloads: Vec<Payload>,
    /// Annotations at or above the threshold whose box missed the frame.
    pub skipped: usize,
}

/// One losslessly coded crop per annotation with `confidence >= min_confidence`.
pub fn extract_cutouts(image: &Image, annotations: &[Annotation], min_confidence: f64) -> Result<Cutouts, CodecError> {
    let mut payloads = Vec::new();
    let mut skipped = 0;
    for (i, ann) in annotations.iter().enumerate() {
        if ann.confidence < min_confidence {
            continue;
        }
        let Ok(piece) = crop(image, &ann.bbox) else {
            skipped += 1;
            continue;
        };
        let clipped = ann.bbox.clip(image.width(), image.height()).expect("crop succeeded");
        let blob = predictive_encode(&piece)?;
        payloads.push(
            Payload::new(PayloadKind::Cutout, blob.to_bytes(), ann.image_id.clone())
                .with_meta("annotation", i)
                .with_meta("class", &ann.class_name)
                .with_meta("confidence", ann.confidence)
                .with_meta(
                    "bbox",
                    format!("{},{},{},{}", clipped.x_min, clipped.y_min, clipped.x_max, clipped.y_max),
                ),
        );
    }
    Ok(Cutouts { payloads, skipped })
}

/// Template sentence such as "5 cars, 2 buildings detected.".
pub fn caption_text(annotations: &[Annotation]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in annotations {
        *counts.entry(a.class_name.as_str()).or_default() += 1;
    }
    if counts.is_empty() {
        return "no objects detected.".to_string();
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let parts: Vec<String> = entries
        .iter()
        .map(|&(name, n)| if n == 1 { format!("1 {name}") } else { format!("{n} {name}s") })
        .collect();
    format!("{} detected.", parts.join(", "))
}

pub fn generate_caption(annotations: &[Annotation], image_id: &str) -> Payload {
    Payload::new(PayloadKind::Caption, caption_text(annotations).into_bytes(), image_id)
}

#[derive(Debug, Clone, Copy)]
pub enum ImageMethod<'a> {
    Raw,
    Lossless,
    Dct(u8),
    Ae(&'a Model),
}

/// Wraps an image as a payload; blob payloads include their container header.
pub fn package_image(image: &Image, image_id: &str, method: ImageMethod<'_>) -> Result<Payload, crate::Error> {
    let (kind, bytes, quality) = match method {
        ImageMethod::Raw => (PayloadKind::RawImage, write_pnm(image), None),
        ImageMethod::Lossless => (PayloadKind::LosslessImage, predictive_encode(image)?.to_bytes(), None),
        ImageMethod::Dct(q) => (PayloadKind::LossyImage, dct_encode(image, q)?.to_bytes(), Some(q)),
        ImageMethod::Ae(model) => (PayloadKind::AeEmbedding, encode_embedding(model, image)?.to_bytes(), None),
    };
    let mut p = Payload::new(kind, bytes, image_id)
        .with_meta("width", image.width())
        .with_meta("height", image.height())
        .with_meta("channels", image.channels());
    if let Some(q) = quality {
        p = p.with_meta("quality", q);
    }
    Ok(p)
}

/// Decodes an image-bearing payload back to pixels (raw PNM or any blob the
/// codecs module understands without side information).
pub fn decode_image_payload(payload: &Payload) -> Result<Image, crate::Error> {
    match payload.kind {
        PayloadKind::RawImage => Ok(crate::raster::read_pnm(&payload.bytes)?),
        PayloadKind::Caption | PayloadKind::AeEmbedding => {
            Err(CodecError::MalformedBlob(format!("{} payload is not self-decodable", payload.kind)).into())
        }
        _ => {
            let blob = EncodedBlob::from_bytes(&payload.bytes)?;
            Ok(match blob.codec {
                crate::codecs::CodecId::Huffman => huffman_image_decode(&blob)?,
                crate::codecs::CodecId::Predictive => crate::codecs::predictive_decode(&blob)?,
                crate::codecs::CodecId::Dct => crate::codecs::dct_decode(&blob)?,
                crate::codecs::CodecId::AeEmbedding => {
                    return Err(CodecError::MalformedBlob("embedding blob needs a model".into()).into())
                }
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: PayloadKind,
    pub byte_size: u64,
    pub ratio_pct: f64,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub image_id: String,
    pub payloads: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest needs at least one payload")]
    Empty,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Ratios are taken against `reference_bytes`, normally the raw PNM size of
/// the source image, so a raw payload lists exactly 100%.
pub fn manifest(image_id: &str, payloads: &[Payload], reference_bytes: u64) -> Result<Manifest, ManifestError> {
    if payloads.is_empty() {
        return Err(ManifestError::Empty);
    }
    let entries = payloads
        .iter()
        .map(|p| {
            Ok(ManifestEntry {
                kind: p.kind,
                byte_size: p.byte_size() as u64,
                ratio_pct: compression_ratio_bytes(reference_bytes, p.byte_size() as u64)?,
                meta: p.meta.clone(),
            })
        })
        .collect::<Result<_, MetricsError>>()?;
    Ok(Manifest { image_id: image_id.to_string(), payloads: entries })
}

pub fn build_manifest(image_id: &str, payloads: &[Payload], reference_bytes: u64) -> Result<Vec<u8>, ManifestError> {
    let m = manifest(image_id, payloads, reference_bytes)?;
    Ok(serde_json::to_vec_pretty(&m)?)
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Manifest, ManifestError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Raw PNM byte count for an image of the given shape.
pub fn raw_reference_bytes(image: &Image) -> u64 {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", image.width(), image.height());
    (header.len() + image.samples().len()) as u64
}
