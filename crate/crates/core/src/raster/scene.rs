//! Deterministic synthetic overhead scenes: textured ground with a few
//! non-overlapping objects, each with an exact annotation. The `urban`
//! background adds a road grid and small unannotated clutter.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Annotation, BoundingBox, Image, RasterError};

pub const CLASS_NAMES: [&str; 4] = ["building", "car", "ship", "storage_tank"];

const PLACEMENT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Flat,
    Gradient,
    Noise,
    /// Noise ground plus roads with dashed markings and small clutter.
    Urban,
}

impl std::str::FromStr for Background {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Background::Flat),
            "gradient" => Ok(Background::Gradient),
            "noise" => Ok(Background::Noise),
            "urban" => Ok(Background::Urban),
            other => Err(format!("unknown background '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub object_count: usize,
    pub background: Background,
}

impl SceneSpec {
    /// RGB scene with four objects on a textured background.
    pub fn new(seed: u64, width: u32, height: u32) -> Self {
        Self { seed, width, height, channels: 3, object_count: 4, background: Background::Urban }
    }

    pub fn image_id(&self) -> String {
        format!("scene-{}", self.seed)
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Rect,
    Ellipse,
}

struct ClassStyle {
    shape: Shape,
    // (min, max) extents as fractions of the shorter image side
    along: (f64, f64),
    across: (f64, f64),
    tint: [i32; 3],
}

fn style(class: usize) -> ClassStyle {
    match class {
        0 => ClassStyle { shape: Shape::Rect, along: (0.12, 0.25), across: (0.12, 0.25), tint: [0, 0, 0] },
        1 => ClassStyle { shape: Shape::Rect, along: (0.06, 0.10), across: (0.04, 0.06), tint: [18, -6, -6] },
        2 => ClassStyle { shape: Shape::Rect, along: (0.16, 0.30), across: (0.05, 0.09), tint: [-8, -8, 14] },
        _ => ClassStyle { shape: Shape::Ellipse, along: (0.08, 0.16), across: (0.0, 0.0), tint: [10, 10, -10] },
    }
}

fn extent(rng: &mut ChaCha8Rng, range: (f64, f64), side: u32) -> i64 {
    let lo = ((range.0 * side as f64).round() as i64).max(2);
    let hi = ((range.1 * side as f64).round() as i64).max(lo);
    rng.random_range(lo..=hi).min(side as i64)
}

#[allow(clippy::too_many_arguments)]
fn background_value(spec: &SceneSpec, base: [f64; 3], end: [f64; 3], lattice: &[f64], lattice_w: usize, x: u32, y: u32, c: usize) -> f64 {
    match spec.background {
        Background::Flat => base[c],
        Background::Gradient | Background::Noise | Background::Urban => {
            let tx = if spec.width > 1 { x as f64 / (spec.width - 1) as f64 } else { 0.0 };
            let ty = if spec.height > 1 { y as f64 / (spec.height - 1) as f64 } else { 0.0 };
            let t = 0.5 * (tx + ty);
            let mut v = base[c] + (end[c] - base[c]) * t;
            if spec.background != Background::Gradient {
                // bilinear value noise on an 8-pixel lattice, shared by all channels
                let (fx, fy) = (x as f64 / 8.0, y as f64 / 8.0);
                let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
                let (ux, uy) = (fx - ix as f64, fy - iy as f64);
                let at = |i: usize, j: usize| lattice[j * lattice_w + i];
                let top = at(ix, iy) * (1.0 - ux) + at(ix + 1, iy) * ux;
                let bottom = at(ix, iy + 1) * (1.0 - ux) + at(ix + 1, iy + 1) * ux;
                v += top * (1.0 - uy) + bottom * uy;
            }
            v
        }
    }
}

fn fill_rect(image: &mut Image, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
    let (w, h) = (image.width() as i64, image.height() as i64);
    for y in y0.max(0)..y1.min(h) {
        for x in x0.max(0)..x1.min(w) {
            for c in 0..image.channels() {
                let v = if image.channels() == 1 { color[0] } else { color[c as usize] };
                image.set(x as u32, y as u32, c, v);
            }
        }
    }
}

fn draw_urban(image: &mut Image, rng: &mut ChaCha8Rng) {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let side = w.min(h);
    let road = (side / 24).max(2);
    let dash = (side / 16).max(2);
    let asphalt = rng.random_range(45..80u8);
    let mark = rng.random_range(190..230u8);
    for vertical in [false, true] {
        let (len, across) = if vertical { (h, w) } else { (w, h) };
        for _ in 0..rng.random_range(1..=(side / 48).max(1) + 1) {
            let at = rng.random_range(0..(across - road).max(1));
            let band = |a: i64, b: i64, c: i64, d: i64| if vertical { (a, c, b, d) } else { (c, a, d, b) };
            let (x0, y0, x1, y1) = band(at, at + road, 0, len);
            fill_rect(image, x0, y0, x1, y1, [asphalt; 3]);
            let mid = at + road / 2;
            let mut t = 0;
            while t < len {
                let (x0, y0, x1, y1) = band(mid, mid + 1, t, t + dash / 2 + 1);
                fill_rect(image, x0, y0, x1, y1, [mark; 3]);
                t += dash;
            }
        }
    }
    let small = (side / 32).max(1);
    for _ in 0..(w * h / 200) {
        let (bw, bh) = (rng.random_range(small..=2 * small), rng.random_range(small..=2 * small));
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let color: [u8; 3] = std::array::from_fn(|_| rng.random_range(20..235u8));
        fill_rect(image, x0, y0, x0 + bw, y0 + bh, color);
    }
}

/// Renders the scene described by `spec`; identical specs give identical output.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Image, Vec<Annotation>), RasterError> {
    let (w, h, ch) = (spec.width, spec.height, spec.channels);
    let mut image = Image::filled(w, h, ch, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(70.0..130.0));
    let end: [f64; 3] = std::array::from_fn(|c| (base[c] + rng.random_range(-40.0..40.0)).clamp(40.0, 170.0));
    let lattice_w = w as usize / 8 + 2;
    let lattice_h = h as usize / 8 + 2;
    let lattice: Vec<f64> = (0..lattice_w * lattice_h).map(|_| rng.random_range(-12.0..12.0)).collect();
    let grain = matches!(spec.background, Background::Noise | Background::Urban);
    for y in 0..h {
        for x in 0..w {
            let jitter = if grain { rng.random_range(-2.0..=2.0) } else { 0.0 };
            for c in 0..ch {
                let v = background_value(spec, base, end, &lattice, lattice_w, x, y, c as usize) + jitter;
                image.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }

    if spec.background == Background::Urban {
        draw_urban(&mut image, &mut rng);
    }

    // distinct object intensities, kept clear of the ground level
    let ground = base.iter().sum::<f64>() / 3.0;
    let mut levels: Vec<i32> = (0..64).map(|k| 4 * k + 2).filter(|&l| (l as f64 - ground).abs() > 28.0).collect();
    levels.shuffle(&mut rng);
    if spec.object_count > levels.len() {
        return Err(RasterError::ScenePlacement { placed: 0, requested: spec.object_count });
    }

    let side = w.min(h);
    let mut annotations: Vec<Annotation> = Vec::with_capacity(spec.object_count);
    for (i, &level) in levels.iter().take(spec.object_count).enumerate() {
        let class = rng.random_range(0..CLASS_NAMES.len());
        let st = style(class);
        let (bw, bh) = match st.shape {
            Shape::Ellipse => {
                let d = extent(&mut rng, st.along, side);
                (d, d)
            }
            Shape::Rect => {
                let along = extent(&mut rng, st.along, side);
                let across = extent(&mut rng, st.across, side);
                if rng.random::<bool>() { (along, across) } else { (across, along) }
            }
        };
        let (bw, bh) = (bw.min(w as i64), bh.min(h as i64));
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let x0 = rng.random_range(0..=w as i64 - bw);
            let y0 = rng.random_range(0..=h as i64 - bh);
            let candidate = BoundingBox::new(x0, y0, x0 + bw, y0 + bh)?;
            let padded = BoundingBox::new(x0 - 1, y0 - 1, x0 + bw + 1, y0 + bh + 1)?;
            if annotations.iter().all(|a| !a.bbox.intersects(&padded)) {
                placed = Some(candidate);
                break;
            }
        }
        let bbox = placed.ok_or(RasterError::ScenePlacement { placed: i, requested: spec.object_count })?;
        let color: [u8; 3] = std::array::from_fn(|c| (level + st.tint[c]).clamp(0, 255) as u8);
        let (cx, cy) = ((bbox.x_min + bbox.x_max) as f64 / 2.0, (bbox.y_min + bbox.y_max) as f64 / 2.0);
        let (rx, ry) = (bbox.width() as f64 / 2.0, bbox.height() as f64 / 2.0);
        for y in bbox.y_min..bbox.y_max {
            for x in bbox.x_min..bbox.x_max {
                let inside = match st.shape {
                    Shape::Rect => true,
                    Shape::Ellipse => {
                        let dx = (x as f64 + 0.5 - cx) / rx;
                        let dy = (y as f64 + 0.5 - cy) / ry;
                        dx * dx + dy * dy <= 1.0
                    }
                };
                if inside {
                    for c in 0..ch {
                        let v = if ch == 1 { level.clamp(0, 255) as u8 } else { color[c as usize] };
                        image.set(x as u32, y as u32, c, v);
                    }
                }
            }
        }
        let confidence = (rng.random_range(0.55..0.99f64) * 100.0).round() / 100.0;
        annotations.push(Annotation {
            image_id: spec.image_id(),
            bbox,
            class_name: CLASS_NAMES[class].to_string(),
            confidence,
        });
    }
    Ok((image, annotations))
}

/// `count` square scenes for training, with per-scene seeds, object counts
/// and backgrounds drawn from `seed`.
pub fn generate_corpus(count: usize, side: u32, channels: u8, seed: u64) -> Result<Vec<Image>, RasterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let spec = SceneSpec {
                seed: rng.random(),
                width: side,
                height: side,
                channels,
                object_count: rng.random_range(2..=6),
                // half of the corpus is cluttered urban ground, like typical chips
                background: if rng.random::<bool>() {
                    Background::Urban
                } else {
                    [Background::Flat, Background::Gradient, Background::Noise][rng.random_range(0..3)]
                },
            };
            generate_scene(&spec).map(|(img, _)| img)
        })
        .collect()
}
