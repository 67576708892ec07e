//! Model checkpoints.
//!
//! Layout: magic `AEMD`, version u8, then the config (blocks u8,
//! input_side u32 LE, image_channels u8, base_width u32 LE, seed u64 LE,
//! skip_mode u8), tensor count u32 LE, and for each parameter tensor in
//! declaration order: rank u8, dims as u32 LE, values as f64 LE.

use super::model::{build_model, Model, ModelConfig, SkipMode};
use super::ModelError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AEMD";
pub const CHECKPOINT_VERSION: u8 = 1;

fn shapes(model: &Model) -> Vec<Vec<u32>> {
    model
        .layers()
        .flat_map(|l| {
            let k = l.kernel as u32;
            [vec![l.out_channels as u32, l.in_channels as u32, k, k], vec![l.out_channels as u32]]
        })
        .collect()
}

pub fn save_model(model: &Model) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(c.blocks as u8);
    out.extend_from_slice(&c.input_side.to_le_bytes());
    out.push(c.image_channels);
    out.extend_from_slice(&c.base_width.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.push(match c.skip_mode {
        SkipMode::Paper => 0,
        SkipMode::CodecHonest => 1,
    });
    let params = model.parameters();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (shape, values) in shapes(model).iter().zip(params) {
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ModelError::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_model(bytes: &[u8]) -> Result<Model, ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = cur.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let blocks = cur.u8()? as u32;
    let input_side = cur.u32()?;
    let image_channels = cur.u8()?;
    let base_width = cur.u32()?;
    let seed = cur.u64()?;
    let skip_mode = match cur.u8()? {
        0 => SkipMode::Paper,
        1 => SkipMode::CodecHonest,
        other => return Err(bad(format!("unknown skip mode {other}"))),
    };
    let config = ModelConfig { blocks, input_side, image_channels, base_width, seed, skip_mode };
    let mut model = build_model(&config)?;
    let expected = shapes(&model);
    let count = cur.u32()? as usize;
    if count != expected.len() {
        return Err(bad(format!("{count} tensors, expected {}", expected.len())));
    }
    for (shape, param) in expected.iter().zip(model.parameters_mut()) {
        let rank = cur.u8()? as usize;
        let dims: Vec<u32> = (0..rank).map(|_| cur.u32()).collect::<Result<_, _>>()?;
        if &dims != shape {
            return Err(bad(format!("tensor shape {dims:?}, expected {shape:?}")));
        }
        for v in param.iter_mut() {
            *v = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        }
    }
    if cur.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_layout() {
        let mut model = build_model(&ModelConfig { blocks: 2, input_side: 16, base_width: 4, seed: 9, ..Default::default() }).unwrap();
        model.output.bias[1] = 0.125;
        let bytes = save_model(&model);
        assert_eq!(&bytes[..5], b"AEMD\x01");
        assert_eq!(bytes[5], 2);
        assert_eq!(&bytes[6..10], &16u32.to_le_bytes());
        assert_eq!(load_model(&bytes).unwrap(), model);
        let params: usize = model.parameter_count();
        let headers: usize = shapes(&model).iter().map(|s| 1 + 4 * s.len()).sum();
        assert_eq!(bytes.len(), 4 + 1 + 1 + 4 + 1 + 4 + 8 + 1 + 4 + headers + 8 * params);
    }

    #[test]
    fn rejects_corruption() {
        let model = build_model(&ModelConfig { blocks: 1, input_side: 8, base_width: 2, ..Default::default() }).unwrap();
        let bytes = save_model(&model);
        assert!(load_model(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_model(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(load_model(&bad).is_err());
    }
}
