//! Binary netpbm (P5 grayscale, P6 RGB) with maxval 255.

use super::{Image, RasterError};

fn err(offset: usize, reason: impl Into<String>) -> RasterError {
    RasterError::Pnm { offset, reason: reason.into() }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, RasterError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| err(start, format!("{what} out of range")))
    }
}

/// Parses a binary PNM file.
pub fn read_pnm(bytes: &[u8]) -> Result<Image, RasterError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(err(0, "expected magic P5 or P6")),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(err(2, "missing separator after magic"));
    }
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    reader.skip_whitespace_and_comments();
    let maxval_offset = reader.pos;
    let maxval = reader.number("maxval")?;
    if maxval != 255 {
        return Err(err(maxval_offset, format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(err(maxval_offset, "zero image dimension"));
    }
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(err(reader.pos, "missing whitespace before raster")),
    }
    let body_start = reader.pos;
    let expected = width as usize * height as usize * channels as usize;
    let body = &bytes[body_start..];
    if body.len() < expected {
        return Err(err(
            bytes.len(),
            format!("truncated raster: {} of {expected} bytes", body.len()),
        ));
    }
    if body.len() > expected {
        return Err(err(body_start + expected, "unexpected trailing data"));
    }
    Image::new(width, height, channels, body.to_vec())
}

/// Serializes with the canonical header `P{5|6}\n<w> <h>\n255\n`.
pub fn write_pnm(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.samples());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_rgb() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 1, 3));
        assert_eq!(img.samples(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn parses_minimal_gray() {
        let img = read_pnm(b"P5\n1 1\n255\n\0").unwrap();
        assert_eq!(img, Image::new(1, 1, 1, vec![0]).unwrap());
    }

    #[test]
    fn tolerates_comments_and_spacing() {
        let img = read_pnm(b"P5 # comment\n 2\t1 # more\n255\n\x07\x08").unwrap();
        assert_eq!(img.samples(), &[7, 8]);
    }

    #[test]
    fn writes_canonical_header() {
        let img = Image::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(write_pnm(&img), b"P6\n1 1\n255\n\xff\x00\x00".to_vec());
        let gray = Image::filled(2, 2, 1, 0).unwrap();
        let bytes = write_pnm(&gray);
        assert_eq!(bytes.len(), 15);
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
    }

    #[test]
    fn error_offsets() {
        assert_eq!(read_pnm(b"P3\n1 1\n255\n0"), Err(err(0, "expected magic P5 or P6")));
        match read_pnm(b"P5\n1 1\n65535\n\0\0") {
            Err(RasterError::Pnm { offset, reason }) => {
                assert_eq!(offset, 7);
                assert!(reason.contains("maxval"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match read_pnm(b"P6\n2 2\n255\n\0\0\0") {
            Err(RasterError::Pnm { offset, reason }) => {
                assert_eq!(offset, 14);
                assert!(reason.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_pnm(b"P5\nx 1\n255\n\0"), Err(RasterError::Pnm { offset: 3, .. })));
    }

    proptest! {
        #[test]
        fn file_roundtrip(w in 1u32..12, h in 1u32..12, rgb in any::<bool>(), seed in any::<u64>()) {
            let c = if rgb { 3 } else { 1 };
            let n = (w * h * c as u32) as usize;
            let samples: Vec<u8> = (0..n).map(|i| (seed.rotate_left(i as u32 % 64) as u8) ^ i as u8).collect();
            let img = Image::new(w, h, c, samples).unwrap();
            let bytes = write_pnm(&img);
            let back = read_pnm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(write_pnm(&back), bytes);
        }
    }
}
