//! JSON-lines detection records:
//! `{"image_id": "...", "bbox": [x_min, y_min, x_max, y_max], "class_name": "...", "confidence": 0.9}`

use serde::{Deserialize, Serialize};

use super::{Annotation, BoundingBox, RasterError};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    image_id: String,
    bbox: [i64; 4],
    class_name: String,
    confidence: f64,
}

fn parse_line(line: &str) -> Result<Annotation, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let [x_min, y_min, x_max, y_max] = rec.bbox;
    let bbox = BoundingBox::new(x_min, y_min, x_max, y_max).map_err(|e| e.to_string())?;
    if rec.class_name.is_empty() {
        return Err("empty class_name".into());
    }
    if !(0.0..=1.0).contains(&rec.confidence) {
        return Err(format!("confidence {} outside [0, 1]", rec.confidence));
    }
    Ok(Annotation { image_id: rec.image_id, bbox, class_name: rec.class_name, confidence: rec.confidence })
}

/// Parses annotations; blank lines are skipped, line numbers in errors are 1-based.
pub fn read_annotations(bytes: &[u8]) -> Result<Vec<Annotation>, RasterError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        RasterError::Annotation { line, reason: "invalid UTF-8".into() }
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l).map_err(|reason| RasterError::Annotation { line: i + 1, reason }))
        .collect()
}

pub fn write_annotations(annotations: &[Annotation]) -> Vec<u8> {
    let mut out = Vec::new();
    for a in annotations {
        let rec = Record {
            image_id: a.image_id.clone(),
            bbox: [a.bbox.x_min, a.bbox.y_min, a.bbox.x_max, a.bbox.y_max],
            class_name: a.class_name.clone(),
            confidence: a.confidence,
        };
        serde_json::to_writer(&mut out, &rec).expect("in-memory write");
        out.push(b'\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record() {
        let got = read_annotations(
            br#"{"image_id":"a","bbox":[1,2,5,6],"class_name":"car","confidence":0.75}"#,
        )
        .unwrap();
        assert_eq!(
            got,
            vec![Annotation {
                image_id: "a".into(),
                bbox: BoundingBox::new(1, 2, 5, 6).unwrap(),
                class_name: "car".into(),
                confidence: 0.75,
            }]
        );
    }

    #[test]
    fn empty_input() {
        assert!(read_annotations(b"").unwrap().is_empty());
        assert!(read_annotations(b"\n\n").unwrap().is_empty());
    }

    #[test]
    fn reports_offending_line() {
        let text = concat!(
            r#"{"image_id":"a","bbox":[0,0,2,2],"class_name":"car","confidence":0.5}"#,
            "\n",
            r#"{"image_id":"a","bbox":[4,0,4,2],"class_name":"car","confidence":0.5}"#,
            "\n"
        );
        match read_annotations(text.as_bytes()) {
            Err(RasterError::Annotation { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_confidence_and_class() {
        let bad_conf = br#"{"image_id":"a","bbox":[0,0,2,2],"class_name":"car","confidence":1.5}"#;
        assert!(matches!(read_annotations(bad_conf), Err(RasterError::Annotation { line: 1, .. })));
        let no_class = br#"{"image_id":"a","bbox":[0,0,2,2],"class_name":"","confidence":0.5}"#;
        assert!(read_annotations(no_class).is_err());
        assert!(read_annotations(b"{not json").is_err());
    }

    #[test]
    fn write_then_read() {
        let anns = vec![Annotation {
            image_id: "scene-1".into(),
            bbox: BoundingBox::new(-3, 4, 10, 12).unwrap(),
            class_name: "building".into(),
            confidence: 0.91,
        }];
        assert_eq!(read_annotations(&write_annotations(&anns)).unwrap(), anns);
    }
}
