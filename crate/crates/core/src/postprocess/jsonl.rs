use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

use super::{BBox, Detection, GroundTruthBox, Prediction};

/// One line of the box interchange format. Ground truth omits `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    #[serde(deserialize_with = "image_key")]
    pub image_id: String,
    pub class_id: usize,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f32>,
}

/// Image ids may be written as strings or integers; both become strings.
fn image_key<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Key {
        S(String),
        N(u64),
    }
    Ok(match Key::deserialize(d)? {
        Key::S(s) => s,
        Key::N(n) => n.to_string(),
    })
}

/// Parses JSON lines; blank lines are skipped and errors name the line.
pub fn read_records(text: &str) -> Result<Vec<BoxRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: BoxRecord = serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                column: e.column(),
                msg: e.to_string(),
            })?;
            if !r.bbox.is_valid() {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 0,
                    msg: format!(
                        "box {:?} needs x2 > x1 and y2 > y1",
                        <[f32; 4]>::from(r.bbox)
                    ),
                });
            }
            if r.score.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 0,
                    msg: "score must lie in [0, 1]".into(),
                });
            }
            Ok(r)
        })
        .collect()
}

pub fn records_to_jsonl(records: &[BoxRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Records with a score become predictions, the rest ground truth.
pub fn split_records(records: Vec<BoxRecord>) -> (Vec<Prediction>, Vec<GroundTruthBox>) {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for r in records {
        match r.score {
            Some(score) => preds.push(Prediction {
                image_id: r.image_id,
                det: Detection {
                    bbox: r.bbox,
                    class_id: r.class_id,
                    score,
                },
            }),
            None => gts.push(GroundTruthBox {
                bbox: r.bbox,
                class_id: r.class_id,
                image_id: r.image_id,
            }),
        }
    }
    (preds, gts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_and_string_ids() {
        let text = "{\"image_id\": 7, \"class_id\": 0, \"bbox\": [0, 0, 1, 1]}\n\n\
                    {\"image_id\": \"x\", \"class_id\": 1, \"bbox\": [0, 0, 2, 2], \"score\": 0.5}\n";
        let r = read_records(text).unwrap();
        assert_eq!(r[0].image_id, "7");
        let (p, g) = split_records(r.clone());
        assert_eq!((p.len(), g.len()), (1, 1));
        assert_eq!(read_records(&records_to_jsonl(&r)).unwrap(), r);
    }

    #[test]
    fn bad_line_numbered() {
        let text =
            "{\"image_id\": 1, \"class_id\": 0, \"bbox\": [0, 0, 1, 1]}\n{\"image_id\": 1}\n";
        assert!(matches!(
            read_records(text),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "{\"image_id\": 1, \"class_id\": 0, \"bbox\": [2, 0, 1, 1]}\n";
        assert!(matches!(
            read_records(text),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
