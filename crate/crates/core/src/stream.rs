//! Frame data model and JSON Lines stream I/O.
//!
//! A stream file holds one JSON object per line:
//!
//! ```text
//! {"features":[0.1,2.5,-1.0],"detections":[{"category":2,"confidence":0.97}]}
//! ```
//!
//! `detections` is optional. It is present only when an external teacher
//! labelled the stream; otherwise the engine produces pseudo-labels itself.
//! Frame ids are not stored: the n-th line is frame `n`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One teacher prediction: a category and its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: usize,
    pub confidence: f64,
}

impl Detection {
    pub fn new(category: usize, confidence: f64) -> Self {
        Self {
            category,
            confidence,
        }
    }

    pub(crate) fn check_category(&self, num_categories: usize) -> Result<()> {
        if self.category >= num_categories {
            return Err(Error::CategoryRange {
                category: self.category,
                num_categories,
            });
        }
        Ok(())
    }
}

/// One stream element.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Position in the stream; doubles as the time index.
    pub id: u64,
    pub features: Vec<f64>,
    /// Frozen-encoder embedding, filled lazily by the engine.
    pub embedding: Option<Vec<f64>>,
    /// Labels from an external teacher, when the stream carries them.
    pub detections: Option<Vec<Detection>>,
}

impl Frame {
    pub fn new(id: u64, features: Vec<f64>) -> Self {
        Self {
            id,
            features,
            embedding: None,
            detections: None,
        }
    }

    pub fn with_detections(mut self, detections: Vec<Detection>) -> Self {
        self.detections = Some(detections);
        self
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detections: Option<Vec<Detection>>,
}

/// Checks that `frame` has `expected_dim` finite features.
pub fn validate_frame(frame: &Frame, expected_dim: usize) -> Result<()> {
    check_vector(&frame.features, expected_dim)
}

pub(crate) fn check_vector(values: &[f64], expected_dim: usize) -> Result<()> {
    if values.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            line: None,
            expected: expected_dim,
            found: values.len(),
        });
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(())
}

/// Lazy reader over a JSON Lines stream. Holds one line in memory at a time.
pub struct StreamReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    next_id: u64,
    dim: Option<usize>,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            next_id: 0,
            dim: None,
        }
    }

    /// Feature dimension, known once the first frame has been read.
    pub fn dimension(&self) -> Option<usize> {
        self.dim
    }

    fn parse(&mut self, line: &str) -> Result<Frame> {
        let line_no = self.line_no;
        let record: FrameRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let expected = *self.dim.get_or_insert(record.features.len());
        let frame = Frame {
            id: self.next_id,
            features: record.features,
            embedding: None,
            detections: record.detections,
        };
        validate_frame(&frame, expected).map_err(|e| match e {
            Error::DimensionMismatch {
                expected, found, ..
            } => Error::DimensionMismatch {
                line: Some(line_no),
                expected,
                found,
            },
            other => Error::Parse {
                line: line_no,
                message: other.to_string(),
            },
        })?;
        if let Some(detections) = &frame.detections {
            for d in detections {
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("confidence {} outside [0, 1]", d.confidence),
                    });
                }
            }
        }
        self.next_id += 1;
        Ok(frame)
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        line: self.line_no + 1,
                        message: e.to_string(),
                    }))
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&line));
        }
    }
}

/// Opens `path` as a lazy frame stream.
pub fn open_stream(path: &Path) -> Result<StreamReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(StreamReader::new(BufReader::new(file)))
}

/// Reads a whole stream file. Frames get ids 0, 1, 2, ... in file order.
pub fn read_stream(path: &Path) -> Result<Vec<Frame>> {
    open_stream(path)?.collect()
}

/// Writes frames in the stream format. Floats are written in shortest
/// round-trip form, so reading the file back reproduces them exactly.
pub fn write_stream<'a, W: Write>(
    mut out: W,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> std::io::Result<()> {
    for frame in frames {
        let record = FrameRecord {
            features: frame.features.clone(),
            detections: frame.detections.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_str(s: &str) -> Result<Vec<Frame>> {
        StreamReader::new(s.as_bytes()).collect()
    }

    #[test]
    fn three_lines_give_sequential_ids() {
        let frames = read_str(
            "{\"features\":[1,2,3,4]}\n{\"features\":[0,0,1,0]}\n{\"features\":[5,5,5,5]}\n",
        )
        .unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames.iter().map(|f| f.id).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(frames.iter().all(|f| f.embedding.is_none()));
    }

    #[test]
    fn empty_input_is_empty_stream() {
        assert!(read_str("").unwrap().is_empty());
    }

    #[test]
    fn dimension_change_is_reported_at_its_line() {
        let err = read_str("{\"features\":[1,2,3,4]}\n{\"features\":[1,2,3]}\n").unwrap_err();
        match err {
            Error::DimensionMismatch {
                line,
                expected,
                found,
            } => {
                assert_eq!(line, Some(2));
                assert_eq!((expected, found), (4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = read_str("{\"features\":[1]}\n{\"features\":[1]}\nnot json\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn detections_are_parsed() {
        let frames = read_str(
            "{\"features\":[1,2],\"detections\":[{\"category\":1,\"confidence\":0.95}]}\n",
        )
        .unwrap();
        assert_eq!(frames[0].detections, Some(vec![Detection::new(1, 0.95)]));
    }

    #[test]
    fn validate_frame_cases() {
        assert!(validate_frame(&Frame::new(0, vec![1.0, 2.0]), 2).is_ok());
        assert!(matches!(
            validate_frame(&Frame::new(0, vec![1.0, f64::NAN]), 2),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            validate_frame(&Frame::new(0, vec![1.0]), 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
