use std::io::Write;

use proptest::prelude::*;

use streamadapt::stream::{read_stream, write_stream, Detection, Frame};
use streamadapt::Error;

fn frames_strategy() -> impl Strategy<Value = Vec<Frame>> {
    (1usize..16).prop_flat_map(|dim| {
        let row = (
            prop::collection::vec(-1e6f64..1e6, dim),
            prop::option::of((0usize..4, 0.0f64..=1.0)),
        );
        prop::collection::vec(row, 1..30).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (features, det))| {
                    let f = Frame::new(i as u64, features);
                    match det {
                        Some((c, conf)) => f.with_detections(vec![Detection::new(c, conf)]),
                        None => f,
                    }
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn write_then_read_is_identity(frames in frames_strategy()) {
        let file = tempfile::NamedTempFile::new().unwrap();
        write_stream(file.as_file(), &frames).unwrap();
        let back = read_stream(file.path()).unwrap();
        prop_assert_eq!(back, frames);
    }
}

#[test]
fn errors_name_the_offending_line() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, r#"{{"features":[1.0,2.0]}}"#).unwrap();
    writeln!(file).unwrap();
    writeln!(file, r#"{{"features":[1.0,2.0,3.0]}}"#).unwrap();
    let err = read_stream(file.path()).unwrap_err();
    assert!(
        matches!(
            err,
            Error::DimensionMismatch {
                line: Some(3),
                expected: 2,
                found: 3
            }
        ),
        "{err}"
    );
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_stream(std::path::Path::new("/nonexistent/stream.jsonl")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}
