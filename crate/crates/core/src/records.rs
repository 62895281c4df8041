//! Newline-delimited JSON record files.
//!
//! Each line is one object carrying `schema_version` and a `record` tag:
//!
//! ```text
//! {"schema_version":1,"record":"counts","sample_index":0,"d_r":2,"d_w":0}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arma::EstimateReport;
use crate::config::RunConfig;
use crate::detector::{FramePairObservation, PairCounts};
use crate::error::{Error, Result};
use crate::simulator::GroundTruth;
use crate::tracker::DenseFrame;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    RunConfig(RunConfig),
    FramePair(FramePairObservation),
    Frame(DenseFrame),
    GroundTruth(GroundTruth),
    Counts(PairCounts),
    Report(EstimateReport),
}

impl Record {
    /// The `record` tag written for this variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Record::RunConfig(_) => "run_config",
            Record::FramePair(_) => "frame_pair",
            Record::Frame(_) => "frame",
            Record::GroundTruth(_) => "ground_truth",
            Record::Counts(_) => "counts",
            Record::Report(_) => "report",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    #[serde(flatten)]
    record: Record,
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a Record,
}

pub fn to_line(record: &Record) -> String {
    serde_json::to_string(&EnvelopeRef {
        schema_version: SCHEMA_VERSION,
        record,
    })
    .expect("records serialize to JSON")
}

/// Parses one line; `line` is the 1-based position used in error messages.
pub fn from_line(text: &str, line: usize) -> Result<Record> {
    let env: Envelope = serde_json::from_str(text).map_err(|e| Error::Data {
        line,
        msg: e.to_string(),
    })?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::Data {
            line,
            msg: format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                env.schema_version
            ),
        });
    }
    Ok(env.record)
}

pub struct RecordWriter<W: Write> {
    inner: W,
}

impl RecordWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(RecordWriter {
            inner: BufWriter::new(File::create(path).map_err(|e| with_path(e, path))?),
        })
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(inner: W) -> Self {
        RecordWriter { inner }
    }

    pub fn write(&mut self, record: &Record) -> Result<()> {
        self.inner.write_all(to_line(record).as_bytes())?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Reads all records with their 1-based line numbers, skipping blank lines.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<(usize, Record)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, from_line(&line, i + 1)?));
    }
    Ok(out)
}

fn with_path(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

pub fn read_file(path: &Path) -> Result<Vec<(usize, Record)>> {
    read_records(BufReader::new(File::open(path).map_err(|e| with_path(e, path))?))
}

pub fn write_file<'a>(path: &Path, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angles::CyclicAngle;
    use crate::detector::Detection;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;

    #[test]
    fn counts_line_format() {
        let r = Record::Counts(PairCounts {
            sample_index: 0,
            d_r: 2,
            d_w: 0,
        });
        assert_eq!(
            to_line(&r),
            r#"{"schema_version":1,"record":"counts","sample_index":0,"d_r":2,"d_w":0}"#
        );
    }

    #[test]
    fn bad_lines_are_reported_with_position() {
        let text = "{\"schema_version\":1,\"record\":\"counts\",\"sample_index\":0,\"d_r\":1,\"d_w\":0}\n\n{oops}\n";
        match read_records(text.as_bytes()) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let v2 = r#"{"schema_version":2,"record":"counts","sample_index":0,"d_r":1,"d_w":0}"#;
        assert!(matches!(from_line(v2, 1), Err(Error::Data { line: 1, .. })));
    }

    #[test]
    fn config_round_trips() {
        let r = Record::RunConfig(RunConfig::default());
        assert_eq!(from_line(&to_line(&r), 1).unwrap(), r);
        assert!(to_line(&r).contains(&format!("\"record\":\"{}\"", r.kind())));
    }

    prop_compose! {
        fn detection()(x in -1e4f64..1e4, y in -1e4f64..1e4, w in 0.1f64..100.0, h in 0.1f64..100.0,
                       conf in 0.0f64..=1.0, id in prop::option::of(0u32..1000),
                       app in prop::option::of(-3.0f64..3.0)) -> Detection {
            Detection {
                bbox: BoundingBox::new(x, y, x + w, y + h).unwrap().with_confidence(conf),
                truth_id: id,
                appearance: app.map(CyclicAngle::new),
            }
        }
    }

    proptest! {
        #[test]
        fn frame_pair_round_trip(k in 0u64..10_000, t in 0.0f64..1e5, dt in 1e-3f64..1.0,
                                 d1 in prop::collection::vec(detection(), 0..5),
                                 d2 in prop::collection::vec(detection(), 0..5)) {
            let r = Record::FramePair(FramePairObservation {
                sample_index: k, t_k: t, intra_pair_dt: dt, detections_1: d1, detections_2: d2,
            });
            prop_assert_eq!(from_line(&to_line(&r), 1).unwrap(), r);
        }

        #[test]
        fn dense_frame_round_trip(i in 0u64..100_000, t in 0.0f64..1e5,
                                  d in prop::collection::vec(detection(), 0..6)) {
            let r = Record::Frame(DenseFrame { frame_index: i, t, detections: d });
            prop_assert_eq!(from_line(&to_line(&r), 1).unwrap(), r);
        }
    }
}
