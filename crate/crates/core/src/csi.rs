//! CSI frames, ground-truth records, and their JSONL encodings.
//!
//! A trace line looks like `{"t":0.05,"csi":[[[[re,im],...]]]}` with the tensor
//! indexed `[tx][rx][subcarrier]`. Floats are written in shortest round-trip
//! form, so `write -> read -> write` is byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Shape of a CSI tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub tx: usize,
    pub rx: usize,
    pub sub: usize,
}

impl Dims {
    pub fn new(tx: usize, rx: usize, sub: usize) -> Self {
        Dims { tx, rx, sub }
    }

    /// Number of flattened `(tx, rx, subcarrier)` channels.
    pub fn channels(&self) -> usize {
        self.tx * self.rx * self.sub
    }
}

/// One timestamped complex channel snapshot. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    timestamp: f64,
    dims: Dims,
    data: Vec<Complex64>,
}

impl CsiFrame {
    /// Builds a frame from a flattened `[tx][rx][sub]` buffer.
    pub fn new(timestamp: f64, dims: Dims, data: Vec<Complex64>) -> Result<Self> {
        if dims.channels() == 0 {
            return Err(Error::Dimension {
                index: 0,
                message: "tensor has a zero-length axis".into(),
            });
        }
        if data.len() != dims.channels() {
            return Err(Error::Dimension {
                index: 0,
                message: format!("expected {} values, got {}", dims.channels(), data.len()),
            });
        }
        if !timestamp.is_finite() {
            return Err(Error::InvalidFrame {
                index: 0,
                message: "timestamp is not finite".into(),
            });
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidFrame {
                index: 0,
                message: format!("entry {pos} is not finite"),
            });
        }
        Ok(CsiFrame {
            timestamp,
            dims,
            data,
        })
    }

    /// Builds a frame from a nested `[tx][rx][sub]` tensor, rejecting ragged input.
    pub fn from_nested(timestamp: f64, csi: &[Vec<Vec<Complex64>>]) -> Result<Self> {
        let tx = csi.len();
        let rx = csi.first().map_or(0, |r| r.len());
        let sub = csi.first().and_then(|r| r.first()).map_or(0, |s| s.len());
        let dims = Dims { tx, rx, sub };
        let mut data = Vec::with_capacity(dims.channels());
        for (i, r) in csi.iter().enumerate() {
            if r.len() != rx {
                return Err(ragged(format!("tx {i} has {} rx entries, expected {rx}", r.len())));
            }
            for (j, s) in r.iter().enumerate() {
                if s.len() != sub {
                    return Err(ragged(format!(
                        "tx {i} rx {j} has {} subcarriers, expected {sub}",
                        s.len()
                    )));
                }
                data.extend_from_slice(s);
            }
        }
        CsiFrame::new(timestamp, dims, data)
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Flattened channel values in `[tx][rx][sub]` order.
    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, tx: usize, rx: usize, sub: usize) -> Complex64 {
        self.data[(tx * self.dims.rx + rx) * self.dims.sub + sub]
    }

    /// Returns a copy with a different timestamp.
    pub fn with_timestamp(&self, timestamp: f64) -> Result<Self> {
        CsiFrame::new(timestamp, self.dims, self.data.clone())
    }
}

fn ragged(message: String) -> Error {
    Error::Dimension { index: 0, message }
}

/// Real-valued matrix `[time][channel]` with per-row timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct RealChannelMatrix {
    /// Row-major samples, `rows * channels` long.
    pub samples: Vec<f64>,
    pub timestamps: Vec<f64>,
    pub channels: usize,
    /// Nominal sample rate in Hz.
    pub sample_rate: f64,
}

impl RealChannelMatrix {
    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.samples[k * self.channels..(k + 1) * self.channels]
    }

    /// Copies one channel out as a series.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|k| self.samples[k * self.channels + c]).collect()
    }
}

/// Occupancy state reported by the reference sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GtState {
    Breathing,
    Motion,
    Absent,
}

/// One ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub state: GtState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpm: Option<f64>,
}

impl GroundTruthRecord {
    /// Checks the record invariants; `line` is used for error reporting.
    pub fn validate(&self, line: usize) -> Result<()> {
        if !self.timestamp.is_finite() {
            return Err(Error::Validation {
                line,
                message: "timestamp is not finite".into(),
            });
        }
        if let Some(bpm) = self.bpm {
            if self.state != GtState::Breathing {
                return Err(Error::Validation {
                    line,
                    message: format!("bpm given for a {:?} record", self.state),
                });
            }
            if !(10.0..=40.0).contains(&bpm) {
                return Err(Error::Range {
                    line,
                    message: format!("bpm {bpm} outside [10, 40]"),
                });
            }
        }
        Ok(())
    }
}

/// Stream-level sampling and epoch parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub nominal_rate_hz: f64,
    pub epoch_seconds: f64,
    pub epoch_samples: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            nominal_rate_hz: 800.0,
            epoch_seconds: 30.0,
            epoch_samples: 600,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_rate_hz > 0.0 && self.epoch_seconds > 0.0 && self.epoch_samples > 0) {
            return Err(Error::Parameter("stream parameters must be positive".into()));
        }
        if self.epoch_samples as f64 > self.nominal_rate_hz * self.epoch_seconds {
            return Err(Error::Parameter(format!(
                "epoch_samples {} exceeds samples per epoch at the nominal rate",
                self.epoch_samples
            )));
        }
        Ok(())
    }

    /// Sample rate after downsampling (20 Hz by default).
    pub fn epoch_rate_hz(&self) -> f64 {
        self.epoch_samples as f64 / self.epoch_seconds
    }
}

struct Pair(Complex64);

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

struct Row<'a>(&'a [Complex64]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|&c| Pair(c)))
    }
}

struct Block<'a>(&'a [Complex64], usize);

impl Serialize for Block<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.chunks(self.1).map(Row))
    }
}

struct FrameTensor<'a>(&'a CsiFrame);

impl Serialize for FrameTensor<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.0.dims;
        s.collect_seq(self.0.data.chunks(d.rx * d.sub).map(|c| Block(c, d.sub)))
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    t: f64,
    csi: FrameTensor<'a>,
}

#[derive(Deserialize)]
struct LineIn {
    t: f64,
    csi: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Encodes one frame as a single JSON line (no trailing newline).
pub fn encode_frame(frame: &CsiFrame) -> String {
    serde_json::to_string(&LineOut {
        t: frame.timestamp,
        csi: FrameTensor(frame),
    })
    .expect("finite frame always serializes")
}

/// Decodes one JSON trace line. `line` is the 1-based line number used in errors.
pub fn decode_frame(text: &str, line: usize) -> Result<CsiFrame> {
    let raw: LineIn = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let nested: Vec<Vec<Vec<Complex64>>> = raw
        .csi
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|s| s.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect()
        })
        .collect();
    CsiFrame::from_nested(raw.t, &nested).map_err(|e| match e {
        Error::Dimension { message, .. } => Error::Dimension {
            index: line.saturating_sub(1),
            message,
        },
        Error::InvalidFrame { message, .. } => Error::Parse { line, message },
        other => other,
    })
}

/// Streaming trace reader enforcing ordering and shape consistency.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    frame_index: usize,
    prev_t: Option<f64>,
    dims: Option<Dims>,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        TraceReader {
            lines: reader.lines(),
            line_no: 0,
            frame_index: 0,
            prev_t: None,
            dims: None,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<CsiFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let frame = match decode_frame(&line, self.line_no) {
                Ok(f) => f,
                Err(Error::Dimension { message, .. }) => {
                    return Some(Err(Error::Dimension {
                        index: self.frame_index,
                        message,
                    }))
                }
                Err(e) => return Some(Err(e)),
            };
            if let Some(prev) = self.prev_t {
                if frame.timestamp <= prev {
                    return Some(Err(Error::Ordering {
                        line: self.line_no,
                        prev,
                        t: frame.timestamp,
                    }));
                }
            }
            match self.dims {
                Some(d) if d != frame.dims => {
                    return Some(Err(Error::Dimension {
                        index: self.frame_index,
                        message: format!("shape {:?} differs from stream shape {:?}", frame.dims, d),
                    }))
                }
                None => self.dims = Some(frame.dims),
                _ => {}
            }
            self.prev_t = Some(frame.timestamp);
            self.frame_index += 1;
            return Some(Ok(frame));
        }
    }
}

/// Reads a whole trace from a byte stream.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<CsiFrame>> {
    TraceReader::new(reader).collect()
}

/// Reads a whole trace from a file.
pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<CsiFrame>> {
    read_trace(BufReader::new(File::open(path)?))
}

/// Checks stream invariants, returning the index of the first offending frame.
pub fn validate_stream(frames: &[CsiFrame]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        if i > 0 {
            let prev = &frames[i - 1];
            if f.dims != prev.dims {
                return Err(Error::Dimension {
                    index: i,
                    message: format!("shape {:?} differs from stream shape {:?}", f.dims, prev.dims),
                });
            }
            if f.timestamp <= prev.timestamp {
                return Err(Error::InvalidFrame {
                    index: i,
                    message: format!(
                        "timestamp {} does not exceed previous {}",
                        f.timestamp, prev.timestamp
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Writes frames as JSONL, one line per frame.
pub fn write_trace<W: Write>(mut writer: W, frames: &[CsiFrame]) -> Result<()> {
    validate_stream(frames)?;
    for f in frames {
        writer.write_all(encode_frame(f).as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Encodes frames into an in-memory JSONL buffer.
pub fn write_trace_bytes(frames: &[CsiFrame]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_trace(&mut out, frames)?;
    Ok(out)
}

/// Parses ground-truth JSONL and validates every record.
pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruthRecord>> {
    let mut out: Vec<GroundTruthRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GroundTruthRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.validate(line_no)?;
        if let Some(prev) = out.last() {
            if rec.timestamp <= prev.timestamp {
                return Err(Error::Ordering {
                    line: line_no,
                    prev: prev.timestamp,
                    t: rec.timestamp,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_ground_truth_file(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRecord>> {
    read_ground_truth(BufReader::new(File::open(path)?))
}

/// Writes ground-truth records as JSONL.
pub fn write_ground_truth<W: Write>(mut writer: W, records: &[GroundTruthRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        r.validate(i + 1)?;
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Ground-truth records viewed as piecewise-constant labels: record `i`
/// holds from its timestamp until the next record's timestamp. The last
/// record holds for one median record spacing (one second if unknown).
#[derive(Debug, Clone)]
pub struct GroundTruthTimeline<'a> {
    records: &'a [GroundTruthRecord],
    tail: f64,
}

impl<'a> GroundTruthTimeline<'a> {
    pub fn new(records: &'a [GroundTruthRecord]) -> Self {
        let mut gaps: Vec<f64> = records
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .collect();
        gaps.sort_by(f64::total_cmp);
        let tail = gaps.get(gaps.len() / 2).copied().unwrap_or(1.0);
        GroundTruthTimeline { records, tail }
    }

    pub fn records(&self) -> &'a [GroundTruthRecord] {
        self.records
    }

    /// Time span `[start, end)` of record `i`.
    pub fn span(&self, i: usize) -> (f64, f64) {
        let start = self.records[i].timestamp;
        let end = self
            .records
            .get(i + 1)
            .map_or(start + self.tail, |r| r.timestamp);
        (start, end)
    }

    /// Indices of records whose spans intersect `[start, end)`.
    pub fn overlapping(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let first = self
            .records
            .partition_point(|r| r.timestamp <= start)
            .saturating_sub(1);
        let mut i = first;
        while i < self.records.len() && self.span(i).1 <= start {
            i += 1;
        }
        let mut j = i;
        while j < self.records.len() && self.records[j].timestamp < end {
            j += 1;
        }
        i..j
    }

    /// True when `[start, end)` is fully labelled and every overlapping record has `state`.
    pub fn all_in_state(&self, start: f64, end: f64, state: GtState) -> bool {
        let r = self.overlapping(start, end);
        if r.is_empty() {
            return false;
        }
        let covered = self.span(r.start).0 <= start && self.span(r.end - 1).1 >= end;
        covered && self.records[r].iter().all(|rec| rec.state == state)
    }

    /// True when any record overlapping `[start, end)` has `state`.
    pub fn any_in_state(&self, start: f64, end: f64, state: GtState) -> bool {
        self.records[self.overlapping(start, end)]
            .iter()
            .any(|rec| rec.state == state)
    }
}
