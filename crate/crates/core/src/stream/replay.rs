//! Line-delimited skeleton stream files.
//!
//! ```text
//! SKSTREAM 1 <jointset> mm ms
//! [M <key>=<value>]...
//! F <t_ms> <joint>=<x>,<y>,<z>,<conf> ...
//! ```
//!
//! Coordinates are integer millimeters and confidences integer percent, so a
//! frame already on that grid survives a write/read cycle exactly. `M` lines
//! carry file metadata (expert paths use them for the expert's body size) and
//! may only appear before the first frame.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use crate::error::ReplayError;
use crate::model::{JointId, JointSample, SkeletonFrame, Vec3};

pub const MAGIC: &str = "SKSTREAM";
pub const FORMAT_VERSION: u32 = 1;
/// Joint set of full player skeletons.
pub const SKELETON_JOINT_SET: &str = "sk14";
/// Joint set of expert racket paths (single pseudo-joint `RACKET`).
pub const RACKET_JOINT_SET: &str = "racket";

/// The header line for a joint set.
pub fn header_line(joint_set: &str) -> String {
    format!("{MAGIC} {FORMAT_VERSION} {joint_set} mm ms")
}

/// Parse a header line, returning its joint set.
pub fn parse_header(line: &str) -> Result<String, ReplayError> {
    let tokens: Vec<&str> = line.split(' ').collect();
    match tokens.as_slice() {
        [MAGIC, version, joint_set, "mm", "ms"] => {
            if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
                return Err(ReplayError::MalformedHeader(format!("unsupported version `{version}`")));
            }
            if joint_set.is_empty() {
                return Err(ReplayError::MalformedHeader("empty joint set".into()));
            }
            Ok(joint_set.to_string())
        }
        _ => Err(ReplayError::MalformedHeader(format!("unrecognized header `{line}`"))),
    }
}

/// One joint entry of a frame line, still in file units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawJoint {
    pub name: String,
    pub mm: [i64; 3],
    pub percent: u8,
}

impl RawJoint {
    pub fn position(&self) -> Vec3 {
        Vec3::new(
            self.mm[0] as f64 / 1000.0,
            self.mm[1] as f64 / 1000.0,
            self.mm[2] as f64 / 1000.0,
        )
    }

    pub fn confidence(&self) -> f64 {
        f64::from(self.percent) / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub t_ms: u64,
    pub joints: Vec<RawJoint>,
}

pub fn to_mm(meters: f64) -> i64 {
    (meters * 1000.0).round() as i64
}

pub fn to_percent(confidence: f64) -> u8 {
    (confidence * 100.0).round().clamp(0.0, 100.0) as u8
}

/// Parse one `F` line. `line` is only used for error reporting.
pub fn parse_frame_line(text: &str, line: usize) -> Result<RawFrame, ReplayError> {
    let mut tokens = text.split(' ');
    if tokens.next() != Some("F") {
        return Err(ReplayError::frame(line, "expected `F` record"));
    }
    let t_ms = tokens
        .next()
        .and_then(|t| t.parse::<u64>().ok())
        .ok_or_else(|| ReplayError::frame(line, "bad timestamp"))?;
    let mut joints = Vec::new();
    for token in tokens {
        let (name, values) = token
            .split_once('=')
            .ok_or_else(|| ReplayError::frame(line, format!("bad joint entry `{token}`")))?;
        let fields: Vec<&str> = values.split(',').collect();
        if fields.len() != 4 || name.is_empty() {
            return Err(ReplayError::frame(line, format!("bad joint entry `{token}`")));
        }
        let mut mm = [0i64; 3];
        for (slot, field) in mm.iter_mut().zip(&fields[..3]) {
            *slot = field
                .parse()
                .map_err(|_| ReplayError::frame(line, format!("bad coordinate in `{token}`")))?;
        }
        let percent: u8 = fields[3]
            .parse()
            .ok()
            .filter(|p| *p <= 100)
            .ok_or_else(|| ReplayError::frame(line, format!("bad confidence in `{token}`")))?;
        if joints.iter().any(|j: &RawJoint| j.name == name) {
            return Err(ReplayError::frame(line, format!("duplicate joint `{name}`")));
        }
        joints.push(RawJoint { name: name.to_string(), mm, percent });
    }
    Ok(RawFrame { t_ms, joints })
}

/// Convert a raw record into a validated skeleton frame.
pub fn raw_to_skeleton(raw: &RawFrame, line: usize) -> Result<SkeletonFrame, ReplayError> {
    let mut joints = BTreeMap::new();
    for j in &raw.joints {
        let id: JointId = j
            .name
            .parse()
            .map_err(|e| ReplayError::frame(line, format!("{e}")))?;
        joints.insert(id, JointSample::new(j.position(), j.confidence()));
    }
    SkeletonFrame::new(raw.t_ms, joints).map_err(|e| ReplayError::frame(line, e.to_string()))
}

/// The `F` line for a skeleton frame, joints in canonical order, no newline.
pub fn format_frame(frame: &SkeletonFrame) -> String {
    let mut out = format!("F {}", frame.t_ms());
    for (id, sample) in frame.joints() {
        let p = sample.position;
        out.push_str(&format!(
            " {}={},{},{},{}",
            id.name(),
            to_mm(p.x),
            to_mm(p.y),
            to_mm(p.z),
            to_percent(sample.confidence)
        ));
    }
    out
}

/// Streams raw records from any joint set, enforcing header and timestamp
/// invariants. Lines are read one at a time.
pub struct RecordReader<R> {
    source: R,
    joint_set: String,
    meta: Vec<(String, String)>,
    line_no: usize,
    last_t: Option<u64>,
    pending: Option<String>,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(mut source: R) -> Result<Self, ReplayError> {
        let mut first = String::new();
        if source.read_line(&mut first)? == 0 {
            return Err(ReplayError::MalformedHeader("empty input".into()));
        }
        let joint_set = parse_header(trim_eol(&first))?;
        let mut reader = Self {
            source,
            joint_set,
            meta: Vec::new(),
            line_no: 1,
            last_t: None,
            pending: None,
            failed: false,
        };
        // Metadata lines sit between the header and the first frame.
        while let Some(line) = reader.next_line()? {
            if let Some(rest) = line.strip_prefix("M ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| {
                    ReplayError::MalformedHeader(format!("bad metadata line {}", reader.line_no))
                })?;
                reader.meta.push((k.to_string(), v.to_string()));
            } else {
                reader.pending = Some(line);
                break;
            }
        }
        Ok(reader)
    }

    pub fn joint_set(&self) -> &str {
        &self.joint_set
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Line number of the most recently returned record.
    pub fn line_no(&self) -> usize {
        self.line_no
    }

    fn next_line(&mut self) -> Result<Option<String>, ReplayError> {
        loop {
            let mut buf = String::new();
            if self.source.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = trim_eol(&buf);
            if !line.is_empty() {
                return Ok(Some(line.to_string()));
            }
        }
    }

    fn next_record(&mut self) -> Result<Option<RawFrame>, ReplayError> {
        let line = match self.pending.take() {
            Some(l) => l,
            None => match self.next_line()? {
                Some(l) => l,
                None => return Ok(None),
            },
        };
        let raw = parse_frame_line(&line, self.line_no)?;
        if let Some(prev) = self.last_t {
            if raw.t_ms <= prev {
                return Err(ReplayError::NonMonotonicTimestamp(self.line_no));
            }
        }
        self.last_t = Some(raw.t_ms);
        Ok(Some(raw))
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<RawFrame, ReplayError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(raw)) => Some(Ok(raw)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Lazily yields skeleton frames from a `sk14` stream. Iteration stops after
/// the first error.
pub struct ReplayReader<R> {
    records: RecordReader<R>,
}

impl<R: BufRead> Iterator for ReplayReader<R> {
    type Item = Result<SkeletonFrame, ReplayError>;

    fn next(&mut self) -> Option<Self::Item> {
        let raw = match self.records.next()? {
            Ok(raw) => raw,
            Err(e) => return Some(Err(e)),
        };
        let frame = raw_to_skeleton(&raw, self.records.line_no());
        if frame.is_err() {
            self.records.failed = true;
        }
        Some(frame)
    }
}

/// Open a skeleton replay. The header is validated immediately; frames are
/// parsed as the iterator is advanced.
pub fn read_replay<R: BufRead>(source: R) -> Result<ReplayReader<R>, ReplayError> {
    let records = RecordReader::new(source)?;
    if records.joint_set() != SKELETON_JOINT_SET {
        return Err(ReplayError::MalformedHeader(format!(
            "expected joint set `{SKELETON_JOINT_SET}`, found `{}`",
            records.joint_set()
        )));
    }
    Ok(ReplayReader { records })
}

/// Write a skeleton replay and return the number of frames written.
pub fn write_replay<'a, I, W>(frames: I, mut sink: W) -> io::Result<usize>
where
    I: IntoIterator<Item = &'a SkeletonFrame>,
    W: Write,
{
    writeln!(sink, "{}", header_line(SKELETON_JOINT_SET))?;
    let mut count = 0;
    for frame in frames {
        writeln!(sink, "{}", format_frame(frame))?;
        count += 1;
    }
    sink.flush()?;
    Ok(count)
}

fn trim_eol(line: &str) -> &str {
    line.trim_end_matches(['\n', '\r'])
}
