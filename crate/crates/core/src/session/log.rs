//! Append-only session log.
//!
//! ```text
//! L 1
//! C <key> = <value>                      config and template provenance
//! A height_m=<m> arm_length_m=<m> root=<x>,<y>,<z> posture_scale=<s> arm_scale=<s> height_scale=<s>
//! E <seq> <t_ms> <kind> <payload>        telemetry event
//! R <run> <score> <start_ms> <end_ms> <voided 0|1> <hit_ms|-> x10
//! T <tier> <complete-runs>
//! ```
//!
//! All `C` lines precede the body. Body lines appear in the order they were
//! produced. Reals are printed in shortest round-trip form, so reading and
//! re-writing a log reproduces it byte for byte.

use std::io::{self, BufRead, Write};

use crate::error::SessionError;
use crate::model::{Anthropometry, Vec3};
use crate::session::FeedbackTier;
use crate::stroke::{RunResult, BALL_COUNT};
use crate::stream::telemetry::TelemetryEvent;

pub const LOG_HEADER: &str = "L 1";

/// Body measurements and the scale factors derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub anthropometry: Anthropometry,
    pub root: Vec3,
    pub posture_scale: f64,
    pub arm_scale: f64,
    pub height_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Calibrated(Calibration),
    Event(TelemetryEvent),
    Run(RunResult),
    Tier(FeedbackTier, u8),
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        match self {
            LogEntry::Calibrated(c) => format!(
                "A height_m={} arm_length_m={} root={},{},{} posture_scale={} arm_scale={} height_scale={}",
                c.anthropometry.height_m(),
                c.anthropometry.arm_length_m(),
                c.root.x,
                c.root.y,
                c.root.z,
                c.posture_scale,
                c.arm_scale,
                c.height_scale
            ),
            LogEntry::Event(e) => e.to_string(),
            LogEntry::Run(r) => {
                let mut line = format!(
                    "R {} {} {} {} {}",
                    r.run,
                    r.score,
                    r.start_ms,
                    r.end_ms,
                    u8::from(r.voided)
                );
                for t in &r.hit_times {
                    match t {
                        Some(t) => line.push_str(&format!(" {t}")),
                        None => line.push_str(" -"),
                    }
                }
                line
            }
            LogEntry::Tier(tier, complete) => format!("T {} {complete}", tier.slug()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    header: Vec<(String, String)>,
    entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn new(header: Vec<(String, String)>) -> Self {
        Self { header, entries: Vec::new() }
    }

    pub fn header(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn events(&self) -> impl Iterator<Item = &TelemetryEvent> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Event(ev) => Some(ev),
            _ => None,
        })
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunResult> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Run(r) => Some(r),
            _ => None,
        })
    }

    pub fn tier(&self) -> Option<(FeedbackTier, u8)> {
        self.entries.iter().find_map(|e| match e {
            LogEntry::Tier(t, c) => Some((*t, *c)),
            _ => None,
        })
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.entries.iter().find_map(|e| match e {
            LogEntry::Calibrated(c) => Some(c),
            _ => None,
        })
    }

    /// Header lines as written, each without a trailing newline.
    pub fn header_lines(&self) -> Vec<String> {
        std::iter::once(LOG_HEADER.to_string())
            .chain(self.header.iter().map(|(k, v)| format!("C {k} = {v}")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in self.header_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        for entry in &self.entries {
            out.push_str(&entry.to_line());
            out.push('\n');
        }
        out
    }
}

pub fn write_log<W: Write>(log: &SessionLog, mut sink: W) -> io::Result<()> {
    sink.write_all(log.to_text().as_bytes())?;
    sink.flush()
}

fn malformed(line: usize, reason: impl Into<String>) -> SessionError {
    SessionError::MalformedLog { line, reason: reason.into() }
}

fn parse_kv<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str, SessionError> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| malformed(line, format!("expected `{key}=`")))
}

fn parse_f64(s: &str, line: usize) -> Result<f64, SessionError> {
    s.parse().map_err(|_| malformed(line, format!("bad number `{s}`")))
}

fn parse_calibration(rest: &str, line: usize) -> Result<Calibration, SessionError> {
    let tokens: Vec<&str> = rest.split(' ').collect();
    if tokens.len() != 6 {
        return Err(malformed(line, "calibration record needs six fields"));
    }
    let height = parse_f64(parse_kv(tokens[0], "height_m", line)?, line)?;
    let arm = parse_f64(parse_kv(tokens[1], "arm_length_m", line)?, line)?;
    let root: Vec<f64> = parse_kv(tokens[2], "root", line)?
        .split(',')
        .map(|v| parse_f64(v, line))
        .collect::<Result<_, _>>()?;
    if root.len() != 3 {
        return Err(malformed(line, "root needs three coordinates"));
    }
    Ok(Calibration {
        anthropometry: Anthropometry::new(height, arm).map_err(|e| malformed(line, e.to_string()))?,
        root: Vec3::new(root[0], root[1], root[2]),
        posture_scale: parse_f64(parse_kv(tokens[3], "posture_scale", line)?, line)?,
        arm_scale: parse_f64(parse_kv(tokens[4], "arm_scale", line)?, line)?,
        height_scale: parse_f64(parse_kv(tokens[5], "height_scale", line)?, line)?,
    })
}

fn parse_run(rest: &str, line: usize) -> Result<RunResult, SessionError> {
    let tokens: Vec<&str> = rest.split(' ').collect();
    if tokens.len() != 5 + BALL_COUNT {
        return Err(malformed(line, "run record needs 15 fields"));
    }
    let int = |s: &str| s.parse::<u64>().map_err(|_| malformed(line, format!("bad integer `{s}`")));
    let run = u8::try_from(int(tokens[0])?).map_err(|_| malformed(line, "bad run index"))?;
    let score = u32::try_from(int(tokens[1])?).map_err(|_| malformed(line, "bad score"))?;
    let voided = match tokens[4] {
        "0" => false,
        "1" => true,
        _ => return Err(malformed(line, "voided flag must be 0 or 1")),
    };
    let mut hit_times = [None; BALL_COUNT];
    for (slot, token) in hit_times.iter_mut().zip(&tokens[5..]) {
        *slot = match *token {
            "-" => None,
            t => Some(int(t)?),
        };
    }
    Ok(RunResult { run, hit_times, score, start_ms: int(tokens[2])?, end_ms: int(tokens[3])?, voided })
}

/// Parse a session log.
pub fn read_log<R: BufRead>(source: R) -> Result<SessionLog, SessionError> {
    let mut lines = source.lines().enumerate();
    let first = lines
        .next()
        .map(|(_, l)| l)
        .transpose()
        .map_err(|e| malformed(1, e.to_string()))?;
    if first.as_deref() != Some(LOG_HEADER) {
        return Err(malformed(1, "expected `L 1`"));
    }
    let mut log = SessionLog::new(Vec::new());
    let mut in_body = false;
    for (i, line) in lines {
        let n = i + 1;
        let line = line.map_err(|e| malformed(n, e.to_string()))?;
        let (tag, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        match tag {
            "C" if !in_body => {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| malformed(n, "expected `C key = value`"))?;
                log.header.push((k.to_string(), v.to_string()));
            }
            "C" => return Err(malformed(n, "config line after body")),
            "A" => log.push(LogEntry::Calibrated(parse_calibration(rest, n)?)),
            "E" => {
                let event: TelemetryEvent = line.parse().map_err(|e| malformed(n, format!("{e}")))?;
                log.push(LogEntry::Event(event));
            }
            "R" => log.push(LogEntry::Run(parse_run(rest, n)?)),
            "T" => {
                let (slug, count) = rest.split_once(' ').ok_or_else(|| malformed(n, "bad tier record"))?;
                let tier = FeedbackTier::from_slug(slug).ok_or_else(|| malformed(n, "unknown tier"))?;
                let count = count.parse().map_err(|_| malformed(n, "bad complete count"))?;
                log.push(LogEntry::Tier(tier, count));
            }
            _ => return Err(malformed(n, format!("unknown record `{tag}`"))),
        }
        if tag != "C" {
            in_body = true;
        }
    }
    Ok(log)
}
