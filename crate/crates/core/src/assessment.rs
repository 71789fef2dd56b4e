//! Skill-test scoring from judged events.
//!
//! Two protocols:
//!
//! - **Mott-Lockhart**: three 30 s runs; each run counts strokes that cleared
//!   the net; the final score is the best run.
//! - **Stroke Error**: 30 fed balls, each judged correct or error by a coach;
//!   the score is the error count.
//!
//! Judgments are inputs. Nothing here looks at video.
//!
//! ## Mott-Lockhart file
//!
//! ```text
//! # comments and blank lines are ignored
//! run
//! hit 1200
//! hit 2950
//! restart 14100
//! run
//! run
//! hit 30000
//! ```
//!
//! Each `run` line opens a run; `hit <t_ms>` records a success and
//! `restart <t_ms>` a restart from the starting position. The window is the
//! closed interval `[0, 30000]` and restarts do not pause it. Exactly three
//! runs are required.
//!
//! ## Stroke Error file
//!
//! One trial per line, `<trial> correct|error`, trials numbered 1 to 30 in
//! order.

use std::fmt;
use std::str::FromStr;

use crate::error::AssessmentError;

pub const MOTT_LOCKHART_WINDOW_MS: u64 = 30_000;
pub const MOTT_LOCKHART_RUNS: usize = 3;
pub const STROKE_ERROR_TRIALS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MottLockhartRun {
    hits: Vec<u64>,
    restarts: Vec<u64>,
}

fn check_window(times: &[u64]) -> Result<(), AssessmentError> {
    match times.iter().find(|t| **t > MOTT_LOCKHART_WINDOW_MS) {
        Some(t) => Err(AssessmentError::OutOfWindowEvent { t_ms: *t }),
        None => Ok(()),
    }
}

impl MottLockhartRun {
    pub fn new(hits: Vec<u64>) -> Result<Self, AssessmentError> {
        Self::with_restarts(hits, Vec::new())
    }

    pub fn with_restarts(mut hits: Vec<u64>, mut restarts: Vec<u64>) -> Result<Self, AssessmentError> {
        check_window(&hits)?;
        check_window(&restarts)?;
        hits.sort_unstable();
        restarts.sort_unstable();
        Ok(Self { hits, restarts })
    }

    pub fn hits(&self) -> &[u64] {
        &self.hits
    }

    pub fn restarts(&self) -> &[u64] {
        &self.restarts
    }

    pub fn count(&self) -> u32 {
        self.hits.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MottLockhartResult {
    pub counts: [u32; MOTT_LOCKHART_RUNS],
    pub final_score: u32,
}

pub fn score_mott_lockhart(runs: &[MottLockhartRun]) -> Result<MottLockhartResult, AssessmentError> {
    let runs: &[MottLockhartRun; MOTT_LOCKHART_RUNS] = runs
        .try_into()
        .map_err(|_| AssessmentError::WrongArity { expected: MOTT_LOCKHART_RUNS, got: runs.len() })?;
    let counts = runs.each_ref().map(MottLockhartRun::count);
    let final_score = counts.iter().copied().max().unwrap_or(0);
    Ok(MottLockhartResult { counts, final_score })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Correct,
    Error,
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Judgment::Correct => "correct",
            Judgment::Error => "error",
        })
    }
}

impl FromStr for Judgment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" => Ok(Judgment::Correct),
            "error" => Ok(Judgment::Error),
            _ => Err(format!("expected `correct` or `error`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrokeErrorResult {
    pub judgments: Vec<Judgment>,
    pub errors: u32,
}

impl StrokeErrorResult {
    pub fn correct(&self) -> u32 {
        STROKE_ERROR_TRIALS as u32 - self.errors
    }
}

pub fn score_stroke_error(trials: &[Judgment]) -> Result<StrokeErrorResult, AssessmentError> {
    if trials.len() != STROKE_ERROR_TRIALS {
        return Err(AssessmentError::WrongArity { expected: STROKE_ERROR_TRIALS, got: trials.len() });
    }
    let errors = trials.iter().filter(|j| **j == Judgment::Error).count() as u32;
    Ok(StrokeErrorResult { judgments: trials.to_vec(), errors })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_error(line: usize, reason: impl Into<String>) -> AssessmentError {
    AssessmentError::Parse { line, reason: reason.into() }
}

pub fn parse_mott_lockhart(text: &str) -> Result<Vec<MottLockhartRun>, AssessmentError> {
    let mut runs: Vec<(Vec<u64>, Vec<u64>)> = Vec::new();
    for (n, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        if kind == "run" {
            if tokens.next().is_some() {
                return Err(parse_error(n, "`run` takes no arguments"));
            }
            runs.push((Vec::new(), Vec::new()));
            continue;
        }
        let t: u64 = match (tokens.next(), tokens.next()) {
            (Some(t), None) => t.parse().map_err(|_| parse_error(n, format!("bad time `{t}`")))?,
            _ => return Err(parse_error(n, "expected `<kind> <t_ms>`")),
        };
        let run = runs.last_mut().ok_or_else(|| parse_error(n, "event before the first `run`"))?;
        match kind {
            "hit" => run.0.push(t),
            "restart" => run.1.push(t),
            _ => return Err(parse_error(n, format!("unknown record `{kind}`"))),
        }
    }
    runs.into_iter()
        .map(|(hits, restarts)| MottLockhartRun::with_restarts(hits, restarts))
        .collect()
}

pub fn parse_stroke_error(text: &str) -> Result<Vec<Judgment>, AssessmentError> {
    let mut trials = Vec::new();
    for (n, line) in content_lines(text) {
        let (index, judgment) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_error(n, "expected `<trial> correct|error`"))?;
        let index: usize = index.parse().map_err(|_| parse_error(n, format!("bad trial number `{index}`")))?;
        if index != trials.len() + 1 {
            return Err(parse_error(n, format!("expected trial {}, got {index}", trials.len() + 1)));
        }
        trials.push(judgment.trim().parse().map_err(|e: String| parse_error(n, e))?);
    }
    Ok(trials)
}
