//! Long-format study data for a groups × time design.
//!
//! CSV input has the header `subject,group,time,value`; `time` is one of
//! `pre`, `post`, `followup`. Only complete cases are accepted: a subject
//! missing any time level that appears in the file is rejected by name.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Deserialize;

use crate::error::StatsError;

/// Time levels in analysis order.
pub const TIME_LEVELS: [&str; 3] = ["pre", "post", "followup"];

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub subject: String,
    pub group: String,
    pub time: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    /// Index into [`StudyDataset::groups`].
    pub group: usize,
    /// One value per time level.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset {
    levels: Vec<String>,
    groups: Vec<String>,
    subjects: Vec<Subject>,
}

impl StudyDataset {
    /// Build from records. `level_order` fixes the order of time levels;
    /// levels absent from every record are dropped. Groups are sorted by
    /// name and subjects by group, then first appearance.
    pub fn from_records(
        records: impl IntoIterator<Item = Record>,
        level_order: &[&str],
    ) -> Result<Self, StatsError> {
        let mut by_subject: BTreeMap<String, (usize, String, BTreeMap<String, f64>)> = BTreeMap::new();
        let mut used_levels = BTreeSet::new();
        for (order, r) in records.into_iter().enumerate() {
            if !level_order.contains(&r.time.as_str()) {
                return Err(StatsError::Csv { line: 0, reason: format!("unknown time level `{}`", r.time) });
            }
            if !r.value.is_finite() {
                return Err(StatsError::NonFinite(r.subject));
            }
            let entry = by_subject
                .entry(r.subject.clone())
                .or_insert_with(|| (order, r.group.clone(), BTreeMap::new()));
            if entry.1 != r.group {
                return Err(StatsError::GroupConflict(r.subject));
            }
            if entry.2.insert(r.time.clone(), r.value).is_some() {
                return Err(StatsError::DuplicateObservation { subject: r.subject, time: r.time });
            }
            used_levels.insert(r.time);
        }
        let levels: Vec<String> = level_order
            .iter()
            .filter(|l| used_levels.contains(**l))
            .map(|l| l.to_string())
            .collect();
        let groups: Vec<String> = by_subject
            .values()
            .map(|(_, g, _)| g.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut ordered: Vec<(usize, String, String, BTreeMap<String, f64>)> = by_subject
            .into_iter()
            .map(|(id, (order, group, values))| (order, id, group, values))
            .collect();
        ordered.sort_by_key(|(order, ..)| *order);
        let mut subjects = Vec::with_capacity(ordered.len());
        for (_, id, group, values) in ordered {
            let row: Option<Vec<f64>> = levels.iter().map(|l| values.get(l).copied()).collect();
            let values = row.ok_or_else(|| StatsError::IncompleteCases(id.clone()))?;
            let group = groups.iter().position(|g| *g == group).expect("group was collected");
            subjects.push(Subject { id, group, values });
        }
        subjects.sort_by_key(|s| s.group);
        Self::validated(levels, groups, subjects)
    }

    /// Build from per-group matrices of subject × time values. Subject ids
    /// are generated as `<group>-<n>`.
    pub fn from_groups(levels: &[&str], groups: Vec<(String, Vec<Vec<f64>>)>) -> Result<Self, StatsError> {
        let mut subjects = Vec::new();
        let mut names = Vec::new();
        for (g, (name, rows)) in groups.into_iter().enumerate() {
            for (i, values) in rows.into_iter().enumerate() {
                let id = format!("{name}-{}", i + 1);
                if values.len() != levels.len() {
                    return Err(StatsError::IncompleteCases(id));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(StatsError::NonFinite(id));
                }
                subjects.push(Subject { id, group: g, values });
            }
            names.push(name);
        }
        Self::validated(levels.iter().map(|l| l.to_string()).collect(), names, subjects)
    }

    fn validated(levels: Vec<String>, groups: Vec<String>, subjects: Vec<Subject>) -> Result<Self, StatsError> {
        if levels.len() < 2 {
            return Err(StatsError::BadDesign("two time levels"));
        }
        if groups.len() < 2 {
            return Err(StatsError::BadDesign("two groups"));
        }
        for (g, name) in groups.iter().enumerate() {
            if subjects.iter().filter(|s| s.group == g).count() < 2 {
                return Err(StatsError::TooFewSubjects(name.clone()));
            }
        }
        Ok(Self { levels, groups, subjects })
    }

    /// Read long-format CSV.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, StatsError> {
        #[derive(Deserialize)]
        struct Row {
            subject: String,
            group: String,
            time: String,
            value: f64,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| StatsError::Csv { line: 1, reason: e.to_string() })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["subject", "group", "time", "value"] {
            return Err(StatsError::Csv { line: 1, reason: "header must be `subject,group,time,value`".into() });
        }
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| StatsError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row: Row = record
                .deserialize(Some(&headers))
                .map_err(|e| StatsError::Csv { line, reason: e.to_string() })?;
            if !TIME_LEVELS.contains(&row.time.as_str()) {
                return Err(StatsError::Csv { line, reason: format!("time must be pre, post or followup, got `{}`", row.time) });
            }
            records.push(Record { subject: row.subject, group: row.group, time: row.time, value: row.value });
        }
        Self::from_records(records, &TIME_LEVELS)
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn group_size(&self, group: usize) -> usize {
        self.subjects.iter().filter(|s| s.group == group).count()
    }

    /// Values of one (group, time) cell.
    pub fn cell(&self, group: usize, level: usize) -> impl Iterator<Item = f64> + '_ {
        self.subjects.iter().filter(move |s| s.group == group).map(move |s| s.values[level])
    }

    /// A copy with `f` applied to every value.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.subjects {
            for v in &mut s.values {
                *v = f(*v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub group: String,
    pub time: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Mean and SD for every (group, time) cell, groups outermost.
pub fn descriptives(data: &StudyDataset) -> Result<Vec<CellSummary>, StatsError> {
    let mut out = Vec::new();
    for (g, group) in data.groups().iter().enumerate() {
        for (t, time) in data.levels().iter().enumerate() {
            let values: Vec<f64> = data.cell(g, t).collect();
            if values.is_empty() {
                return Err(StatsError::EmptyCell { group: group.clone(), time: time.clone() });
            }
            out.push(CellSummary {
                group: group.clone(),
                time: time.clone(),
                n: values.len(),
                mean: mean(&values),
                sd: sample_sd(&values),
            });
        }
    }
    Ok(out)
}
