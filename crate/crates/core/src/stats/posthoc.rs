//! Tukey-HSD pairwise comparisons (Tukey-Kramer for unequal sizes).

use std::fmt;
use std::str::FromStr;

use crate::error::StatsError;
use crate::stats::anova::MixedAnovaTable;
use crate::stats::dataset::StudyDataset;
use crate::stats::distributions::ptukey_upper;

pub const POSTHOC_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// mean(a) - mean(b)
    pub diff: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosthocTable {
    pub comparisons: Vec<Comparison>,
    /// Number of means in the family.
    pub r: usize,
    pub ms_error: f64,
    pub df_error: f64,
}

#[derive(Debug, Clone)]
pub struct CellMean {
    pub label: String,
    pub mean: f64,
    pub n: usize,
}

/// All pairs i < j of `cells`, with q = |m_i - m_j| / sqrt(MS/2 (1/n_i + 1/n_j))
/// and p from the studentized range with r = number of cells.
pub fn tukey_hsd(cells: &[CellMean], ms_error: f64, df_error: f64) -> Result<PosthocTable, StatsError> {
    if cells.len() < 2 {
        return Err(StatsError::BadDesign("two means to compare"));
    }
    if !(ms_error > 0.0 && df_error > 0.0) {
        return Err(StatsError::NonPositiveVariance);
    }
    let r = cells.len();
    let mut comparisons = Vec::with_capacity(r * (r - 1) / 2);
    for i in 0..r {
        for j in i + 1..r {
            let (a, b) = (&cells[i], &cells[j]);
            let diff = a.mean - b.mean;
            let se = (ms_error / 2.0 * (1.0 / a.n as f64 + 1.0 / b.n as f64)).sqrt();
            let q = diff.abs() / se;
            let p = ptukey_upper(q, r, df_error);
            comparisons.push(Comparison {
                a: a.label.clone(),
                b: b.label.clone(),
                diff,
                q,
                p,
                significant: p < POSTHOC_ALPHA,
            });
        }
    }
    Ok(PosthocTable { comparisons, r, ms_error, df_error })
}

/// Which means are compared after a mixed ANOVA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosthocFamily {
    /// Marginal time means, error term MS_within.
    TimeLevels,
    /// Every group × time cell, error pooled from both error strata.
    Cells,
    /// Time pairs inside each group separately, error term MS_within.
    TimeWithinGroups,
}

impl fmt::Display for PosthocFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PosthocFamily::TimeLevels => "time",
            PosthocFamily::Cells => "cells",
            PosthocFamily::TimeWithinGroups => "time-within-groups",
        })
    }
}

impl FromStr for PosthocFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(PosthocFamily::TimeLevels),
            "cells" => Ok(PosthocFamily::Cells),
            "time-within-groups" => Ok(PosthocFamily::TimeWithinGroups),
            _ => Err(format!("unknown post-hoc family `{s}` (time, cells, time-within-groups)")),
        }
    }
}

/// One table per family member: a single table for `TimeLevels` and
/// `Cells`, one per group for `TimeWithinGroups`.
pub fn posthoc(
    data: &StudyDataset,
    table: &MixedAnovaTable,
    family: PosthocFamily,
) -> Result<Vec<(String, PosthocTable)>, StatsError> {
    let k = data.levels().len();
    let cell_mean = |g: usize, t: usize| {
        let v: Vec<f64> = data.cell(g, t).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    match family {
        PosthocFamily::TimeLevels => {
            let n = data.n_subjects();
            let cells: Vec<CellMean> = data
                .levels()
                .iter()
                .enumerate()
                .map(|(t, l)| CellMean {
                    label: l.clone(),
                    mean: data.subjects().iter().map(|s| s.values[t]).sum::<f64>() / n as f64,
                    n,
                })
                .collect();
            Ok(vec![("time".into(), tukey_hsd(&cells, table.ms_within_error, table.df_within_error)?)])
        }
        PosthocFamily::Cells => {
            let mut cells = Vec::new();
            for (g, group) in data.groups().iter().enumerate() {
                for (t, level) in data.levels().iter().enumerate() {
                    cells.push(CellMean {
                        label: format!("{group}/{level}"),
                        mean: cell_mean(g, t),
                        n: data.group_size(g),
                    });
                }
            }
            let ss = table.ss.subjects_within_groups + table.ss.within_error;
            let df = (k * (table.n_subjects - table.n_groups)) as f64;
            Ok(vec![("cells".into(), tukey_hsd(&cells, ss / df, df)?)])
        }
        PosthocFamily::TimeWithinGroups => data
            .groups()
            .iter()
            .enumerate()
            .map(|(g, group)| {
                let cells: Vec<CellMean> = data
                    .levels()
                    .iter()
                    .enumerate()
                    .map(|(t, l)| CellMean { label: l.clone(), mean: cell_mean(g, t), n: data.group_size(g) })
                    .collect();
                Ok((group.clone(), tukey_hsd(&cells, table.ms_within_error, table.df_within_error)?))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(label: &str, mean: f64, n: usize) -> CellMean {
        CellMean { label: label.into(), mean, n }
    }

    #[test]
    fn equal_means_give_q_zero() {
        let t = tukey_hsd(&[cell("a", 3.0, 5), cell("b", 3.0, 5)], 2.0, 20.0).unwrap();
        assert_eq!((t.comparisons[0].q, t.comparisons[0].p), (0.0, 1.0));
        assert!(!t.comparisons[0].significant);
    }

    #[test]
    fn kramer_standard_error() {
        // n = 4 and 12: se = sqrt(2/2 * (1/4 + 1/12)) = sqrt(1/3)
        let t = tukey_hsd(&[cell("a", 1.0, 4), cell("b", 2.0, 12)], 2.0, 14.0).unwrap();
        let c = &t.comparisons[0];
        assert_eq!(c.diff, -1.0);
        assert!((c.q - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_error_term() {
        let cells = [cell("a", 1.0, 4), cell("b", 2.0, 4)];
        assert_eq!(tukey_hsd(&cells, 0.0, 10.0), Err(StatsError::NonPositiveVariance));
        assert!(tukey_hsd(&cells[..1], 1.0, 10.0).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in [PosthocFamily::TimeLevels, PosthocFamily::Cells, PosthocFamily::TimeWithinGroups] {
            assert_eq!(f.to_string().parse::<PosthocFamily>(), Ok(f));
        }
    }
}
