//! Plain-text tables and their CSV twins.
//!
//! Text tables round for reading (df and F to 2 places, p to 3 with `<.001`,
//! ηp² to 2). CSV carries full precision.

use std::fmt::Write as _;

use crate::stats::anova::MixedAnovaTable;
use crate::stats::dataset::CellSummary;
use crate::stats::likert::LikertSummary;
use crate::stats::posthoc::PosthocTable;

/// A rendered table: column headers and string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// Columns padded to equal width; first column left-aligned, the rest
    /// right-aligned.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.headers[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let mut s = String::new();
            for (c, cell) in cells.iter().enumerate() {
                if c == 0 {
                    let _ = write!(s, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(s, "  {cell:>w$}", w = widths[c]);
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&self.headers);
        for row in &self.rows {
            line(row);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

fn fixed(x: f64, places: usize) -> String {
    format!("{x:.places$}")
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "<.001".into()
    } else {
        let s = fixed(p, 3);
        s.strip_prefix('0').map(str::to_string).unwrap_or(s)
    }
}

/// Effect, df1, df2, F, P, eta_p2. `precise` selects full precision.
pub fn anova_table(table: &MixedAnovaTable, precise: bool) -> Table {
    let mut t = Table::new(&["Effect", "df1", "df2", "F", "P", "eta_p2"]);
    for r in &table.rows {
        t.rows.push(if precise {
            vec![
                r.effect.label().into(),
                r.df1.to_string(),
                r.df2.to_string(),
                r.f.to_string(),
                r.p.to_string(),
                r.eta_p2.to_string(),
            ]
        } else {
            vec![
                r.effect.label().into(),
                fixed(r.df1, 2),
                fixed(r.df2, 2),
                fixed(r.f, 2),
                p_text(r.p),
                fixed(r.eta_p2, 2),
            ]
        });
    }
    t
}

/// Sphericity diagnostics as `key value` lines.
pub fn sphericity_text(table: &MixedAnovaTable) -> String {
    let mut out = String::new();
    match table.sphericity {
        Some(s) => {
            let _ = writeln!(out, "epsilon_gg {:.4}", s.epsilon_gg);
            let _ = writeln!(out, "epsilon_hf {:.4}", s.epsilon_hf);
            match s.mauchly {
                Some(m) => {
                    let _ = writeln!(out, "mauchly_w {:.4} chi2 {:.3} df {} p {}", m.w, m.chi2, m.df, p_text(m.p));
                }
                None => out.push_str("mauchly_w n/a\n"),
            }
        }
        None => out.push_str("sphericity n/a (no within-subject variance)\n"),
    }
    let _ = writeln!(out, "correction {}", table.correction.label());
    out
}

pub fn descriptives_table(cells: &[CellSummary], precise: bool) -> Table {
    let mut t = Table::new(&["group", "time", "n", "mean", "sd"]);
    for c in cells {
        let (m, sd) = if precise { (c.mean.to_string(), c.sd.to_string()) } else { (fixed(c.mean, 2), fixed(c.sd, 2)) };
        t.rows.push(vec![c.group.clone(), c.time.clone(), c.n.to_string(), m, sd]);
    }
    t
}

pub fn posthoc_table(family: &str, table: &PosthocTable, precise: bool) -> Table {
    let mut t = Table::new(&["family", "a", "b", "diff", "q", "p", "significant"]);
    for c in &table.comparisons {
        let (d, q, p) = if precise {
            (c.diff.to_string(), c.q.to_string(), c.p.to_string())
        } else {
            (fixed(c.diff, 2), fixed(c.q, 2), p_text(c.p))
        };
        t.rows.push(vec![family.into(), c.a.clone(), c.b.clone(), d, q, p, (if c.significant { "yes" } else { "no" }).into()]);
    }
    t
}

pub fn likert_table(summary: &LikertSummary) -> Table {
    let mut t = Table::new(&["question", "n1", "n2", "n3", "n4", "n5", "respondents", "top2_pct"]);
    for (i, q) in summary.questions.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(q.counts.iter().map(|c| c.to_string()));
        row.push(q.respondents.to_string());
        row.push(q.top2_percent.to_string());
        t.rows.push(row);
    }
    t
}
