use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use shadowdrive::assessment::{parse_mott_lockhart, parse_stroke_error, score_mott_lockhart, score_stroke_error};
use shadowdrive::session::read_log;
use shadowdrive::stats::report::{
    anova_table, descriptives_table, likert_table, posthoc_table, sphericity_text, Table,
};
use shadowdrive::stats::{
    descriptives, likert_summary, mixed_anova, posthoc, read_likert_csv, CorrectionPolicy, PosthocFamily, StudyDataset,
};

#[derive(Args)]
pub struct ScoreArgs {
    /// Judged-event file.
    file: PathBuf,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Long-format CSV: `subject,group,time,value`.
    file: PathBuf,
    /// auto, none, gg or hf.
    #[arg(long, default_value = "auto")]
    correction: CorrectionPolicy,
    /// time, cells or time-within-groups; repeatable.
    #[arg(long = "posthoc", default_value = "time")]
    posthoc: Vec<PosthocFamily>,
    /// Write `report.txt` and CSV twins of every table here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Session logs to tabulate.
    logs: Vec<PathBuf>,
    /// Questionnaire CSV to summarize.
    #[arg(long)]
    likert: Option<PathBuf>,
    /// Write `report.txt` and CSV twins of every table here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Text report plus named CSV twins.
struct Output {
    text: String,
    csv: Vec<(String, String)>,
}

impl Output {
    fn new() -> Self {
        Self { text: String::new(), csv: Vec::new() }
    }

    fn section(&mut self, title: &str, text: &Table, precise: &Table, csv_name: &str) {
        self.text.push_str(&format!("\n{title}\n"));
        self.text.push_str(&text.to_text());
        self.csv.push((csv_name.to_string(), precise.to_csv()));
    }

    fn finish(self, out_dir: Option<&Path>) -> Result<ExitCode> {
        print!("{}", self.text);
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write(dir, "report.txt", &self.text)?;
            for (name, csv) in &self.csv {
                write(dir, name, csv)?;
            }
        }
        Ok(ExitCode::SUCCESS)
    }
}

fn write_csv(path: Option<&Path>, table: &Table) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, table.to_csv()).with_context(|| format!("writing {}", p.display())),
        None => Ok(()),
    }
}

pub fn score_ml(args: ScoreArgs) -> Result<ExitCode> {
    let runs = parse_mott_lockhart(&read(&args.file)?).with_context(|| format!("in {}", args.file.display()))?;
    let result = score_mott_lockhart(&runs)?;
    let mut table = Table::new(&["run", "successes", "restarts"]);
    for (i, run) in runs.iter().enumerate() {
        table.rows.push(vec![(i + 1).to_string(), run.count().to_string(), run.restarts().len().to_string()]);
    }
    print!("{}", table.to_text());
    println!("final score {}", result.final_score);
    write_csv(args.csv.as_deref(), &table)?;
    Ok(ExitCode::SUCCESS)
}

pub fn score_se(args: ScoreArgs) -> Result<ExitCode> {
    let trials = parse_stroke_error(&read(&args.file)?).with_context(|| format!("in {}", args.file.display()))?;
    let result = score_stroke_error(&trials)?;
    let mut table = Table::new(&["trial", "judgment"]);
    for (i, j) in result.judgments.iter().enumerate() {
        table.rows.push(vec![(i + 1).to_string(), j.to_string()]);
    }
    println!("errors {} of {}", result.errors, trials.len());
    write_csv(args.csv.as_deref(), &table)?;
    Ok(ExitCode::SUCCESS)
}

pub fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let file = File::open(&args.file).with_context(|| format!("opening {}", args.file.display()))?;
    let data = StudyDataset::from_csv(BufReader::new(file)).with_context(|| format!("in {}", args.file.display()))?;
    let table = mixed_anova(&data, args.correction)?;
    let families: Vec<String> = args.posthoc.iter().map(|f| f.to_string()).collect();

    let mut out = Output::new();
    out.text.push_str(&format!(
        "data {}: {} subjects, groups {}, levels {}\ncorrection policy {:?}, post-hoc {}\n",
        args.file.display(),
        data.n_subjects(),
        data.groups().join(" "),
        data.levels().join(" "),
        args.correction,
        families.join(" "),
    ));
    let cells = descriptives(&data)?;
    out.section("Descriptives", &descriptives_table(&cells, false), &descriptives_table(&cells, true), "descriptives.csv");
    out.section("Mixed ANOVA", &anova_table(&table, false), &anova_table(&table, true), "anova.csv");
    out.text.push_str(&sphericity_text(&table));
    for family in &args.posthoc {
        for (name, t) in posthoc(&data, &table, *family)? {
            let label = if name == family.to_string() { name.clone() } else { format!("{family} {name}") };
            let file = format!("posthoc-{}.csv", label.replace(' ', "-"));
            out.section(
                &format!("Tukey-HSD ({label})"),
                &posthoc_table(&label, &t, false),
                &posthoc_table(&label, &t, true),
                &file,
            );
        }
    }
    out.finish(args.out_dir.as_deref())
}

pub fn report(args: ReportArgs) -> Result<ExitCode> {
    let mut out = Output::new();
    if !args.logs.is_empty() {
        let mut runs = Table::new(&["session", "run", "score", "hits", "voided", "start_ms", "end_ms"]);
        let mut blocks = Table::new(&["session", "outcome", "complete_runs"]);
        for path in &args.logs {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let log = read_log(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
            let id = log.header_value("session_id").unwrap_or("?").to_string();
            for r in log.runs() {
                runs.rows.push(vec![
                    id.clone(),
                    r.run.to_string(),
                    r.score.to_string(),
                    r.hit_count().to_string(),
                    (if r.voided { "yes" } else { "no" }).into(),
                    r.start_ms.to_string(),
                    r.end_ms.to_string(),
                ]);
            }
            let (outcome, complete) = match log.tier() {
                Some((tier, complete)) => (tier.slug().to_string(), complete.to_string()),
                None => (format!("aborted:{}", crate::session::abort_reason(&log).unwrap_or("unknown")), "-".into()),
            };
            blocks.rows.push(vec![id, outcome, complete]);
        }
        out.section("Runs", &runs, &runs, "runs.csv");
        out.section("Blocks", &blocks, &blocks, "blocks.csv");
    }
    if let Some(path) = &args.likert {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let responses = read_likert_csv(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
        let table = likert_table(&likert_summary(&responses)?);
        out.section("Questionnaire", &table, &table, "likert.csv");
    }
    out.finish(args.out_dir.as_deref())
}
