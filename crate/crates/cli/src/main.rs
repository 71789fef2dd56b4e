//! `shadowdrive`: replay and serve training sessions, generate fixtures,
//! score skill tests and analyze study data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analysis;
mod session;
mod settings;

#[derive(Parser)]
#[command(name = "shadowdrive", version, about = "Forehand-drive shadow-training engine")]
struct Cli {
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct SettingsArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score a recorded skeleton stream and write its session log.
    Replay(session::ReplayArgs),
    /// Run the live session server.
    Serve(session::ServeArgs),
    /// Generate a synthetic replay file.
    Synthesize(session::SynthesizeArgs),
    /// Score a Mott-Lockhart test file.
    ScoreMl(analysis::ScoreArgs),
    /// Score a Stroke Error test file.
    ScoreSe(analysis::ScoreArgs),
    /// Mixed ANOVA, post-hoc tests and descriptives for a study CSV.
    Analyze(analysis::AnalyzeArgs),
    /// Tabulate session logs and questionnaire responses.
    Report(analysis::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(args) => session::replay(&cli.settings, args),
        Command::Serve(args) => session::serve(&cli.settings, args),
        Command::Synthesize(args) => session::synthesize(&cli.settings, args),
        Command::ScoreMl(args) => analysis::score_ml(args),
        Command::ScoreSe(args) => analysis::score_se(args),
        Command::Analyze(args) => analysis::analyze(args),
        Command::Report(args) => analysis::report(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
