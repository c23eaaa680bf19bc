//! shrag: index a corpus, ask questions against it, and evaluate
//! retrieval with the AND-count sweep and QSR metrics.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shrag::cli::{cmd_ask, cmd_eval, cmd_index, cmd_sweep};
use shrag::config::PipelineConfig;
use shrag::error::Error;

#[derive(Parser)]
#[command(name = "shrag", version, about = "Boolean-ladder retrieval pipeline with answer generation")]
struct Cli {
    /// Pipeline config file (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for traces and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON-lines corpus and write the index file.
    Index {
        corpus: PathBuf,
        /// Index file to write.
        #[arg(default_value = "index.json")]
        index: PathBuf,
    },
    /// Run the full pipeline for one query and print the answer.
    Ask {
        query: String,
        /// Query language tag (primary subtag, e.g. en or ko).
        #[arg(long, default_value = "en")]
        lang: String,
    },
    /// Run the AND-operator sweep over an eval set.
    Sweep {
        evalset: PathBuf,
        /// Repetitions per condition (deterministic configs collapse to 1).
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Collect documents per eval query and report QSR.
    Eval { evalset: PathBuf },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

/// Returns (stdout payload, stderr note). Output is written once at the
/// end so a closed pipe (e.g. `| head`) never panics mid-command.
fn run(cli: &Cli) -> Result<(String, String), Error> {
    match &cli.command {
        Command::Index { corpus, index } => {
            let report = cmd_index(corpus, index)?;
            let line = serde_json::to_string(&report).expect("report serializes");
            Ok((format!("{line}\n"), String::new()))
        }
        Command::Ask { query, lang } => {
            let config = load_config(cli)?;
            let outcome = cmd_ask(query, lang, &config, &cli.out)?;
            let mut out = String::new();
            out.push_str(&format!("## Title\n{}\n\n", outcome.answer.title));
            out.push_str(&format!("## Introduction\n{}\n\n", outcome.answer.introduction));
            out.push_str(&format!("## Main Body\n{}\n\n", outcome.answer.main_body));
            out.push_str(&format!("citations: {}\n", outcome.answer.citations.join(", ")));
            Ok((out, format!("trace: {}\n", outcome.trace_path.display())))
        }
        Command::Sweep { evalset, repetitions } => {
            let config = load_config(cli)?;
            let report = cmd_sweep(evalset, &config, &cli.out, *repetitions)?;
            let mut out = String::new();
            for row in &report.rows {
                out.push_str(&format!(
                    "and_count={} coverage={:.4} avg_docs={:.2} errors={}\n",
                    row.and_count, row.coverage_mean, row.avg_docs, row.errors
                ));
            }
            Ok((out, format!("reports written under {}\n", cli.out.display())))
        }
        Command::Eval { evalset } => {
            let config = load_config(cli)?;
            let summary = cmd_eval(evalset, &config)?;
            let mut out = format!("QSR: {:.3}\n", summary.qsr);
            for (lang, value) in &summary.qsr_by_lang {
                out.push_str(&format!("QSR[{lang}]: {value:.3}\n"));
            }
            out.push_str(&format!(
                "queries: {} failures: {}\n",
                summary.queries, summary.failures
            ));
            Ok((out, String::new()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            if e.use_stderr() {
                let _ = write!(std::io::stderr(), "{e}");
                return ExitCode::from(1);
            }
            let _ = write!(std::io::stdout(), "{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok((out, note)) => {
            // A closed downstream pipe is not an error.
            let _ = std::io::stdout().write_all(out.as_bytes());
            let _ = std::io::stderr().write_all(note.as_bytes());
            ExitCode::SUCCESS
        }
        Err(Error::Usage(message)) => {
            let _ = writeln!(std::io::stderr(), "usage error: {message}");
            ExitCode::from(1)
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(2)
        }
    }
}
