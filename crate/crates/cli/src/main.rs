mod artifacts;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evoperf_core::abstraction::Language;

#[derive(Parser, Debug)]
#[command(name = "evoperf", version, about = "Evolutionary LLM search for faster programs")]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Problems processed concurrently. Timed runs stay serialized.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed recorded in the run manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mine optimization patterns from a corpus of slow/fast pairs.
    BuildBase {
        /// JSONL corpus: problem_id, slow_code, fast_code, language.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reject corpora in any other language.
        #[arg(long)]
        language: Option<Language>,
    },
    /// Search for faster versions of every problem.
    Optimize(OptimizeArgs),
    /// Judge ranked results on the private suites.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Top-k cutoffs.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
        k: Vec<usize>,
        /// Include the NC/NO/NH/FH breakdown in the table.
        #[arg(long)]
        levels: bool,
    },
    /// Print a summary of search results or re-render an evaluation.
    Report {
        /// Directory written by `optimize`.
        #[arg(long, conflicts_with = "eval", required_unless_present = "eval")]
        results: Option<PathBuf>,
        /// File written by `evaluate`.
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long)]
        levels: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    problems: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Serve completions from a cassette instead of the network.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Append every live completion to a cassette.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Continue from checkpoints and skip finished problems.
    #[arg(long)]
    resume: bool,
    /// JSONL of {problem_id, code} used as initial population instead of
    /// model-generated seeds.
    #[arg(long)]
    seeds: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let global = commands::Global {
        config: cli.config,
        jobs: cli.jobs,
        seed: cli.seed,
    };
    let outcome = match cli.command {
        Command::BuildBase { corpus, out, language } => commands::build_base(&corpus, &out, language),
        Command::Optimize(a) => commands::optimize(
            &global,
            &commands::OptimizeInputs {
                problems: a.problems,
                base: a.base,
                out: a.out,
                replay: a.replay,
                record: a.record,
                resume: a.resume,
                seeds: a.seeds,
            },
        ),
        Command::Evaluate {
            results,
            problems,
            out,
            k,
            levels,
        } => commands::evaluate(&global, &results, &problems, &out, &k, levels),
        Command::Report {
            results,
            eval,
            k,
            levels,
            out,
        } => commands::report(results.as_deref(), eval.as_deref(), k.as_deref(), levels, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
