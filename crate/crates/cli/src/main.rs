//! `ctd`: generate datasets, train regimes, evaluate checkpoints and build
//! the results table.

mod commands;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser, Debug)]
#[command(name = "ctd", version, about = "Multi-target referential games with discrete channels")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the Decompose and Compose datasets.
    Gen(Common),
    /// Train (or zero-shot evaluate) one or more regimes.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset, or score a saved corpus.
    Eval(EvalArgs),
    /// Merge run reports into the results CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Thing,
    Qrc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Cb,
    Gs,
    Qt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    #[value(name = "D")]
    D,
    #[value(name = "CD")]
    Cd,
    #[value(name = "CTD")]
    Ctd,
    #[value(name = "CTDZS")]
    Ctdzs,
}

/// Options shared by every experiment command. Flags override values read
/// from `--config`; the output root is `--out`, else `$CTD_OUT`, else
/// `ctd-out`.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON experiment config; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; repeat or comma-separate for several runs.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long, value_enum)]
    dataset: Option<DatasetArg>,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Sender targets per game.
    #[arg(long)]
    targets: Option<usize>,
    #[arg(long, env = "CTD_OUT", default_value = "ctd-out")]
    out: PathBuf,
    /// Independent runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Regimes to run, in order; repeat or comma-separate.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    regime: Vec<RegimeArg>,
    /// Decompose checkpoint for CTD and CTDZS (default: the D run of the same seed).
    #[arg(long)]
    init: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, required_unless_present = "corpus_only")]
    checkpoint: Option<PathBuf>,
    /// Dataset file written by `ctd gen`.
    #[arg(long, required_unless_present = "corpus_only")]
    data: Option<PathBuf>,
    /// Evaluate a Decompose checkpoint on Compose data with longer messages.
    #[arg(long)]
    zero_shot: bool,
    /// Score a saved corpus without a model.
    #[arg(long, requires = "corpus")]
    corpus_only: bool,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Accuracy to report alongside a corpus-only evaluation.
    #[arg(long)]
    acc: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report files or directories searched for `report.json`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// One row per (dataset, channel, regime, length) with mean and std across seeds.
    #[arg(long)]
    aggregate: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Gen(c) => commands::gen(&c),
        Command::Train(t) => commands::train(&t.common, &t.regime, t.init.as_deref()),
        Command::Eval(e) => {
            if e.corpus_only {
                commands::eval_corpus(&e.common, e.corpus.as_deref().expect("clap requires --corpus"), e.acc)
            } else {
                commands::eval(
                    &e.common,
                    e.checkpoint.as_deref().expect("clap requires --checkpoint"),
                    e.data.as_deref().expect("clap requires --data"),
                    e.zero_shot,
                )
            }
        }
        Command::Report(r) => commands::report(&r.inputs, r.aggregate, r.output.as_deref()),
    }
}
