mod analyze;
mod error;
mod pipeline;
mod provenance;
mod runs;
mod sweep;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use error::{CliError, CliResult};
use provenance::RunRecord;

#[derive(Parser, Debug)]
#[command(
    name = "uniconn",
    version,
    about = "Prior-guided multimodal brain-graph fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort with planted abnormal connections.
    Synth(SynthArgs),
    /// Fit the DPP/PCA/KDE latent prior on a dataset.
    EstimatePrior(PriorArgs),
    /// Train, by default under stratified k-fold cross-validation.
    Train(TrainArgs),
    /// Score a trained run on its held-out subjects.
    Evaluate(EvaluateArgs),
    /// Cross-validate over a grid of configuration values.
    Sweep(SweepArgs),
    /// Group statistics on united connectivity and ROI importance.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Write every subject's united-connectivity matrix.
    ExportUc(RunDataArgs),
    /// Re-execute a command from its run.json record.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PriorArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Comma-separated 0-based ROI indices forced into the prototype set.
    #[arg(long = "seeds-roi", value_delimiter = ',')]
    seeds_roi: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Prior shared by every fold; fitted per fold when omitted.
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1 trains a single model on every subject.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// name=values with values as a list (0,2,4), an integer range
    /// (0..20:2) or a decade range (1e-2..1e-6). Repeatable.
    #[arg(long = "param", required = true)]
    params: Vec<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunDataArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Welch t-test per edge, patients vs controls.
    Ttest(RunDataArgs),
    /// ROI importance by shielding each region.
    Importance(ImportanceArgs),
    /// Altered connections and intra/inter-network strength.
    Altered(AlteredArgs),
}

#[derive(Args, Debug)]
struct ImportanceArgs {
    #[command(flatten)]
    io: RunDataArgs,
    /// Retrain the full cross-validation per shielded ROI.
    #[arg(long)]
    retrain: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct AlteredArgs {
    #[command(flatten)]
    io: RunDataArgs,
    #[arg(long, default_value = "global")]
    normalization: String,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    record: PathBuf,
    /// Replaces the recorded --out.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::EstimatePrior(_) => "estimate-prior",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
        Command::Analyze(AnalyzeCommand::Ttest(_)) => "analyze ttest",
        Command::Analyze(AnalyzeCommand::Importance(_)) => "analyze importance",
        Command::Analyze(AnalyzeCommand::Altered(_)) => "analyze altered",
        Command::ExportUc(_) => "export-uc",
        Command::Replay(_) => "replay",
    }
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(
        std::iter::once("uniconn".to_string()).chain(argv.iter().cloned()),
    ) {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::usage(e.to_string().trim_end())),
    };
    let record = RunRecord::new(command_name(&cli.command), &argv);
    match cli.command {
        Command::Synth(a) => pipeline::synth(a.config.as_deref(), a.seed, &a.out, record),
        Command::EstimatePrior(a) => {
            pipeline::estimate_prior(&a.data, a.m, &a.seeds_roi, &a.out, record)
        }
        Command::Train(a) => pipeline::train(
            &pipeline::TrainRequest {
                data: &a.data,
                prior: a.prior.as_deref(),
                config: a.config.as_deref(),
                folds: a.folds,
                jobs: a.jobs,
                seed: a.seed,
                out: &a.out,
            },
            record,
        ),
        Command::Evaluate(a) => pipeline::evaluate(&a.run, &a.data, &a.out, record),
        Command::Sweep(a) => sweep::sweep(
            &a.data,
            a.config.as_deref(),
            &a.params,
            a.folds,
            a.jobs,
            &a.out,
            record,
        ),
        Command::Analyze(AnalyzeCommand::Ttest(a)) => {
            analyze::ttest(&a.run, &a.data, &a.out, record)
        }
        Command::Analyze(AnalyzeCommand::Importance(a)) => {
            analyze::importance(&a.io.run, &a.io.data, &a.io.out, a.retrain, a.jobs, record)
        }
        Command::Analyze(AnalyzeCommand::Altered(a)) => {
            analyze::altered(&a.io.run, &a.io.data, &a.io.out, &a.normalization, record)
        }
        Command::ExportUc(a) => analyze::export_uc(&a.run, &a.data, &a.out, record),
        Command::Replay(a) => replay(&a.record, a.out.as_deref()),
    }
}

/// Reruns a recorded command from its recorded working directory after
/// checking that none of its inputs changed.
fn replay(record_path: &std::path::Path, out: Option<&std::path::Path>) -> CliResult<()> {
    let rec = RunRecord::read(record_path)?;
    let mut argv = rec.argv.clone();
    if let Some(out) = out {
        let out = std::path::absolute(out).map_err(|e| CliError::io(out, e))?;
        let pos = argv
            .iter()
            .position(|a| a == "--out")
            .filter(|&p| p + 1 < argv.len())
            .ok_or_else(|| CliError::config("recorded command has no --out"))?;
        argv[pos + 1] = out.to_string_lossy().into_owned();
    }
    if argv.first().is_some_and(|a| a == "replay") {
        return Err(CliError::config("a replay record cannot be replayed"));
    }
    std::env::set_current_dir(&rec.cwd).map_err(|e| CliError::io(&rec.cwd, e))?;
    rec.verify_inputs()?;
    run(argv)
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if let Err(e) = run(argv) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.error.exit_code());
    }
}
