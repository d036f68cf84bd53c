use std::path::PathBuf;
use std::process::ExitCode;

use citecast::dataset::{self, SplitSpec, SyntheticConfig, YearRange, DEFAULT_HORIZON};
use citecast::experiment::{self, ExperimentSpec, SynthSpec};
use citecast::model::{self, ModelConfig};
use citecast::par::Execution;
use citecast::Result;
use clap::{Args, Parser, Subcommand};

const EXIT_CODES: &str = "\
Exit codes:
  0   success
  2   invalid command line
  3   file could not be read or written
  4   malformed corpus CSV
  5   invalid data or diverged training
  6   invalid argument value
  7   shape mismatch
  8   not enough data for the requested experiment
  9   unreadable model checkpoint
  10  JSON serialization failure";

/// Citation-count forecasting: NNCP sequence-to-sequence network against the
/// MEY, AVR and GMM baselines.
#[derive(Parser)]
#[command(name = "citecast", version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus CSV.
    Synth {
        #[arg(long, default_value_t = 5000)]
        papers: usize,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train NNCP on the training split and save the checkpoint.
    Train(ExperimentArgs),
    /// Predict every paper of a corpus with a saved checkpoint.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Score every method on the test split, per journal and overall.
    Evaluate(ExperimentArgs),
    /// Count which method best predicts each journal's most-cited test papers.
    Top100(ExperimentArgs),
    /// Sweep k = 0..7 over the fixed target years 7..n.
    Sensitivity(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Corpus CSV: paper_id,journal_id,publication_year,c0..cn
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "1980:1997")]
    train_years: YearRange,
    #[arg(long, default_value = "1998:2002")]
    test_years: YearRange,
    /// Last known year; years 0..=k are inputs.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Last predicted year n.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Comma-separated subset of NNCP,MEY,AVR,GMM.
    #[arg(long, default_value = "NNCP,MEY,AVR,GMM")]
    methods: String,
    /// Neighbours L for AVR and GMM.
    #[arg(long, default_value_t = 20)]
    neighbors: usize,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Global gradient-norm clip; off when absent.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also report yearly scores pooled over all (paper, year) pairs.
    #[arg(long)]
    pooled: bool,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, short)]
    quiet: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn load(&self) -> Result<(dataset::Corpus, ExperimentSpec)> {
        let corpus = dataset::load_corpus(&self.corpus, self.horizon)?;
        let spec = ExperimentSpec {
            k: self.k,
            n: self.horizon,
            methods: experiment::parse_methods(&self.methods)?,
            neighbors: self.neighbors,
            seed: self.seed,
            split: SplitSpec {
                train: self.train_years,
                test: self.test_years,
            },
            model: ModelConfig {
                hidden_dim: self.hidden,
                dropout_rate: self.dropout,
                epochs: self.epochs,
                learning_rate: self.lr,
                batch_size: self.batch,
                clip_norm: self.clip,
                ..ModelConfig::new(self.k, self.horizon)
            },
            pooled_yearly: self.pooled,
            out_dir: self.out.clone(),
            execution: execution(self.sequential),
            progress: !self.quiet,
        };
        spec.validate()?;
        Ok((corpus, spec))
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            papers,
            horizon,
            seed,
            out,
        } => {
            let spec = SynthSpec {
                papers,
                horizon,
                seed,
                journal_mix: dataset::default_journal_mix(),
                config: SyntheticConfig::default(),
                out,
            };
            let (_, summary) = experiment::run_synth(&spec)?;
            print!("{summary}");
            println!("wrote {}", spec.out.display());
        }
        Command::Train(args) => {
            let (corpus, spec) = args.load()?;
            let out = experiment::run_train(&corpus, &spec)?;
            if let (Some(first), Some(last)) = (out.epoch_losses.first(), out.epoch_losses.last()) {
                println!(
                    "loss {first:.4} -> {last:.4} over {} epochs",
                    out.epoch_losses.len()
                );
            }
            println!("wrote {}", spec.out_dir.join("model.ckpt").display());
        }
        Command::Predict {
            model: path,
            corpus,
            out,
            sequential,
        } => {
            let model = model::load_model(&path)?;
            let corpus = dataset::load_corpus(&corpus, model.config.n)?;
            let preds = experiment::run_predict(&model, &corpus, &out, execution(sequential))?;
            println!(
                "predicted {} papers, wrote {}",
                preds.len(),
                out.join("predictions.csv").display()
            );
        }
        Command::Evaluate(args) => {
            let (corpus, spec) = args.load()?;
            let report = experiment::run_evaluate(&corpus, &spec)?;
            print!("{}", report.to_text());
        }
        Command::Top100(args) => {
            let (corpus, spec) = args.load()?;
            print!("{}", experiment::run_top100(&corpus, &spec)?.to_text());
        }
        Command::Sensitivity(args) => {
            let (corpus, spec) = args.load()?;
            print!("{}", experiment::run_sensitivity(&corpus, &spec)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
