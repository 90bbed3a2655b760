use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quadmltc::harness::{Harness, HarnessError, RunConfig, RunOptions};
use quadmltc::postprocess::Source;

#[derive(Parser)]
#[command(version, about = "Multi-label text classification by stacking prompt-engineered LLM channels")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "quadmltc.toml")]
    config: PathBuf,
    /// Use the offline mock providers instead of HTTP endpoints.
    #[arg(long, global = true)]
    mock: bool,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the stratified samples.
    Sample,
    /// Classify the evaluation sample with one channel.
    Classify {
        /// 1, 2, 3, fewshot1, fewshot3, fewshot5 or bart.
        #[arg(long, value_parser = parse_channel)]
        channel: Source,
    },
    /// Assemble the stacked feature matrix and the hard vote.
    Features,
    /// Train the meta-classifier.
    TrainMeta {
        /// Select classifier and transformation by cross-validated grid search.
        #[arg(long)]
        grid: bool,
    },
    /// Apply the meta-classifier.
    Predict {
        /// Feature matrix to classify instead of the run's own.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Score every produced source against gold.
    Evaluate,
    /// Compare the channels, hard voting and stacking on the same documents.
    Ablate,
    /// Repeat the learned stages with consecutive replication seeds.
    Replicate {
        #[arg(long, short)]
        n: Option<usize>,
    },
    /// Descriptive and inferential statistics over the replication scores.
    Stats,
}

fn parse_channel(s: &str) -> Result<Source, String> {
    let source = match s {
        "1" => Source::Channel1,
        "2" => Source::Channel2,
        "3" => Source::Channel3,
        other => other.parse::<Source>().map_err(|e| e.to_string())?,
    };
    if quadmltc::harness::is_classifiable(source) {
        Ok(source)
    } else {
        Err(format!("{s} cannot be classified directly"))
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let config = RunConfig::load(&cli.config)?;
    let options = RunOptions {
        mock: cli.mock,
        seed: cli.seed,
        out: cli.out,
    };
    let mut harness = Harness::open(config, options)?;
    match cli.command {
        Command::Sample => {
            for s in harness.sample()? {
                println!("sampled {} documents", s.len());
            }
        }
        Command::Classify { channel } => {
            let out = harness.classify(channel)?;
            println!("{channel}: {} classified, {} unclassified", out.labels.len(), out.unclassified.len());
        }
        Command::Features => {
            let m = harness.features()?;
            println!("features: {} rows x {} columns, {} excluded", m.ids.len(), m.values.ncols(), m.excluded.len());
        }
        Command::TrainMeta { grid } => {
            let model = harness.train_meta(grid)?;
            println!(
                "meta-classifier: {} / {:?}, fold scores {:?}",
                model.loss(),
                model.transformation.kind(),
                model.cv_scores
            );
        }
        Command::Predict { features } => {
            let out = harness.predict(features.as_deref())?;
            println!("predicted {} documents", out.labels.len());
        }
        Command::Evaluate => print!("{}", harness.evaluate()?.to_markdown()),
        Command::Ablate => print!("{}", harness.ablate()?.to_markdown()),
        Command::Replicate { n } => {
            let n = n.unwrap_or(harness.config().replications);
            for set in harness.replicate(n)? {
                println!("{}: {:?}", set.approach, set.scores);
            }
        }
        Command::Stats => {
            let result = harness.stats();
            let path = harness.out_dir().join("reports/stats.md");
            if let Ok(body) = std::fs::read_to_string(&path) {
                print!("{body}");
            }
            result?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
