use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wppg::config::PipelineConfig;
use wppg::error::{CliError, CliResult};
use wppg::pipeline::{Pipeline, Stage};

/// Wrist-PPG restoration and AF classification pipeline.
#[derive(Debug, Parser)]
#[command(name = "wppg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Evaluate only this test split (the other one trains).
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    split: Option<u8>,
    /// Classifier order.
    #[arg(long, global = true, value_parser = ["1", "3", "5", "7"])]
    q: Option<String>,
    /// Restoration passes; 0 runs the raw PPG branch only.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=2))]
    passes: Option<u8>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the manifest and resolve every recording.
    Ingest,
    /// Resample, filter, window, detrend and normalize; label windows.
    Preprocess,
    /// Train the quality gate on quality-annotated PPG windows.
    QcTrain,
    /// Drop corrupted PPG windows and their paired ECG windows.
    QcApply,
    /// Train the restoration CycleGAN.
    RestoreTrain,
    /// Restore acceptable PPG windows.
    Restore,
    /// Train the AF classifiers.
    ClfTrain,
    /// Write metric, confusion and ROC tables and plots.
    Evaluate,
    /// Entropy means of original and restored PPG.
    EntropyReport,
    /// Every stage in order, skipping those already up to date.
    Pipeline,
    /// Write a synthetic dataset with a manifest.
    SynthData {
        dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        /// 10 s windows per subject.
        #[arg(long, default_value_t = 12)]
        windows: usize,
    },
}

fn config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.split {
        cfg.test_splits = vec![s];
    }
    if let Some(q) = &cli.q {
        cfg.classifier.q = q.parse().map_err(|_| CliError::Config(format!("bad --q {q}")))?;
    }
    if let Some(p) = cli.passes {
        cfg.restorer.passes = p as usize;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let stage = match &cli.command {
        Command::SynthData { dir, subjects, windows } => {
            let seed = cli.seed.unwrap_or(0);
            let path = wppg::synthetic::write_synthetic_dataset(dir, *subjects, *windows, seed)?;
            println!("{}", path.display());
            return Ok(());
        }
        Command::Pipeline => None,
        Command::Ingest => Some(Stage::Ingest),
        Command::Preprocess => Some(Stage::Preprocess),
        Command::QcTrain => Some(Stage::QcTrain),
        Command::QcApply => Some(Stage::QcApply),
        Command::RestoreTrain => Some(Stage::RestoreTrain),
        Command::Restore => Some(Stage::Restore),
        Command::ClfTrain => Some(Stage::ClfTrain),
        Command::Evaluate => Some(Stage::Evaluate),
        Command::EntropyReport => Some(Stage::EntropyReport),
    };
    let cfg = config(&cli)?;
    eprint!("effective config:\n{}", cfg.effective_json());
    let pipeline = Pipeline::new(cfg)?;
    match stage {
        Some(s) => {
            pipeline.write_effective_config()?;
            pipeline.run_stage(s)
        }
        None => pipeline.run_all(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
