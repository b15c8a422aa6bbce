use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpt_bench::commands::{evaluate, gen_data, parasitic, report, train};
use qpt_bench::{with_workers, BenchError, ExperimentConfig, Result};
use qpt_pipeline::EstimatorKind;

#[derive(Parser)]
#[command(name = "qpt-bench", version, about = "Compare tomography parameter estimators on simulated data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and store the training corpora.
    GenData(Common),
    /// Train the autoencoder and both feed-forward heads.
    Train(Common),
    /// Evaluate the estimators on fresh records.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        method: Method,
    },
    /// Anisotropic Pauli-noise robustness study (dc only).
    Parasitic(Common),
    /// Merge all summaries of a run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of the configured k factors.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mf,
    Ff,
    AnnFf,
    All,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenData(c) => {
            let config = c.load()?;
            let manifest = with_workers(config.workers, || gen_data(&config, c.k.as_deref()))?;
            Ok(format!("wrote {} dataset file(s)", manifest.files.len()))
        }
        Command::Train(c) => {
            let config = c.load()?;
            let summary = with_workers(config.workers, || train(&config, c.k.as_deref()))?;
            Ok(format!("trained models for {} k value(s)", summary.len()))
        }
        Command::Evaluate { common, method } => {
            let config = common.load()?;
            let methods = match method {
                Method::Mf => Some(vec![EstimatorKind::Mf]),
                Method::Ff => Some(vec![EstimatorKind::Ff]),
                Method::AnnFf => Some(vec![EstimatorKind::AnnFf]),
                Method::All => None,
            };
            let summary = with_workers(config.workers, || {
                evaluate(&config, common.k.as_deref(), methods.as_deref())
            })?;
            Ok(format!("evaluated {} k value(s)", summary.k.len()))
        }
        Command::Parasitic(c) => {
            let config = c.load()?;
            let summary = with_workers(config.workers, || parasitic(&config))?;
            Ok(format!("wrote {} parasitic rows", summary.rows))
        }
        Command::Report { out } => {
            let path = report(&out)?;
            Ok(format!("wrote {}", path.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qpt-bench: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &BenchError) -> u8 {
    e.exit_code() as u8
}
