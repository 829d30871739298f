use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssmrecon::pipeline::{self, PipelineConfig, PipelineError, ReconstructSource};

/// Liver shape reconstruction from sagittal slice masks.
#[derive(Parser)]
#[command(name = "ssmrecon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic population.
    Synth(ConfigArg),
    /// Register the training meshes and build the shape model.
    BuildSsm(ConfigArg),
    /// Slice every subject into mask stacks.
    Slice(ConfigArg),
    /// Train the regression network.
    Train(ConfigArg),
    /// Reconstruct one subject (or an explicit mask stack) and print its volume.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, conflicts_with = "stack", required_unless_present = "stack")]
        subject: Option<String>,
        /// Mask stack manifest to reconstruct instead of a subject.
        #[arg(long)]
        stack: Option<PathBuf>,
    },
    /// Evaluate on the test split and write the report.
    Evaluate(ConfigArg),
    /// Check the published paired-test rows against the report math.
    StatsVectors {
        /// Accepted for uniformity; not used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<bool, PipelineError> {
    let load = |c: &ConfigArg| PipelineConfig::load(&c.config);
    match cmd {
        Command::Synth(c) => {
            let cfg = load(&c)?;
            let gt = pipeline::cmd_synth(&cfg)?;
            println!("wrote {} subjects to {}", gt.subjects.len(), cfg.population_dir().display());
        }
        Command::BuildSsm(c) => {
            let cfg = load(&c)?;
            let ds = pipeline::cmd_build_ssm(&cfg)?;
            if ds.components < ds.components_requested {
                eprintln!(
                    "note: {} components requested, population of {} allows {}",
                    ds.components_requested,
                    ds.ssm_members.len(),
                    ds.components
                );
            }
            println!(
                "shape model with K = {} from {} meshes -> {} ({} train / {} test)",
                ds.components,
                ds.ssm_members.len(),
                cfg.ssm_file().display(),
                ds.train.len(),
                ds.test.len()
            );
        }
        Command::Slice(c) => {
            let cfg = load(&c)?;
            let n = pipeline::cmd_slice(&cfg)?;
            println!("sliced {n} subjects");
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let log = pipeline::cmd_train(&cfg)?;
            let best = &log.epochs[log.best_epoch];
            println!(
                "trained {} epochs; best epoch {} (train loss {:.4e}); weights -> {}",
                log.epochs.len() - 1,
                log.best_epoch,
                best.train_loss,
                cfg.weights_file().display()
            );
        }
        Command::Reconstruct { config, subject, stack } => {
            let cfg = load(&config)?;
            let source = match (subject, stack) {
                (Some(id), _) => ReconstructSource::Subject(id),
                (None, Some(p)) => ReconstructSource::Stack(p),
                (None, None) => unreachable!("clap requires one of --subject / --stack"),
            };
            let r = pipeline::cmd_reconstruct(&cfg, &source)?;
            println!("{}", r.path.display());
            println!("volume_cm3 {}", r.volume_cm3);
        }
        Command::Evaluate(c) => {
            let cfg = load(&c)?;
            let report = pipeline::cmd_evaluate(&cfg)?;
            print!("{}", report.to_text());
        }
        Command::StatsVectors { .. } => {
            let (text, ok) = pipeline::cmd_stats_vectors()?;
            print!("{text}");
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    pipeline::configure_threads();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
