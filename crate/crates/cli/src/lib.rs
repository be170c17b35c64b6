//! Command-line orchestration of the self-introspection pipeline.

pub mod config;
pub mod pipeline;
pub mod runlog;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use pipeline::{Outcome, TrainOptions, Workspace};

#[derive(Debug, Parser)]
#[command(name = "selfintro", version = runlog::VERSION, about = "Train a classifier and map its activation space")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration used when no file is given.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the classifier.
    Train {
        /// Add N(0, sigma^2) input noise per minibatch, sigma ~ U(0, SIGMA_MAX).
        #[arg(long, value_name = "SIGMA_MAX")]
        noise_inject: Option<f64>,
        /// Record the first N test samples at every cycle end.
        #[arg(long, value_name = "N")]
        history_probe: Option<usize>,
    },
    /// Train the autoencoder on the classifier's hidden activations.
    Autoencode,
    /// Train the error estimator on the autoencoder's latent space.
    Estimate,
    /// Class densities, expected patterns, unit sorting and brainbow colours.
    Atlas,
    /// Apply the atlas unit ordering to the classifier.
    Reorder,
    /// Latents of many noisy copies of one test sample.
    Constellation,
    /// Targeted FGSM attacks with their latent trajectories.
    Attack,
    /// Estimated errors of correct versus misclassified test samples.
    Violin,
    /// Render a stored artifact as CSV or SVG.
    Export {
        artifact: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Autoencode => "autoencode",
            Command::Estimate => "estimate",
            Command::Atlas => "atlas",
            Command::Reorder => "reorder",
            Command::Constellation => "constellation",
            Command::Attack => "attack",
            Command::Violin => "violin",
            Command::Export { .. } => "export",
            Command::Config => "config",
        }
    }
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let data = PathBuf::from("data/mnist");
                match self.preset {
                    Preset::Desk => RunConfig::desk(data, "runs/desk"),
                    Preset::Paper => RunConfig::paper(data, "runs/paper"),
                }
            }
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = &self.output_dir {
            c.output_dir = d.clone();
        }
        if let Some(d) = &self.data_dir {
            c.data.dir = d.clone();
        }
        Ok(c)
    }
}

/// Runs one command against a resolved configuration and logs it.
pub fn execute(config: RunConfig, command: &Command) -> Result<Outcome> {
    if let Command::Config = command {
        print!("{}", config.to_toml()?);
        return Ok(Outcome::default());
    }
    let ws = Workspace::new(config)?;
    let outcome = match command {
        Command::Train {
            noise_inject,
            history_probe,
        } => pipeline::train(
            &ws,
            TrainOptions {
                noise_inject: *noise_inject,
                history_probe: *history_probe,
            },
        )?,
        Command::Autoencode => pipeline::autoencode(&ws)?,
        Command::Estimate => pipeline::estimate(&ws)?,
        Command::Atlas => pipeline::atlas(&ws)?,
        Command::Reorder => pipeline::reorder(&ws)?,
        Command::Constellation => pipeline::constellation(&ws)?,
        Command::Attack => pipeline::attack(&ws)?,
        Command::Violin => pipeline::violin(&ws)?,
        Command::Export { artifact, out } => pipeline::export(&ws, artifact, out.as_deref())?,
        Command::Config => unreachable!(),
    };
    runlog::append(&ws.config, command.name(), &outcome)?;
    Ok(outcome)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let config = cli.global.resolve()?;
    execute(config, &cli.command)
}
