//! The `crimeflow` command-line pipeline.
//!
//! Stages read the outputs of earlier stages from fixed locations under the output
//! directory and record every file they write in `manifest.json`.

pub mod args;
pub mod config;
pub mod error;
pub mod fsio;
pub mod stages;

use std::path::PathBuf;

use crimeflow::ingest::Timezone;

use args::{Cli, Command, FeaturesCommand, NetworkCommand, SynthCommand};
use config::Config;
use error::{CliError, Result};

/// Settings shared by every stage.
pub struct Context {
    pub config: Config,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub tz: Timezone,
}

impl Context {
    pub fn resolve(cli: &Cli) -> Result<Context> {
        let config = match &cli.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let threads = cli
            .threads
            .or(config.threads)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let tz = match cli.tz.as_ref().or(config.tz.as_ref()) {
            Some(name) => name.parse::<Timezone>()?,
            None => Timezone::default(),
        };
        Ok(Context {
            out_dir: cli
                .out_dir
                .clone()
                .or_else(|| config.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            seed: cli.seed.or(config.seed).unwrap_or(0),
            threads,
            tz,
            config,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context::resolve(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", ctx.threads)))?;
    pool.install(|| match &cli.command {
        Command::Ingest(a) => stages::ingest::run(&ctx, a),
        Command::Network {
            command: NetworkCommand::Build(a),
        } => stages::network::run(&ctx, a),
        Command::Features {
            command: FeaturesCommand::Build(a),
        } => stages::features::run(&ctx, a),
        Command::Explain(a) => stages::explain::run(&ctx, a),
        Command::Forecast(a) => stages::forecast::run(&ctx, a),
        Command::Synth {
            command: SynthCommand::Generate(a),
        } => stages::synth::run(&ctx, a),
        Command::Report(a) => stages::report::run(&ctx, a),
    })
}
